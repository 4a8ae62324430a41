//! C ABI over the pstnet estimator. Handles are opaque and owned by the
//! caller between `*_new`/`*_load` and `*_free`. Every fallible call returns
//! a `PstStatus`; the message of the last failure on the calling thread is
//! available from `pst_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use pstnet::atmos::{argmax, AtmosphericState};
use pstnet::ingest::{IngestConfig, PowerClient};
use pstnet::net::Dims;
use pstnet::{Error, PstnetModel, Regime};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PstStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Corrupt = 4,
    Domain = 5,
    Ingest = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Unsupported = 9,
}

/// Trained estimator.
pub struct PstModel {
    inner: PstnetModel,
}

/// Surface-weather client with its cache.
pub struct PstClient {
    inner: PowerClient,
}

/// Column state at one altitude. Mirrors the model's seven inputs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PstState {
    pub altitude_m: f64,
    pub temperature_k: f64,
    pub pressure_pa: f64,
    pub wind10_mps: f64,
    pub lapse_k_per_m: f64,
    pub density_ratio: f64,
    pub latitude_deg: f64,
}

impl From<PstState> for AtmosphericState {
    fn from(s: PstState) -> Self {
        AtmosphericState {
            altitude_m: s.altitude_m,
            temperature_k: s.temperature_k,
            pressure_pa: s.pressure_pa,
            wind10_mps: s.wind10_mps,
            lapse_k_per_m: s.lapse_k_per_m,
            density_ratio: s.density_ratio,
            latitude_deg: s.latitude_deg,
        }
    }
}

impl From<AtmosphericState> for PstState {
    fn from(s: AtmosphericState) -> Self {
        PstState {
            altitude_m: s.altitude_m,
            temperature_k: s.temperature_k,
            pressure_pa: s.pressure_pa,
            wind10_mps: s.wind10_mps,
            lapse_k_per_m: s.lapse_k_per_m,
            density_ratio: s.density_ratio,
            latitude_deg: s.latitude_deg,
        }
    }
}

/// Estimate with gate diagnostics. `regime` indexes convective, neutral,
/// stable, stratospheric.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PstEstimate {
    pub k: f64,
    pub k_mo: f64,
    pub alpha: [f64; 4],
    pub regime: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PstStatus, msg: impl Into<String>) -> PstStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> PstStatus {
    match e {
        Error::Io(_) => PstStatus::Io,
        Error::Corrupt(_) | Error::Version { .. } | Error::Checksum { .. } => PstStatus::Corrupt,
        Error::Domain(_) => PstStatus::Domain,
        Error::Ingest(_) => PstStatus::Ingest,
        Error::Unsupported(_) => PstStatus::Unsupported,
        Error::Config(_) | Error::Diverged { .. } | Error::SimAbort(_) => PstStatus::InvalidArgument,
    }
}

fn from_error(e: Error) -> PstStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f`, turning panics into `Panic`.
fn guard(f: impl FnOnce() -> PstStatus) -> PstStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PstStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, PstStatus> {
    if p.is_null() {
        return Err(fail(PstStatus::NullArgument, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(PstStatus::InvalidArgument, "path is not UTF-8"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pst_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `cap`). Returns the full message length
/// without the NUL, or 0 when there is none.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn pst_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Reads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pst_model_load(path: *const c_char, out: *mut *mut PstModel) -> PstStatus {
    guard(|| {
        if out.is_null() {
            return fail(PstStatus::NullArgument, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match PstnetModel::load(&path) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(PstModel { inner: m }));
                PstStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Decodes a model from its serialized bytes.
///
/// # Safety
/// `bytes` must be valid for `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pst_model_from_bytes(bytes: *const u8, len: usize, out: *mut *mut PstModel) -> PstStatus {
    guard(|| {
        if bytes.is_null() || out.is_null() {
            return fail(PstStatus::NullArgument, "bytes or out is null");
        }
        match PstnetModel::from_bytes(std::slice::from_raw_parts(bytes, len)) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(PstModel { inner: m }));
                PstStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Untrained model with the reference architecture and seeded weights.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pst_model_init(seed: u64, out: *mut *mut PstModel) -> PstStatus {
    guard(|| {
        if out.is_null() {
            return fail(PstStatus::NullArgument, "out is null");
        }
        *out = Box::into_raw(Box::new(PstModel { inner: PstnetModel::init(Dims::default(), seed) }));
        PstStatus::Ok
    })
}

/// # Safety
/// `model` must be null or come from a `pst_model_*` constructor and not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pst_model_free(model: *mut PstModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Serializes the model. With `buf` null or `cap` too small, stores the
/// required size in `len` and returns `BufferTooSmall`.
///
/// # Safety
/// `model` must be a live handle; `buf` valid for `cap` bytes or null;
/// `len` writable.
#[no_mangle]
pub unsafe extern "C" fn pst_model_to_bytes(model: *const PstModel, buf: *mut u8, cap: usize, len: *mut usize) -> PstStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), len.is_null()) else {
            return fail(PstStatus::NullArgument, "model or len is null");
        };
        let bytes = m.inner.to_bytes();
        *len = bytes.len();
        if buf.is_null() || cap < bytes.len() {
            return fail(PstStatus::BufferTooSmall, format!("need {} bytes", bytes.len()));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
        PstStatus::Ok
    })
}

/// CRC32 of the serialized parameters.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pst_model_checksum(model: *const PstModel, out: *mut u32) -> PstStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return fail(PstStatus::NullArgument, "model or out is null");
        };
        *out = m.inner.checksum();
        PstStatus::Ok
    })
}

/// Learnable parameter count.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pst_model_param_count(model: *const PstModel, out: *mut usize) -> PstStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return fail(PstStatus::NullArgument, "model or out is null");
        };
        *out = m.inner.param_audit().total;
        PstStatus::Ok
    })
}

/// Validated estimate with gate diagnostics.
///
/// # Safety
/// `model` must be a live handle; `state` readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pst_model_estimate(model: *const PstModel, state: *const PstState, out: *mut PstEstimate) -> PstStatus {
    guard(|| {
        let (Some(m), Some(s), false) = (model.as_ref(), state.as_ref(), out.is_null()) else {
            return fail(PstStatus::NullArgument, "model, state or out is null");
        };
        match m.inner.forward(&AtmosphericState::from(*s)) {
            Ok((k, d)) => {
                *out = PstEstimate { k, k_mo: d.k_mo, alpha: d.alpha, regime: argmax(&d.alpha) as u32 };
                PstStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// TKE for `n` states into `out`. Every state is validated first; nothing
/// is written on failure.
///
/// # Safety
/// `states` readable and `out` writable for `n` elements.
#[no_mangle]
pub unsafe extern "C" fn pst_model_predict_batch(model: *const PstModel, states: *const PstState, n: usize, out: *mut f64) -> PstStatus {
    guard(|| {
        let Some(m) = model.as_ref() else { return fail(PstStatus::NullArgument, "model is null") };
        if n == 0 {
            return PstStatus::Ok;
        }
        if states.is_null() || out.is_null() {
            return fail(PstStatus::NullArgument, "states or out is null");
        }
        let input: Vec<AtmosphericState> = std::slice::from_raw_parts(states, n).iter().map(|&s| s.into()).collect();
        for (i, s) in input.iter().enumerate() {
            if let Err(e) = s.validate() {
                return fail(status_of(&e), format!("state {i}: {e}"));
            }
        }
        let out = std::slice::from_raw_parts_mut(out, n);
        for (o, s) in out.iter_mut().zip(&input) {
            *o = m.inner.predict(s);
        }
        PstStatus::Ok
    })
}

/// Regime name for an index from `PstEstimate::regime`, or null.
#[no_mangle]
pub extern "C" fn pst_regime_name(index: u32) -> *const c_char {
    match Regime::from_index(index as usize) {
        Some(Regime::Convective) => c"convective".as_ptr(),
        Some(Regime::Neutral) => c"neutral".as_ptr(),
        Some(Regime::Stable) => c"stable".as_ptr(),
        Some(Regime::Stratospheric) => c"stratospheric".as_ptr(),
        None => ptr::null(),
    }
}

/// Weather client. `offline` non-zero serves fixtures only; `cache_dir`
/// may be null for an in-memory cache.
///
/// # Safety
/// `cache_dir` null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pst_client_new(offline: i32, cache_dir: *const c_char, out: *mut *mut PstClient) -> PstStatus {
    guard(|| {
        if out.is_null() {
            return fail(PstStatus::NullArgument, "out is null");
        }
        let cache = if cache_dir.is_null() {
            None
        } else {
            match path_arg(cache_dir) {
                Ok(p) => Some(p),
                Err(s) => return s,
            }
        };
        let cfg = IngestConfig { offline: offline != 0, cache_dir: cache, ..IngestConfig::default() };
        match PowerClient::new(cfg) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(PstClient { inner: c }));
                PstStatus::Ok
            }
            Err(e) => from_error(e.into()),
        }
    })
}

/// # Safety
/// `client` must be null or come from `pst_client_new` and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn pst_client_free(client: *mut PstClient) {
    if !client.is_null() {
        drop(Box::from_raw(client));
    }
}

/// Column state at `altitude_m` above the point, anchored on the latest
/// surface observation.
///
/// # Safety
/// `client` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pst_client_state(client: *const PstClient, lat: f64, lon: f64, altitude_m: f64, out: *mut PstState) -> PstStatus {
    guard(|| {
        let (Some(c), false) = (client.as_ref(), out.is_null()) else {
            return fail(PstStatus::NullArgument, "client or out is null");
        };
        match c.inner.column(lat, lon, &[altitude_m]) {
            Ok((_, col)) => {
                *out = col[0].into();
                PstStatus::Ok
            }
            Err(Error::Ingest(pstnet::ingest::IngestError::InvalidQuery(m))) => fail(PstStatus::InvalidArgument, m),
            Err(e) => from_error(e),
        }
    })
}
