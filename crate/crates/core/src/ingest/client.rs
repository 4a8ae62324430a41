//! Rate-limited POWER client with an in-memory and on-disk TTL cache.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::fixtures::{climatology_json, fixture_json};
use super::{parse_power_json, IngestError, Source, WeatherQuery, WeatherResponse};
use crate::atmos::AtmosphericState;

pub const DEFAULT_BASE_URL: &str = "https://power.larc.nasa.gov/api/temporal/hourly/point";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpReply {
    pub status: u16,
    pub retry_after_s: Option<f64>,
    pub body: String,
}

/// One HTTP GET. Swappable so tests can count or forbid network access.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpReply, IngestError>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("pstnet/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| IngestError::Transport { message: e.to_string(), retry_after_s: None })?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn get(&self, url: &str) -> Result<HttpReply, IngestError> {
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| IngestError::Transport { message: e.to_string(), retry_after_s: None })?;
        let status = resp.status().as_u16();
        let retry_after_s = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse().ok());
        let body = resp.text().map_err(|e| IngestError::Transport { message: e.to_string(), retry_after_s })?;
        Ok(HttpReply { status, retry_after_s, body })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub base_url: String,
    pub cache_dir: Option<PathBuf>,
    pub ttl_s: u64,
    /// Serve fixtures only; never touch the network.
    pub offline: bool,
    pub min_interval: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub timeout: Duration,
}

pub const DEFAULT_TTL_S: u64 = 6 * 3_600;
pub const OFFLINE_ENV: &str = "PSTNET_OFFLINE";

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.into(),
            cache_dir: None,
            ttl_s: DEFAULT_TTL_S,
            offline: false,
            min_interval: Duration::from_secs(1),
            max_retries: 4,
            backoff_base: Duration::from_secs(1),
            timeout: Duration::from_secs(30),
        }
    }
}

impl IngestConfig {
    pub fn offline() -> Self {
        Self { offline: true, ..Self::default() }
    }

    /// Defaults, with `PSTNET_OFFLINE=1` forcing fixture mode.
    pub fn from_env() -> Self {
        Self { offline: offline_from_env(), ..Self::default() }
    }
}

pub fn offline_from_env() -> bool {
    std::env::var(OFFLINE_ENV).is_ok_and(|v| v.trim() == "1")
}

#[derive(Serialize, Deserialize)]
struct CacheEnvelope {
    key: String,
    fetched_at: u64,
    ttl_s: u64,
    response: WeatherResponse,
}

type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub struct PowerClient {
    cfg: IngestConfig,
    transport: Option<Arc<dyn Transport>>,
    clock: Clock,
    last_request: Mutex<Option<Instant>>,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    memory: Mutex<HashMap<String, WeatherResponse>>,
    network_calls: AtomicUsize,
}

impl PowerClient {
    /// Live client over HTTPS, or a fixture-only client when offline.
    pub fn new(cfg: IngestConfig) -> Result<Self, IngestError> {
        let transport: Option<Arc<dyn Transport>> =
            if cfg.offline { None } else { Some(Arc::new(ReqwestTransport::new(cfg.timeout)?)) };
        Ok(Self::build(cfg, transport))
    }

    pub fn with_transport(cfg: IngestConfig, transport: Arc<dyn Transport>) -> Self {
        Self::build(cfg, Some(transport))
    }

    fn build(cfg: IngestConfig, transport: Option<Arc<dyn Transport>>) -> Self {
        Self {
            cfg,
            transport,
            clock: Arc::new(unix_now),
            last_request: Mutex::new(None),
            inflight: Mutex::new(HashMap::new()),
            memory: Mutex::new(HashMap::new()),
            network_calls: AtomicUsize::new(0),
        }
    }

    /// Replaces the wall clock (unix seconds) used for cache expiry.
    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn config(&self) -> &IngestConfig {
        &self.cfg
    }

    pub fn is_offline(&self) -> bool {
        self.cfg.offline
    }

    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn fetch_point(&self, q: &WeatherQuery) -> Result<WeatherResponse, IngestError> {
        q.validate()?;
        if self.cfg.offline {
            return fixture_response(q);
        }
        let key = q.cache_key();
        let gate = {
            let mut map = self.inflight.lock().expect("inflight lock");
            map.entry(key.clone()).or_default().clone()
        };
        let _guard = gate.lock().expect("per-key lock");
        let now = (self.clock)();
        if let Some(hit) = self.cached(&key, now)? {
            return Ok(hit);
        }
        let resp = self.download(q, now)?;
        resp.require_complete()?;
        self.store(&key, &resp)?;
        Ok(resp)
    }

    /// Surface fetch plus the ISA-blended column at `levels`.
    pub fn column(&self, lat: f64, lon: f64, levels: &[f64]) -> crate::Result<(WeatherResponse, Vec<AtmosphericState>)> {
        let resp = self.fetch_point(&WeatherQuery::point(lat, lon))?;
        let column = super::to_state_column(&resp, levels, false)?;
        Ok((resp, column))
    }

    fn fresh(&self, fetched_at: u64, now: u64) -> bool {
        now < fetched_at.saturating_add(self.cfg.ttl_s)
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        self.cfg.cache_dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    fn cached(&self, key: &str, now: u64) -> Result<Option<WeatherResponse>, IngestError> {
        if let Some(r) = self.memory.lock().expect("memory lock").get(key) {
            if self.fresh(r.fetched_at, now) {
                return Ok(Some(WeatherResponse { source: Source::Cache, ..r.clone() }));
            }
        }
        let Some(path) = self.cache_path(key) else { return Ok(None) };
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(IngestError::Cache(format!("{}: {e}", path.display()))),
        };
        // an unreadable entry is treated as a miss and overwritten
        let Ok(env) = serde_json::from_str::<CacheEnvelope>(&text) else { return Ok(None) };
        if env.key != key || !self.fresh(env.fetched_at, now) {
            return Ok(None);
        }
        Ok(Some(WeatherResponse { source: Source::Cache, ..env.response }))
    }

    fn store(&self, key: &str, resp: &WeatherResponse) -> Result<(), IngestError> {
        self.memory.lock().expect("memory lock").insert(key.into(), resp.clone());
        let Some(path) = self.cache_path(key) else { return Ok(()) };
        let env = CacheEnvelope { key: key.into(), fetched_at: resp.fetched_at, ttl_s: self.cfg.ttl_s, response: resp.clone() };
        let text = serde_json::to_string(&env).map_err(|e| IngestError::Cache(e.to_string()))?;
        write_atomic(&path, &text).map_err(|e| IngestError::Cache(format!("{}: {e}", path.display())))
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().expect("rate lock");
        if let Some(t) = *last {
            let wait = self.cfg.min_interval.saturating_sub(t.elapsed());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
    }

    fn download(&self, q: &WeatherQuery, now: u64) -> Result<WeatherResponse, IngestError> {
        let transport = self.transport.as_ref().ok_or_else(|| IngestError::Transport {
            message: "no network transport configured".into(),
            retry_after_s: None,
        })?;
        let url = q.url(&self.cfg.base_url);
        let mut attempt = 0;
        loop {
            self.pace();
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            let reply = transport.get(&url)?;
            match reply.status {
                200 => return parse_power_json(&reply.body, q, Source::Live, now),
                429 | 503 if attempt < self.cfg.max_retries => {
                    let backoff = self.cfg.backoff_base.as_secs_f64() * 2f64.powi(attempt as i32);
                    std::thread::sleep(Duration::from_secs_f64(backoff.max(reply.retry_after_s.unwrap_or(0.0))));
                    attempt += 1;
                }
                status => {
                    return Err(IngestError::Transport {
                        message: format!("HTTP {status}: {}", reply.body.chars().take(120).collect::<String>()),
                        retry_after_s: reply.retry_after_s,
                    })
                }
            }
        }
    }
}

/// Committed fixture for the default day at a fixture point, otherwise the
/// synthetic climatology. Timestamp zero keeps payloads bit-identical.
fn fixture_response(q: &WeatherQuery) -> Result<WeatherResponse, IngestError> {
    let (lat, lon) = q.rounded();
    let default_day = q.start == WeatherQuery::DEFAULT_DATE && q.end == WeatherQuery::DEFAULT_DATE;
    let resp = match fixture_json(lat, lon).filter(|_| default_day) {
        Some(text) => parse_power_json(text, q, Source::Fixture, 0)?,
        None => parse_power_json(&climatology_json(lat, lon, q.start, q.end), q, Source::Fixture, 0)?,
    };
    resp.require_complete()?;
    Ok(resp)
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp.{}.{}", std::process::id(), COUNTER.fetch_add(1, Ordering::Relaxed)));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)
}
