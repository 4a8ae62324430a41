//! Standard atmosphere, feature assembly, bulk Richardson number and
//! stability-regime labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravitational acceleration used by the stability physics (m/s²).
pub const GRAVITY: f64 = 9.81;
/// Dry adiabatic lapse rate Γ_d (K/m).
pub const DRY_ADIABATIC_LAPSE: f64 = 0.0098;
/// Layer depth used by the bulk Richardson number (m).
pub const RI_LAYER_DEPTH_M: f64 = 100.0;
/// Shear across the Richardson layer, as a fraction of the 10 m wind.
pub const RI_SHEAR_FRACTION: f64 = 0.2;
/// Lower bound on the Richardson-layer shear (m/s).
pub const RI_SHEAR_FLOOR_MPS: f64 = 0.5;
/// Softmax temperature on signed distances to the Ri thresholds.
pub const REGIME_TAU_RI: f64 = 0.03;
/// Logistic width of the stratospheric altitude threshold (m).
pub const REGIME_TAU_ALT_M: f64 = 25.0;
/// Ri threshold separating neutral from convective/stable.
pub const RI_THRESHOLD: f64 = 0.1;
/// Altitude above which the stratospheric regime dominates (m).
pub const STRATOSPHERE_ALT_M: f64 = 12_000.0;

pub const MAX_ALTITUDE_M: f64 = 35_000.0;

pub const SEA_LEVEL_TEMPERATURE_K: f64 = 288.15;
pub const SEA_LEVEL_PRESSURE_PA: f64 = 101_325.0;
const ISA_G0: f64 = 9.80665;
const R_AIR: f64 = 287.052_87;

/// ISA segments: (base altitude m, base temperature K, lapse K/m).
const ISA_LAYERS: [(f64, f64, f64); 4] = [
    (0.0, 288.15, -0.0065),
    (11_000.0, 216.65, 0.0),
    (20_000.0, 216.65, 0.001),
    (32_000.0, 228.65, 0.0028),
];

pub const FEATURE_COUNT: usize = 7;
pub const REGIME_COUNT: usize = 4;

/// Raw atmospheric state at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtmosphericState {
    pub altitude_m: f64,
    pub temperature_k: f64,
    pub pressure_pa: f64,
    pub wind10_mps: f64,
    /// Vertical temperature gradient dT/dz, signed (K/m).
    pub lapse_k_per_m: f64,
    pub density_ratio: f64,
    pub latitude_deg: f64,
}

impl AtmosphericState {
    /// Checks the physical invariants of the state.
    pub fn validate(&self) -> Result<()> {
        let fields = self.as_array();
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite atmospheric state: {self:?}")));
        }
        if !(0.0..=MAX_ALTITUDE_M).contains(&self.altitude_m) {
            return Err(Error::domain(format!("altitude {} m outside [0, 35000]", self.altitude_m)));
        }
        if self.temperature_k <= 0.0 || self.pressure_pa <= 0.0 || self.density_ratio <= 0.0 {
            return Err(Error::domain("temperature, pressure and density ratio must be positive"));
        }
        if self.wind10_mps < 0.0 {
            return Err(Error::domain("wind speed must be non-negative"));
        }
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            return Err(Error::domain("latitude outside [-90, 90]"));
        }
        Ok(())
    }

    /// Fields in feature order `[h, T, P, u10, dT/dz, rho/rho0, lat]`.
    pub fn as_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.altitude_m,
            self.temperature_k,
            self.pressure_pa,
            self.wind10_mps,
            self.lapse_k_per_m,
            self.density_ratio,
            self.latitude_deg,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        Self {
            altitude_m: v[0],
            temperature_k: v[1],
            pressure_pa: v[2],
            wind10_mps: v[3],
            lapse_k_per_m: v[4],
            density_ratio: v[5],
            latitude_deg: v[6],
        }
    }

    pub fn with_wind(mut self, wind10_mps: f64) -> Self {
        self.wind10_mps = wind10_mps;
        self
    }

    pub fn with_lapse(mut self, lapse_k_per_m: f64) -> Self {
        self.lapse_k_per_m = lapse_k_per_m;
        self
    }
}

/// Density ratio ρ/ρ₀ from the ideal gas law.
pub fn density_ratio(pressure_pa: f64, temperature_k: f64) -> f64 {
    (pressure_pa / SEA_LEVEL_PRESSURE_PA) * (SEA_LEVEL_TEMPERATURE_K / temperature_k)
}

fn isa_layer(altitude_m: f64) -> usize {
    ISA_LAYERS
        .iter()
        .rposition(|&(base, _, _)| altitude_m >= base)
        .unwrap_or(0)
}

fn isa_base_pressures() -> [f64; 4] {
    let mut p = [SEA_LEVEL_PRESSURE_PA; 4];
    for i in 1..ISA_LAYERS.len() {
        let (base, t_base, lapse) = ISA_LAYERS[i - 1];
        let top = ISA_LAYERS[i].0;
        p[i] = layer_pressure(p[i - 1], t_base, lapse, top - base);
    }
    p
}

fn layer_pressure(p_base: f64, t_base: f64, lapse: f64, dh: f64) -> f64 {
    if lapse == 0.0 {
        p_base * (-ISA_G0 * dh / (R_AIR * t_base)).exp()
    } else {
        let t = t_base + lapse * dh;
        p_base * (t / t_base).powf(-ISA_G0 / (R_AIR * lapse))
    }
}

/// ISA temperature (K) at a geopotential altitude.
pub fn isa_temperature(altitude_m: f64) -> f64 {
    let (base, t_base, lapse) = ISA_LAYERS[isa_layer(altitude_m)];
    t_base + lapse * (altitude_m - base)
}

/// ISA pressure (Pa) at a geopotential altitude.
pub fn isa_pressure(altitude_m: f64) -> f64 {
    let i = isa_layer(altitude_m);
    let (base, t_base, lapse) = ISA_LAYERS[i];
    layer_pressure(isa_base_pressures()[i], t_base, lapse, altitude_m - base)
}

/// ISA lapse rate dT/dz (K/m) of the layer containing `altitude_m`.
pub fn isa_lapse(altitude_m: f64) -> f64 {
    ISA_LAYERS[isa_layer(altitude_m)].2
}

/// Standard-atmosphere state for an altitude. Wind is zero and latitude is
/// the equator; callers override those fields when they are known.
pub fn isa_state(altitude_m: f64) -> Result<AtmosphericState> {
    if !(0.0..=MAX_ALTITUDE_M).contains(&altitude_m) {
        return Err(Error::domain(format!("altitude {altitude_m} m outside [0, 35000]")));
    }
    let temperature_k = isa_temperature(altitude_m);
    let pressure_pa = isa_pressure(altitude_m);
    Ok(AtmosphericState {
        altitude_m,
        temperature_k,
        pressure_pa,
        wind10_mps: 0.0,
        lapse_k_per_m: isa_lapse(altitude_m),
        density_ratio: density_ratio(pressure_pa, temperature_k),
        latitude_deg: 0.0,
    })
}

/// Bulk Richardson number over a fixed 100 m layer.
///
/// `Ri = (g/T)(dT/dz + Γ_d) Δz² / Δu²` with `Δu = max(0.2 u10, 0.5)`.
pub fn bulk_richardson(state: &AtmosphericState) -> f64 {
    let shear = (RI_SHEAR_FRACTION * state.wind10_mps).max(RI_SHEAR_FLOOR_MPS);
    (GRAVITY / state.temperature_k)
        * (state.lapse_k_per_m + DRY_ADIABATIC_LAPSE)
        * RI_LAYER_DEPTH_M
        * RI_LAYER_DEPTH_M
        / (shear * shear)
}

/// Stability regimes, in gate/expert order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    Convective = 0,
    Neutral = 1,
    Stable = 2,
    Stratospheric = 3,
}

impl Regime {
    pub const ALL: [Regime; REGIME_COUNT] =
        [Regime::Convective, Regime::Neutral, Regime::Stable, Regime::Stratospheric];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Regime> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Convective => "convective",
            Regime::Neutral => "neutral",
            Regime::Stable => "stable",
            Regime::Stratospheric => "stratospheric",
        }
    }

    /// Hard threshold classification.
    pub fn classify(ri: f64, altitude_m: f64) -> Regime {
        if altitude_m > STRATOSPHERE_ALT_M {
            Regime::Stratospheric
        } else if ri < -RI_THRESHOLD {
            Regime::Convective
        } else if ri > RI_THRESHOLD {
            Regime::Stable
        } else {
            Regime::Neutral
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown regime '{s}'")))
    }
}

/// Soft four-class stability label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeTarget {
    pub probs: [f64; REGIME_COUNT],
    pub ri: f64,
}

impl RegimeTarget {
    pub fn argmax(&self) -> Regime {
        Regime::from_index(argmax(&self.probs)).expect("four classes")
    }

    pub fn one_hot(regime: Regime, ri: f64) -> Self {
        let mut probs = [0.0; REGIME_COUNT];
        probs[regime.index()] = 1.0;
        Self { probs, ri }
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Physics-derived soft regime label.
///
/// The stratospheric probability is a logistic step at 12 km; the remaining
/// mass is split by a temperature-τ softmax over the signed distances of `ri`
/// to the convective, neutral and stable thresholds.
pub fn regime_target(ri: f64, altitude_m: f64) -> RegimeTarget {
    let p_strat = logistic((altitude_m - STRATOSPHERE_ALT_M) / REGIME_TAU_ALT_M);
    let scores = [
        (-RI_THRESHOLD - ri) / REGIME_TAU_RI,
        (RI_THRESHOLD - ri.abs()) / REGIME_TAU_RI,
        (ri - RI_THRESHOLD) / REGIME_TAU_RI,
    ];
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = scores.map(|s| (s - max).exp());
    let sum: f64 = exps.iter().sum();
    let rest = 1.0 - p_strat;
    RegimeTarget {
        probs: [exps[0] / sum * rest, exps[1] / sum * rest, exps[2] / sum * rest, p_strat],
        ri,
    }
}

/// e-folding height of a surface temperature anomaly (m).
pub const ANOMALY_EFOLD_M: f64 = 3_000.0;

/// Surface values that anchor a column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceAnchor {
    /// 2 m temperature minus ISA sea-level temperature (K).
    pub temperature_anomaly_k: f64,
    /// Surface pressure over ISA sea-level pressure.
    pub pressure_ratio: f64,
    pub wind10_mps: f64,
    pub latitude_deg: f64,
}

impl SurfaceAnchor {
    pub const ISA: SurfaceAnchor =
        SurfaceAnchor { temperature_anomaly_k: 0.0, pressure_ratio: 1.0, wind10_mps: 0.0, latitude_deg: 0.0 };
}

/// Builds states at `levels` from ISA plus a temperature anomaly that decays
/// from the surface value with height, plus an optional extra perturbation
/// `extra(h)` in kelvin. Lapse is ISA lapse plus the centred 1 m difference
/// of the anomaly; pressure scales the ISA profile by the surface ratio.
pub fn blended_column(
    levels: &[f64],
    surface: &SurfaceAnchor,
    extra: impl Fn(f64) -> f64,
) -> Result<Vec<AtmosphericState>> {
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("column levels must be strictly increasing"));
    }
    if !(surface.pressure_ratio > 0.0 && surface.wind10_mps >= 0.0) {
        return Err(Error::domain("surface pressure ratio must be positive and wind non-negative"));
    }
    let anomaly = |h: f64| surface.temperature_anomaly_k * (-h / ANOMALY_EFOLD_M).exp() + extra(h);
    levels
        .iter()
        .map(|&h| {
            let mut s = isa_state(h)?;
            let (lo, hi) = ((h - 1.0).max(0.0), h + 1.0);
            s.temperature_k += anomaly(h);
            s.lapse_k_per_m += (anomaly(hi) - anomaly(lo)) / (hi - lo);
            s.pressure_pa *= surface.pressure_ratio;
            s.density_ratio = density_ratio(s.pressure_pa, s.temperature_k);
            s.wind10_mps = surface.wind10_mps;
            s.latitude_deg = surface.latitude_deg;
            s.validate()?;
            Ok(s)
        })
        .collect()
}

/// Per-feature z-scoring statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; FEATURE_COUNT],
    pub scale: [f64; FEATURE_COUNT],
}

impl Default for NormStats {
    fn default() -> Self {
        Self { mean: [0.0; FEATURE_COUNT], scale: [1.0; FEATURE_COUNT] }
    }
}

impl NormStats {
    /// Mean and population standard deviation of each feature.
    pub fn fit<'a>(states: impl IntoIterator<Item = &'a AtmosphericState>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = [0.0; FEATURE_COUNT];
        let mut sq = [0.0; FEATURE_COUNT];
        for s in states {
            for (i, v) in s.as_array().into_iter().enumerate() {
                sum[i] += v;
                sq[i] += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::domain("cannot fit normalisation on zero states"));
        }
        let nf = n as f64;
        let mut stats = NormStats::default();
        for i in 0..FEATURE_COUNT {
            let mean = sum[i] / nf;
            let var = (sq[i] / nf - mean * mean).max(0.0);
            stats.mean[i] = mean;
            stats.scale[i] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mean.iter().all(|m| m.is_finite())
            && self.scale.iter().all(|s| s.is_finite() && *s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::domain("normalisation statistics must be finite with positive scales"))
        }
    }

    pub fn destandardize(&self, x: &FeatureVector) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|i| x.0[i] * self.scale[i] + self.mean[i])
    }
}

/// Standardized network input `[h, T, P, u10, dT/dz, rho/rho0, lat]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

/// Standardizes a state with the given statistics.
pub fn feature_vector(state: &AtmosphericState, stats: &NormStats) -> Result<FeatureVector> {
    stats.validate()?;
    let raw = state.as_array();
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite state field"));
    }
    Ok(standardize_unchecked(&raw, stats))
}

#[inline]
pub(crate) fn standardize_unchecked(raw: &[f64; FEATURE_COUNT], stats: &NormStats) -> FeatureVector {
    FeatureVector(std::array::from_fn(|i| (raw[i] - stats.mean[i]) / stats.scale[i]))
}
