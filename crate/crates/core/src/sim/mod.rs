//! Paired guidance simulation: a point-mass vehicle with lagged lateral
//! acceleration flies proportional navigation through a gust field, and
//! only the turbulence estimator feeding the gust compensation changes
//! between the two runs of a pair.
//!
//! Navigation model: the vehicle knows its air-relative velocity exactly and
//! dead-reckons ground position as `x̂' = v + ŵ`. The gust sensor delivers
//! the normalised gust signal `u(t)`; the compensation scales it by the
//! estimated `σ̂ = √(2k̂/3)`, while the air actually moves at `σ u(t)`. A
//! better turbulence estimate therefore means less navigation drift and a
//! smaller miss.

pub mod campaign;
pub mod dynamics;
pub mod gust;
pub mod run;
pub mod scenario;

pub use campaign::{campaign, CampaignConfig, CampaignResult, CampaignRun, CampaignSummary};
pub use dynamics::{step_dynamics, VehicleState};
pub use gust::{gust_generator, GustField, GustStream};
pub use run::{run_paired, simulate, PairedRunRecord, RunOutcome, TraceSample};
pub use scenario::{Category, CategoryPreset, Column, Scenario, ScenarioPresets};

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

#[inline]
pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Gravity vector, z up (m/s²).
pub const GRAVITY_VEC: Vec3 = [0.0, 0.0, -9.81];
/// Lateral-acceleration lag time constant (s).
pub const LAG_TAU_S: f64 = 0.2;
pub const MAX_DT_S: f64 = 0.05;
/// Miss distance counted as a hit (m).
pub const CEP_THRESHOLD_M: f64 = 1_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleClass {
    pub name: String,
    pub mach: f64,
    pub mass_kg: f64,
    pub ref_area_m2: f64,
    pub drag_coeff: f64,
    pub max_lateral_accel_mps2: f64,
    /// Navigation constant N′.
    pub guidance_gain: f64,
    pub nominal_altitude_m: f64,
    pub nominal_range_m: f64,
}

impl VehicleClass {
    fn preset(name: &str, mach: f64, mass_kg: f64, ref_area_m2: f64, max_acc: f64, alt: f64, range: f64) -> Self {
        Self {
            name: name.into(),
            mach,
            mass_kg,
            ref_area_m2,
            drag_coeff: 0.25,
            max_lateral_accel_mps2: max_acc,
            guidance_gain: 4.0,
            nominal_altitude_m: alt,
            nominal_range_m: range,
        }
    }

    pub fn supersonic() -> Self {
        Self::preset("supersonic", 2.8, 900.0, 0.07, 350.0, 8_000.0, 60_000.0)
    }

    pub fn high_supersonic() -> Self {
        Self::preset("high-supersonic", 4.5, 1_200.0, 0.09, 300.0, 18_000.0, 100_000.0)
    }

    pub fn hypersonic_glide() -> Self {
        Self::preset("hypersonic-glide", 8.0, 1_500.0, 0.12, 200.0, 28_000.0, 180_000.0)
    }

    pub fn presets() -> [VehicleClass; 3] {
        [Self::supersonic(), Self::high_supersonic(), Self::hypersonic_glide()]
    }

    /// Preset by name or by Mach number ("2.8", "M4.5").
    pub fn by_name(name: &str) -> Option<Self> {
        let key = name.trim().trim_start_matches(['M', 'm']);
        Self::presets()
            .into_iter()
            .find(|v| v.name == name || key.parse::<f64>().is_ok_and(|m| m == v.mach))
    }

    /// `ρ C_d A / (2m)`, times ρ supplied by the caller.
    pub(crate) fn drag_factor(&self) -> f64 {
        self.drag_coeff * self.ref_area_m2 / (2.0 * self.mass_kg)
    }
}

/// Integration and timing constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt_s: f64,
    /// Spacing of the precomputed gust samples (s).
    pub gust_grid_dt_s: f64,
    /// Gust correlation length (m).
    pub length_scale_m: f64,
    /// Runs longer than this multiple of the nominal flight time abort.
    pub time_cap_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt_s: 0.01, gust_grid_dt_s: 0.01, length_scale_m: 533.0, time_cap_factor: 3.0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.dt_s > 0.0 && self.dt_s <= MAX_DT_S) {
            return Err(crate::Error::Config(format!("dt {} s outside (0, {MAX_DT_S}]", self.dt_s)));
        }
        if !(self.gust_grid_dt_s > 0.0 && self.length_scale_m > 0.0 && self.time_cap_factor > 1.0) {
            return Err(crate::Error::Config("gust grid, length scale and time cap must be positive".into()));
        }
        Ok(())
    }
}
