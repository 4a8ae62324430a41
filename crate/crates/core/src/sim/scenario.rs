//! Scenario categories, their text presets, and the atmospheric column a
//! run flies through.

use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dynamics::speed_of_sound;
use super::gust::sigma_from_tke;
use super::{norm, scale, sub, Vec3, VehicleClass};
use crate::atmos::{blended_column, density_ratio, AtmosphericState, SurfaceAnchor};
use crate::config::{ConfigFile, Section};
use crate::datagen::mix_seed;
use crate::error::{Error, Result};
use crate::net::TurbulenceEstimator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Category {
    pub const ALL: [Category; 6] = [Category::A, Category::B, Category::C, Category::D, Category::E, Category::F];

    pub fn letter(self) -> &'static str {
        ["A", "B", "C", "D", "E", "F"][self.index()]
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.letter())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.letter().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown scenario category '{s}' (expected A..F)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryPreset {
    pub category: Category,
    pub name: String,
    pub altitude_scale: Vec<f64>,
    pub range_scale: Vec<f64>,
    pub lateral_offset: Vec<f64>,
    pub target_altitude_m: Vec<f64>,
    pub wind10_mps: Vec<f64>,
    pub temp_anomaly_k: Vec<f64>,
    pub lapse_amplitude_k: Vec<f64>,
    pub latitude_deg: Vec<f64>,
    pub turbulence_scale: Vec<f64>,
    pub randomize: bool,
}

const PRESET_KEYS: [&str; 11] = [
    "name",
    "altitude_scale",
    "range_scale",
    "lateral_offset",
    "target_altitude_m",
    "wind10_mps",
    "temp_anomaly_k",
    "lapse_amplitude_k",
    "latitude_deg",
    "turbulence_scale",
    "randomize",
];

fn pick(list: &[f64], variant: usize) -> f64 {
    list[variant % list.len()]
}

impl CategoryPreset {
    fn from_section(category: Category, s: &Section) -> Result<Self> {
        s.check_keys(&PRESET_KEYS)?;
        let list = |key: &str| -> Result<Vec<f64>> {
            let v: Vec<f64> = s.list(key)?.ok_or_else(|| Error::Config(format!("[{category}] missing key '{key}'")))?;
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("[{category}] {key} must list finite numbers")));
            }
            Ok(v)
        };
        let p = Self {
            category,
            name: s.require("name")?,
            altitude_scale: list("altitude_scale")?,
            range_scale: list("range_scale")?,
            lateral_offset: list("lateral_offset")?,
            target_altitude_m: list("target_altitude_m")?,
            wind10_mps: list("wind10_mps")?,
            temp_anomaly_k: list("temp_anomaly_k")?,
            lapse_amplitude_k: list("lapse_amplitude_k")?,
            latitude_deg: list("latitude_deg")?,
            turbulence_scale: list("turbulence_scale")?,
            randomize: s.get_or("randomize", false)?,
        };
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0);
        let non_negative = |v: &[f64]| v.iter().all(|x| *x >= 0.0);
        if !positive(&p.altitude_scale) || !positive(&p.range_scale) {
            return Err(Error::Config(format!("[{category}] altitude and range scales must be positive")));
        }
        if !non_negative(&p.wind10_mps) || !non_negative(&p.turbulence_scale) || !non_negative(&p.target_altitude_m) {
            return Err(Error::Config(format!("[{category}] wind, turbulence scale and target altitude must be >= 0")));
        }
        if p.latitude_deg.iter().any(|l| l.abs() > 90.0) {
            return Err(Error::Config(format!("[{category}] latitude outside [-90, 90]")));
        }
        Ok(p)
    }

    /// Number of distinct variants (the longest list).
    pub fn variants(&self) -> usize {
        [
            &self.altitude_scale,
            &self.range_scale,
            &self.lateral_offset,
            &self.target_altitude_m,
            &self.wind10_mps,
            &self.temp_anomaly_k,
            &self.lapse_amplitude_k,
            &self.latitude_deg,
            &self.turbulence_scale,
        ]
        .iter()
        .map(|l| l.len())
        .max()
        .unwrap_or(1)
    }
}

/// The six category presets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPresets {
    presets: Vec<CategoryPreset>,
    checksum: u32,
}

const SHIPPED_PRESETS: &str = include_str!("../../data/scenarios.txt");

impl ScenarioPresets {
    pub fn shipped() -> &'static ScenarioPresets {
        static PRESETS: OnceLock<ScenarioPresets> = OnceLock::new();
        PRESETS.get_or_init(|| ScenarioPresets::parse(SHIPPED_PRESETS).expect("shipped scenario presets parse"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file = ConfigFile::parse(text)?;
        let presets = Category::ALL
            .iter()
            .map(|&c| {
                let s = file.section(c.letter()).ok_or_else(|| Error::Config(format!("missing section [{c}]")))?;
                CategoryPreset::from_section(c, s)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(extra) = file.sections.iter().find(|s| s.name.parse::<Category>().is_err()) {
            return Err(Error::Config(format!("unknown section [{}]", extra.name)));
        }
        Ok(Self { presets, checksum: crc32fast::hash(text.as_bytes()) })
    }

    pub fn get(&self, c: Category) -> &CategoryPreset {
        &self.presets[c.index()]
    }

    pub fn checksum(&self) -> u32 {
        self.checksum
    }
}

/// Column spacing (m) and top (m).
pub const COLUMN_STEP_M: f64 = 100.0;
pub const COLUMN_TOP_M: f64 = 32_000.0;
/// Highest launch altitude; keeps the vehicle inside the column.
pub const MAX_LAUNCH_ALT_M: f64 = 31_000.0;

/// Atmospheric states on a uniform altitude grid starting at 0 m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub step_m: f64,
    pub states: Vec<AtmosphericState>,
}

impl Column {
    pub fn new(states: Vec<AtmosphericState>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::domain("a column needs at least two levels"));
        }
        let step_m = states[1].altitude_m - states[0].altitude_m;
        let uniform = states
            .iter()
            .enumerate()
            .all(|(i, s)| (s.altitude_m - (states[0].altitude_m + i as f64 * step_m)).abs() < 1e-6);
        if states[0].altitude_m != 0.0 || !(step_m > 0.0) || !uniform {
            return Err(Error::domain("column levels must start at 0 m and be uniformly increasing"));
        }
        for s in &states {
            s.validate()?;
        }
        Ok(Self { step_m, states })
    }

    pub fn top_m(&self) -> f64 {
        self.states.last().expect("non-empty").altitude_m
    }

    fn locate(&self, altitude_m: f64) -> (usize, f64) {
        let x = altitude_m.clamp(0.0, self.top_m()) / self.step_m;
        let i = (x.floor() as usize).min(self.states.len() - 2);
        (i, x - i as f64)
    }

    /// State at an altitude: linear in every field except pressure, which
    /// is log-linear; density ratio recomputed from the gas law.
    pub fn at(&self, altitude_m: f64) -> AtmosphericState {
        let (i, f) = self.locate(altitude_m);
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let lerp = |x: f64, y: f64| x + (y - x) * f;
        let temperature_k = lerp(a.temperature_k, b.temperature_k);
        let pressure_pa = (lerp(a.pressure_pa.ln(), b.pressure_pa.ln())).exp();
        AtmosphericState {
            altitude_m: altitude_m.clamp(0.0, self.top_m()),
            temperature_k,
            pressure_pa,
            wind10_mps: lerp(a.wind10_mps, b.wind10_mps),
            lapse_k_per_m: lerp(a.lapse_k_per_m, b.lapse_k_per_m),
            density_ratio: density_ratio(pressure_pa, temperature_k),
            latitude_deg: lerp(a.latitude_deg, b.latitude_deg),
        }
    }

    /// Per-axis gust σ implied by an estimator at every level.
    pub fn sigma_profile(&self, est: &dyn TurbulenceEstimator) -> Result<SigmaProfile> {
        let values = self
            .states
            .iter()
            .map(|s| {
                let k = est.estimate_tke(s);
                if k.is_finite() {
                    Ok(sigma_from_tke(k))
                } else {
                    Err(Error::SimAbort(format!("estimator '{}' returned {k} at {} m", est.name(), s.altitude_m)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SigmaProfile { step_m: self.step_m, values })
    }
}

/// Gust σ on the column grid, linearly interpolated in altitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaProfile {
    pub step_m: f64,
    pub values: Vec<f64>,
}

impl SigmaProfile {
    pub fn at(&self, altitude_m: f64) -> f64 {
        let top = (self.values.len() - 1) as f64 * self.step_m;
        let x = altitude_m.clamp(0.0, top) / self.step_m;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let f = x - i as f64;
        self.values[i] + (self.values[i + 1] - self.values[i]) * f
    }
}

/// Wavelengths (m) and weights of the layered temperature perturbation.
const LAYER_WAVES: [(f64, f64); 3] = [(1_500.0, 0.5), (3_200.0, 0.3), (6_000.0, 0.2)];

/// A fully specified engagement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// `category/vehicle/variant`; with the seed, identifies the gust field.
    pub id: String,
    pub category: Category,
    pub vehicle: VehicleClass,
    pub variant: usize,
    pub seed: u64,
    pub launch: Vec3,
    pub velocity: Vec3,
    pub target: Vec3,
    /// Point the launch velocity is aimed at.
    pub aim_point: Vec3,
    pub column: Column,
    pub turbulence_scale: f64,
    pub gust_seed: u64,
}

impl Scenario {
    pub fn build(
        presets: &ScenarioPresets,
        category: Category,
        vehicle: &VehicleClass,
        variant: usize,
        seed: u64,
    ) -> Result<Self> {
        let p = presets.get(category);
        let v = variant % p.variants();
        let id = format!("{}/{}/v{}", category, vehicle.name, v);
        let scenario_key = crc32fast::hash(id.as_bytes()) as u64;

        let column_seed = if p.randomize { mix_seed(seed, scenario_key) } else { mix_seed(0, scenario_key) };
        let mut rng = ChaCha8Rng::seed_from_u64(column_seed);
        let mut wind = pick(&p.wind10_mps, v);
        let mut anomaly = pick(&p.temp_anomaly_k, v);
        if p.randomize {
            let sigma = wind / (std::f64::consts::PI / 2.0).sqrt();
            wind = sigma * (-2.0 * (1.0 - rng.random::<f64>()).ln()).sqrt();
            let z: f64 = StandardNormal.sample(&mut rng);
            anomaly *= z;
        }
        let phases: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() * std::f64::consts::TAU);
        let amp = pick(&p.lapse_amplitude_k, v);
        let surface = SurfaceAnchor {
            temperature_anomaly_k: anomaly,
            pressure_ratio: 1.0,
            wind10_mps: wind,
            latitude_deg: pick(&p.latitude_deg, v),
        };
        let levels: Vec<f64> = (0..=(COLUMN_TOP_M / COLUMN_STEP_M) as usize).map(|i| i as f64 * COLUMN_STEP_M).collect();
        let column = Column::new(blended_column(&levels, &surface, |h| {
            amp * LAYER_WAVES
                .iter()
                .zip(phases)
                .map(|(&(lambda, w), phi)| w * (std::f64::consts::TAU * h / lambda + phi).sin())
                .sum::<f64>()
        })?)?;

        let h0 = (vehicle.nominal_altitude_m * pick(&p.altitude_scale, v)).min(MAX_LAUNCH_ALT_M);
        let range = vehicle.nominal_range_m * pick(&p.range_scale, v);
        let h_t = pick(&p.target_altitude_m, v);
        let launch = [0.0, 0.0, h0];
        let aim_point = [range, 0.0, h_t];
        let target = [range, pick(&p.lateral_offset, v) * range, h_t];
        let los = sub(aim_point, launch);
        let velocity = scale(los, vehicle.mach * speed_of_sound(h0) / norm(los));
        Ok(Self {
            id,
            category,
            vehicle: vehicle.clone(),
            variant: v,
            seed,
            launch,
            velocity,
            target,
            aim_point,
            column,
            turbulence_scale: pick(&p.turbulence_scale, v),
            gust_seed: mix_seed(seed, scenario_key),
        })
    }

    pub fn nominal_speed(&self) -> f64 {
        norm(self.velocity)
    }

    /// Straight-line flight time at launch speed.
    pub fn nominal_flight_time_s(&self) -> f64 {
        norm(sub(self.aim_point, self.launch)) / self.nominal_speed()
    }

    /// Same engagement without turbulence.
    pub fn calm(mut self) -> Self {
        self.turbulence_scale = 0.0;
        self
    }
}
