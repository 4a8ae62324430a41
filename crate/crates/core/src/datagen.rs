//! Synthetic ground truth with regime-structured TKE targets.
//!
//! The target is the backbone plus a regime-dependent fraction of the
//! Kolmogorov headroom:
//!
//! `k_true = k_MO + clip(f_regime (1 + η), 0, 1) · C_K ε^{1/3} √(ρ/ρ₀) + floor`
//!
//! so every target lies inside the band the estimator can represent, and the
//! regime (a deterministic function of the state) is what decides where.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atmos::{
    bulk_richardson, density_ratio, isa_pressure, isa_temperature, regime_target, AtmosphericState,
    Regime, RegimeTarget, DRY_ADIABATIC_LAPSE, GRAVITY, REGIME_COUNT, RI_LAYER_DEPTH_M, RI_SHEAR_FLOOR_MPS,
    RI_SHEAR_FRACTION,
};
use crate::error::{Error, Result};
use crate::mophys;
use crate::net::TrainSample;

/// Every generator constant in one place; hashed into the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub min_altitude_m: f64,
    pub max_altitude_m: f64,
    /// Upper altitude for tropospheric draws and lower bound for
    /// stratospheric ones; keeps classes clear of the 12 km boundary.
    pub troposphere_top_m: f64,
    pub stratosphere_bottom_m: f64,
    pub mean_wind_mps: f64,
    /// Fraction of Kolmogorov headroom per regime, in regime order.
    pub headroom_fraction: [f64; REGIME_COUNT],
    pub stratospheric_floor: f64,
    pub noise_sd: f64,
    pub noise_clip: f64,
    /// Richardson draw (mean, sd) per tropospheric regime.
    pub ri_draw: [(f64, f64); 3],
    pub strat_lapse: (f64, f64),
    pub lapse_clip: f64,
    pub temp_anomaly_sd: f64,
    pub pressure_anomaly_sd: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            min_altitude_m: 10.0,
            max_altitude_m: 30_000.0,
            troposphere_top_m: 11_500.0,
            stratosphere_bottom_m: 12_500.0,
            mean_wind_mps: 8.0,
            headroom_fraction: [0.85, 0.0, 0.3, 0.55],
            stratospheric_floor: 0.02,
            noise_sd: 0.1,
            noise_clip: 0.3,
            ri_draw: [(-0.6, 0.25), (0.0, 0.03), (0.6, 0.25)],
            strat_lapse: (0.002, 0.001),
            lapse_clip: 0.04,
            temp_anomaly_sd: 3.0,
            pressure_anomaly_sd: 0.01,
        }
    }
}

impl GeneratorConfig {
    /// CRC-32 over the canonical JSON form.
    pub fn hash(&self) -> u32 {
        crc32fast::hash(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub state: AtmosphericState,
    pub k_true: f64,
    pub regime: RegimeTarget,
    pub seed_id: u64,
}

impl SyntheticSample {
    pub fn train_sample(&self) -> TrainSample {
        TrainSample { state: self.state, k_true: self.k_true, target: self.regime }
    }
}

/// Noise-free target for a state: what `synth_sample` produces with η = 0.
pub fn clean_tke(state: &AtmosphericState, cfg: &GeneratorConfig) -> f64 {
    target_tke(state, cfg, 0.0)
}

/// Target for a state and a draw of the multiplicative noise η.
pub fn target_tke(state: &AtmosphericState, cfg: &GeneratorConfig, eta: f64) -> f64 {
    let regime = Regime::classify(bulk_richardson(state), state.altitude_m);
    let bb = mophys::backbone(state);
    let frac = (cfg.headroom_fraction[regime.index()] * (1.0 + eta)).clamp(0.0, 1.0);
    let floor = if regime == Regime::Stratospheric { cfg.stratospheric_floor } else { 0.0 };
    bb.k_mo + frac * mophys::kolmogorov_scale(bb.epsilon, state.density_ratio) + floor
}

fn rayleigh(rng: &mut impl Rng, mean: f64) -> f64 {
    let sigma = mean / (std::f64::consts::PI / 2.0).sqrt();
    let u: f64 = rng.random::<f64>();
    sigma * (-2.0 * (1.0 - u).ln()).sqrt()
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Draws one sample. With a hint the state is drawn from that regime's
/// conditional distribution; without one a regime is picked uniformly.
pub fn synth_sample(seed: u64, hint: Option<Regime>, cfg: &GeneratorConfig) -> SyntheticSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regime = hint.unwrap_or_else(|| Regime::ALL[rng.random_range(0..REGIME_COUNT)]);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let altitude = match regime {
        Regime::Stratospheric => log_uniform(&mut rng, cfg.stratosphere_bottom_m, cfg.max_altitude_m),
        _ => log_uniform(&mut rng, cfg.min_altitude_m, cfg.troposphere_top_m),
    };
    let wind = rayleigh(&mut rng, cfg.mean_wind_mps);
    let lat: f64 = rng.random_range(-90.0..=90.0);
    let decay = (-altitude / 8000.0).exp();
    let anomaly = 12.0 * (lat.to_radians().cos() - 0.6) + cfg.temp_anomaly_sd * std_normal.sample(&mut rng);
    let temperature = isa_temperature(altitude) + anomaly * decay;
    let pressure = isa_pressure(altitude) * (1.0 + cfg.pressure_anomaly_sd * std_normal.sample(&mut rng));

    let lapse = match regime {
        Regime::Stratospheric => cfg.strat_lapse.0 + cfg.strat_lapse.1 * std_normal.sample(&mut rng),
        r => {
            let (mu, sd) = cfg.ri_draw[r.index()];
            let ri = mu + sd * std_normal.sample(&mut rng);
            let shear = (RI_SHEAR_FRACTION * wind).max(RI_SHEAR_FLOOR_MPS);
            -DRY_ADIABATIC_LAPSE + ri * shear * shear * temperature / (GRAVITY * RI_LAYER_DEPTH_M * RI_LAYER_DEPTH_M)
        }
    }
    .clamp(-cfg.lapse_clip, cfg.lapse_clip);

    let state = AtmosphericState {
        altitude_m: altitude,
        temperature_k: temperature,
        pressure_pa: pressure,
        wind10_mps: wind,
        lapse_k_per_m: lapse,
        density_ratio: density_ratio(pressure, temperature),
        latitude_deg: lat,
    };
    let eta = (cfg.noise_sd * std_normal.sample(&mut rng)).clamp(-cfg.noise_clip, cfg.noise_clip);
    SyntheticSample {
        state,
        k_true: target_tke(&state, cfg, eta),
        regime: regime_target(bulk_richardson(&state), altitude),
        seed_id: seed,
    }
}

pub(crate) fn mix_seed(seed: u64, i: u64) -> u64 {
    // splitmix64 finalizer over (seed, index)
    let mut z = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ i.wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const MIN_DATASET: usize = 400;
pub const MIN_COVERAGE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    /// Samples per regime label over the whole set.
    pub histogram: [usize; REGIME_COUNT],
}

impl DatasetSplit {
    pub fn parts(&self) -> [(&'static str, &[usize]); 3] {
        [("train", &self.train), ("val", &self.val), ("test", &self.test)]
    }

    pub fn coverage(indices: &[usize], samples: &[SyntheticSample]) -> [f64; REGIME_COUNT] {
        let mut c = [0.0; REGIME_COUNT];
        for &i in indices {
            c[samples[i].regime.argmax().index()] += 1.0;
        }
        c.map(|v| v / indices.len().max(1) as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<SyntheticSample>,
    pub split: DatasetSplit,
    pub config: GeneratorConfig,
}

impl Dataset {
    pub fn select(&self, indices: &[usize]) -> Vec<SyntheticSample> {
        indices.iter().map(|&i| self.samples[i]).collect()
    }

    pub fn train(&self) -> Vec<SyntheticSample> {
        self.select(&self.split.train)
    }

    pub fn val(&self) -> Vec<SyntheticSample> {
        self.select(&self.split.val)
    }

    pub fn test(&self) -> Vec<SyntheticSample> {
        self.select(&self.split.test)
    }

    /// Content hash tying trained artifacts to the data they came from.
    pub fn hash(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        h.update(&self.split.seed.to_le_bytes());
        h.update(&(self.samples.len() as u64).to_le_bytes());
        h.update(&self.config.hash().to_le_bytes());
        h.finalize()
    }
}

/// Generates `n` samples (regime hints cycling through the four classes)
/// and a stratified 70/15/15 split.
pub fn make_dataset(n: usize, seed: u64) -> Result<Dataset> {
    make_dataset_with(n, seed, &GeneratorConfig::default())
}

pub fn make_dataset_with(n: usize, seed: u64, cfg: &GeneratorConfig) -> Result<Dataset> {
    if n < MIN_DATASET {
        return Err(Error::domain(format!(
            "dataset of {n} samples cannot guarantee {:.0}% regime coverage in every split (need at least {MIN_DATASET})",
            MIN_COVERAGE * 100.0
        )));
    }
    let samples: Vec<SyntheticSample> = (0..n)
        .into_par_iter()
        .map(|i| synth_sample(mix_seed(seed, i as u64), Regime::from_index(i % REGIME_COUNT), cfg))
        .collect();

    let mut by_class: [Vec<usize>; REGIME_COUNT] = Default::default();
    for (i, s) in samples.iter().enumerate() {
        by_class[s.regime.argmax().index()].push(i);
    }
    let histogram = by_class.each_ref().map(|v| v.len());

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::MAX));
    let (mut train, mut val, mut test) = (vec![], vec![], vec![]);
    for class in &mut by_class {
        // Fisher-Yates with our own generator keeps the split stable across
        // rand versions.
        for i in (1..class.len()).rev() {
            let j = rng.random_range(0..=i);
            class.swap(i, j);
        }
        let n_train = (class.len() as f64 * 0.70).round() as usize;
        let n_val = (class.len() as f64 * 0.15).round() as usize;
        train.extend_from_slice(&class[..n_train]);
        val.extend_from_slice(&class[n_train..(n_train + n_val).min(class.len())]);
        test.extend_from_slice(&class[(n_train + n_val).min(class.len())..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    let split = DatasetSplit { train, val, test, seed, histogram };

    for (name, part) in split.parts() {
        let cov = DatasetSplit::coverage(part, &samples);
        if let Some(r) = (0..REGIME_COUNT).find(|&r| cov[r] < MIN_COVERAGE) {
            return Err(Error::domain(format!(
                "regime {} covers only {:.1}% of the {name} split",
                Regime::ALL[r],
                cov[r] * 100.0
            )));
        }
    }
    Ok(Dataset { samples, split, config: cfg.clone() })
}

pub const EXPORT_COLUMNS: [&str; 15] = [
    "seed_id",
    "altitude_m",
    "temperature_k",
    "pressure_pa",
    "wind10_mps",
    "lapse_k_per_m",
    "density_ratio",
    "latitude_deg",
    "k_true",
    "p_convective",
    "p_neutral",
    "p_stable",
    "p_stratospheric",
    "ri",
    "split",
];

/// Writes `<stem>.tsv` (one sample per line, columns as in
/// [`EXPORT_COLUMNS`]) and `<stem>.manifest`.
pub fn export(ds: &Dataset, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut split_of = vec!["train"; ds.samples.len()];
    for (name, part) in ds.split.parts() {
        for &i in part {
            split_of[i] = name;
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.tsv")))?);
    writeln!(out, "# {}", EXPORT_COLUMNS.join("\t"))?;
    for (s, split) in ds.samples.iter().zip(split_of) {
        let st = &s.state;
        let p = &s.regime.probs;
        writeln!(
            out,
            "{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{split}",
            s.seed_id,
            st.altitude_m,
            st.temperature_k,
            st.pressure_pa,
            st.wind10_mps,
            st.lapse_k_per_m,
            st.density_ratio,
            st.latitude_deg,
            s.k_true,
            p[0],
            p[1],
            p[2],
            p[3],
            s.regime.ri
        )?;
    }
    out.flush()?;

    let mut m = std::fs::File::create(dir.join(format!("{stem}.manifest")))?;
    writeln!(m, "seed = {}", ds.split.seed)?;
    writeln!(m, "samples = {}", ds.samples.len())?;
    writeln!(m, "config_hash = {:08x}", ds.config.hash())?;
    writeln!(m, "dataset_hash = {:08x}", ds.hash())?;
    for (name, part) in ds.split.parts() {
        writeln!(m, "{name} = {}", part.len())?;
    }
    for r in Regime::ALL {
        writeln!(m, "histogram.{} = {}", r.name(), ds.split.histogram[r.index()])?;
    }
    writeln!(m, "config = {}", serde_json::to_string(&ds.config).expect("config serializes"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = GeneratorConfig::default();
        for hint in [None, Some(Regime::Stable)] {
            assert_eq!(synth_sample(42, hint, &cfg), synth_sample(42, hint, &cfg));
        }
        assert_ne!(synth_sample(1, None, &cfg), synth_sample(2, None, &cfg));
    }

    #[test]
    fn zero_wind_gives_floor_only() {
        let cfg = GeneratorConfig::default();
        let mut s = synth_sample(7, Some(Regime::Stratospheric), &cfg).state;
        s.wind10_mps = 0.0;
        assert_eq!(target_tke(&s, &cfg, 0.2), cfg.stratospheric_floor);
        let mut t = synth_sample(8, Some(Regime::Convective), &cfg).state;
        t.wind10_mps = 0.0;
        assert_eq!(target_tke(&t, &cfg, -0.1), 0.0);
    }

    #[test]
    fn neutral_ratio_is_exactly_one() {
        let cfg = GeneratorConfig::default();
        let mut checked = 0;
        for seed in 0..200 {
            let s = synth_sample(seed, Some(Regime::Neutral), &cfg);
            if Regime::classify(bulk_richardson(&s.state), s.state.altitude_m) == Regime::Neutral {
                assert_eq!(clean_tke(&s.state, &cfg) / mophys::mo_tke(&s.state), 1.0);
                checked += 1;
            }
        }
        assert!(checked > 190);
    }

    #[test]
    fn hints_produce_their_regime() {
        let cfg = GeneratorConfig::default();
        for r in Regime::ALL {
            let hits = (0..400).filter(|&s| synth_sample(s, Some(r), &cfg).regime.argmax() == r).count();
            assert!(hits > 360, "{r}: {hits}/400");
        }
    }

    #[test]
    fn targets_inside_representable_band() {
        let cfg = GeneratorConfig::default();
        for seed in 0..2000 {
            let s = synth_sample(seed, None, &cfg);
            let bb = mophys::backbone(&s.state);
            let top = bb.k_mo + mophys::kolmogorov_scale(bb.epsilon, s.state.density_ratio);
            let floor = if s.regime.argmax() == Regime::Stratospheric { cfg.stratospheric_floor } else { 0.0 };
            assert!(s.k_true >= bb.k_mo && s.k_true <= top + floor + 1e-12);
            assert!(s.state.validate().is_ok());
        }
    }

    #[test]
    fn dataset_split_contract() {
        let a = make_dataset(2000, 1).unwrap();
        let b = make_dataset(2000, 1).unwrap();
        assert_eq!(a.split, b.split);
        assert_eq!(a.split.histogram.iter().sum::<usize>(), 2000);
        let mut all: Vec<usize> = a.split.parts().iter().flat_map(|(_, p)| p.iter().copied()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..2000).collect::<Vec<_>>());
        assert!((a.split.train.len() as f64 / 2000.0 - 0.7).abs() < 0.01);
        assert!(make_dataset(399, 1).is_err());
    }

    #[test]
    fn export_writes_every_row() {
        let ds = make_dataset(400, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export(&ds, dir.path(), "synth").unwrap();
        let text = std::fs::read_to_string(dir.path().join("synth.tsv")).unwrap();
        assert_eq!(text.lines().count(), 401);
        let manifest = std::fs::read_to_string(dir.path().join("synth.manifest")).unwrap();
        assert!(manifest.contains(&format!("config_hash = {:08x}", ds.config.hash())));
    }
}
