//! Coloured gust noise: an independent first-order Gauss-Markov process per
//! axis, `g[n+1] = a g[n] + σ √(1 − a²) ξ`, with `a = exp(−V dt / L)` and
//! stationary variance `σ² = 2k/3`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Vec3;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GustStream {
    a: f64,
    b: f64,
    sigma: f64,
    unit: Vec3,
    rng: ChaCha8Rng,
    started: bool,
}

/// Per-axis gust standard deviation for an isotropic TKE.
pub fn sigma_from_tke(k: f64) -> f64 {
    (2.0 * k.max(0.0) / 3.0).sqrt()
}

/// Gust stream with per-axis variance `2k/3`, correlated over
/// `length_scale_m` at `airspeed_mps`. The first sample is drawn from the
/// stationary distribution.
pub fn gust_generator(k: f64, length_scale_m: f64, airspeed_mps: f64, seed: u64, dt: f64) -> Result<GustStream> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("gust TKE must be finite and non-negative, got {k}")));
    }
    if !(length_scale_m > 0.0 && airspeed_mps > 0.0 && dt > 0.0) {
        return Err(Error::domain("length scale, airspeed and dt must be positive"));
    }
    let a = (-airspeed_mps * dt / length_scale_m).exp();
    Ok(GustStream {
        a,
        b: (1.0 - a * a).sqrt(),
        sigma: sigma_from_tke(k),
        unit: [0.0; 3],
        rng: ChaCha8Rng::seed_from_u64(seed),
        started: false,
    })
}

impl GustStream {
    pub fn correlation(&self) -> f64 {
        self.a
    }
}

impl Iterator for GustStream {
    type Item = Vec3;

    fn next(&mut self) -> Option<Vec3> {
        for u in self.unit.iter_mut() {
            let xi: f64 = StandardNormal.sample(&mut self.rng);
            *u = if self.started { self.a * *u + self.b * xi } else { xi };
        }
        self.started = true;
        Some(super::scale(self.unit, self.sigma))
    }
}

/// Time-indexed gust field of one run, on a fixed grid and linearly
/// interpolated between samples. Stores the true wind `σ(t) u(t)` and the
/// sensed normalised signal, which is `u(t)` where the air is turbulent and
/// zero where it is not.
#[derive(Debug, Clone, PartialEq)]
pub struct GustField {
    pub grid_dt_s: f64,
    wind: Vec<Vec3>,
    sensed: Vec<Vec3>,
}

impl GustField {
    /// `sigma_true[i]` is the true per-axis σ at grid time `i · grid_dt`.
    pub fn new(sigma_true: &[f64], length_scale_m: f64, airspeed_mps: f64, seed: u64, grid_dt_s: f64) -> Result<Self> {
        if sigma_true.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::domain("true gust intensities must be finite and non-negative"));
        }
        let unit = gust_generator(1.5, length_scale_m, airspeed_mps, seed, grid_dt_s)?;
        let (wind, sensed) = sigma_true
            .iter()
            .zip(unit)
            .map(|(&s, u)| (super::scale(u, s), if s > 0.0 { u } else { [0.0; 3] }))
            .unzip();
        Ok(Self { grid_dt_s, wind, sensed })
    }

    pub fn len(&self) -> usize {
        self.wind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wind.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        (self.wind.len().saturating_sub(1)) as f64 * self.grid_dt_s
    }

    fn lerp(series: &[Vec3], grid_dt: f64, t: f64) -> Vec3 {
        let x = (t / grid_dt).max(0.0);
        let i = (x.floor() as usize).min(series.len().saturating_sub(2));
        let f = (x - i as f64).min(1.0);
        let (a, b) = (series[i], series[(i + 1).min(series.len() - 1)]);
        std::array::from_fn(|k| a[k] + (b[k] - a[k]) * f)
    }

    pub fn wind_at(&self, t: f64) -> Vec3 {
        Self::lerp(&self.wind, self.grid_dt_s, t)
    }

    pub fn sensed_at(&self, t: f64) -> Vec3 {
        Self::lerp(&self.sensed, self.grid_dt_s, t)
    }
}
