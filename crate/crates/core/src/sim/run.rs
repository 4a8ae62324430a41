//! One closed-loop engagement and the paired comparison of two estimators.

use serde::{Deserialize, Serialize};

use super::dynamics::{step_dynamics, VehicleState};
use super::gust::GustField;
use super::scenario::{Category, Scenario};
use super::{add, cross, dot, norm, scale, sub, SimConfig, Vec3, CEP_THRESHOLD_M, GRAVITY_VEC};
use crate::error::{Error, Result};
use crate::estimators::{NoneEstimator, TruthEstimator};
use crate::net::TurbulenceEstimator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub estimator: String,
    /// Closest approach to the target (m).
    pub miss_m: f64,
    pub flight_time_s: f64,
    pub cep_hit: bool,
    /// Set when the run did not terminate normally.
    pub aborted: Option<String>,
}

/// Decimated trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t_s: f64,
    pub pos: Vec3,
    pub nav_pos: Vec3,
    pub gust: Vec3,
    /// Estimator TKE at the navigated altitude (m²/s²).
    pub k_est: f64,
}

impl Scenario {
    /// Altitude against time of the calm-air, uncompensated flight: the
    /// path every estimator's run stays close to, fixed by the scenario
    /// alone. Sampled every `cfg.gust_grid_dt_s`, holding the final value.
    pub fn reference_altitudes(&self, cfg: &SimConfig) -> Result<Vec<f64>> {
        cfg.validate()?;
        let n = (cfg.time_cap_factor * self.nominal_flight_time_s() / cfg.gust_grid_dt_s).ceil() as usize + 2;
        let calm = GustField::new(&vec![0.0; n], cfg.length_scale_m, self.nominal_speed(), 0, cfg.gust_grid_dt_s)?;
        let mut path: Vec<(f64, f64)> = Vec::new();
        simulate_traced(self, &calm, &NoneEstimator, cfg, 1, &mut |s| path.push((s.t_s, s.pos[2])))?;
        let mut j = 0;
        Ok((0..n)
            .map(|i| {
                let t = i as f64 * cfg.gust_grid_dt_s;
                while j + 1 < path.len() && path[j + 1].0 <= t {
                    j += 1;
                }
                match path.get(j + 1) {
                    Some(&(t1, z1)) if t >= path[j].0 => {
                        let (t0, z0) = path[j];
                        z0 + (z1 - z0) * (t - t0) / (t1 - t0)
                    }
                    _ => path[j].1,
                }
            })
            .collect())
    }

    /// True gust field of this scenario and seed: the reference column's
    /// turbulence sampled along the reference altitude profile.
    pub fn gust_field(&self, cfg: &SimConfig) -> Result<GustField> {
        let truth = self.column.sigma_profile(&TruthEstimator::default())?;
        let sigma: Vec<f64> =
            self.reference_altitudes(cfg)?.into_iter().map(|h| self.turbulence_scale * truth.at(h)).collect();
        GustField::new(&sigma, cfg.length_scale_m, self.nominal_speed(), self.gust_seed, cfg.gust_grid_dt_s)
    }
}

/// Proportional navigation on the navigated state plus gravity
/// compensation, restricted to the plane normal to the air velocity and
/// clipped to the vehicle's lateral limit.
fn guidance(los: Vec3, ground_vel: Vec3, vel_air: Vec3, gain: f64, max_accel: f64) -> Vec3 {
    let r2 = dot(los, los);
    let v_hat = scale(vel_air, 1.0 / norm(vel_air));
    let mut a = scale(GRAVITY_VEC, -1.0);
    if r2 > 1e-12 {
        let omega = scale(cross(los, scale(ground_vel, -1.0)), 1.0 / r2);
        a = add(a, scale(cross(omega, ground_vel), gain));
    }
    a = sub(a, scale(v_hat, dot(a, v_hat)));
    let m = norm(a);
    if m > max_accel {
        a = scale(a, max_accel / m);
    }
    a
}

/// Squared distance from `p` to the segment `a`–`b`.
fn segment_distance2(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let d = sub(p, add(a, scale(ab, t)));
    dot(d, d)
}

/// Flies one engagement with `est` feeding the gust compensation. Every
/// `decimate`-th step is passed to `trace`. Dynamics aborts and the time cap
/// end the run with `aborted` set; only configuration problems are errors.
pub fn simulate_traced(
    scenario: &Scenario,
    field: &GustField,
    est: &dyn TurbulenceEstimator,
    cfg: &SimConfig,
    decimate: usize,
    trace: &mut dyn FnMut(TraceSample),
) -> Result<RunOutcome> {
    cfg.validate()?;
    let name = est.name().to_string();
    let outcome = |miss_m: f64, t: f64, aborted: Option<String>| RunOutcome {
        estimator: name.clone(),
        miss_m,
        flight_time_s: t,
        cep_hit: aborted.is_none() && miss_m <= CEP_THRESHOLD_M,
        aborted,
    };
    let profile = match scenario.column.sigma_profile(est) {
        Ok(p) => p,
        Err(e) => return Ok(outcome(f64::NAN, 0.0, Some(e.to_string()))),
    };
    let vehicle = &scenario.vehicle;
    let target = scenario.target;
    let dt = cfg.dt_s;
    let t_cap = cfg.time_cap_factor * scenario.nominal_flight_time_s();
    let decimate = decimate.max(1);

    let mut state = VehicleState::new(scenario.launch, scenario.velocity);
    let mut nav = scenario.launch;
    let mut range = norm(sub(target, state.pos));
    let mut miss2 = range * range;
    let mut step = 0usize;
    loop {
        let t = state.t_s;
        if t > t_cap {
            return Ok(outcome(miss2.sqrt(), t, Some(format!("time cap {t_cap:.1} s reached"))));
        }
        let sigma_hat = profile.at(nav[2]);
        let sensed = field.sensed_at(t);
        let ground_vel = add(state.vel_air, scale(sensed, sigma_hat));
        if step % decimate == 0 {
            trace(TraceSample {
                t_s: t,
                pos: state.pos,
                nav_pos: nav,
                gust: field.wind_at(t),
                k_est: 1.5 * sigma_hat * sigma_hat,
            });
        }
        let cmd = guidance(sub(target, nav), ground_vel, state.vel_air, vehicle.guidance_gain, vehicle.max_lateral_accel_mps2);

        let t1 = t + dt;
        let wind = scale(add(field.wind_at(t), field.wind_at(t1)), 0.5);
        let sensed_mean = scale(add(sensed, field.sensed_at(t1)), 0.5);
        let next = match step_dynamics(&state, vehicle, cmd, wind, dt) {
            Ok(s) => s,
            Err(Error::SimAbort(msg)) => return Ok(outcome(miss2.sqrt(), t, Some(msg))),
            Err(e) => return Err(e),
        };
        let air_disp = scale(add(state.vel_air, next.vel_air), 0.5 * dt);
        nav = add(nav, add(air_disp, scale(sensed_mean, sigma_hat * dt)));

        miss2 = miss2.min(segment_distance2(target, state.pos, next.pos));
        let next_range = norm(sub(target, next.pos));
        state = next;
        step += 1;
        if next_range > range {
            return Ok(outcome(miss2.sqrt(), state.t_s, None));
        }
        range = next_range;
    }
}

pub fn simulate(scenario: &Scenario, field: &GustField, est: &dyn TurbulenceEstimator, cfg: &SimConfig) -> Result<RunOutcome> {
    simulate_traced(scenario, field, est, cfg, usize::MAX, &mut |_| {})
}

/// Signed percentage reduction of `miss_b` relative to `miss_a`; exactly
/// zero for equal misses.
pub fn delta_pct(miss_a: f64, miss_b: f64) -> f64 {
    if miss_a == miss_b {
        0.0
    } else {
        100.0 * (miss_a - miss_b) / miss_a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRunRecord {
    pub scenario_id: String,
    pub category: Category,
    pub vehicle: String,
    pub seed: u64,
    pub estimator_a: String,
    pub estimator_b: String,
    pub miss_a_m: f64,
    pub miss_b_m: f64,
    pub delta_pct: f64,
    pub cep_hit_a: bool,
    pub cep_hit_b: bool,
    /// Either run aborted; such records are excluded from statistics.
    pub aborted: Option<String>,
}

impl PairedRunRecord {
    pub fn from_outcomes(scenario: &Scenario, a: &RunOutcome, b: &RunOutcome) -> Self {
        let aborted = match (&a.aborted, &b.aborted) {
            (None, None) => None,
            (x, y) => Some(format!(
                "{}{}",
                x.as_deref().map(|m| format!("{}: {m}; ", a.estimator)).unwrap_or_default(),
                y.as_deref().map(|m| format!("{}: {m}", b.estimator)).unwrap_or_default()
            )),
        };
        Self {
            scenario_id: scenario.id.clone(),
            category: scenario.category,
            vehicle: scenario.vehicle.name.clone(),
            seed: scenario.seed,
            estimator_a: a.estimator.clone(),
            estimator_b: b.estimator.clone(),
            miss_a_m: a.miss_m,
            miss_b_m: b.miss_m,
            delta_pct: delta_pct(a.miss_m, b.miss_m),
            cep_hit_a: a.cep_hit,
            cep_hit_b: b.cep_hit,
            aborted,
        }
    }

    /// 1 if b beat a, 0.5 on a tie, 0 otherwise.
    pub fn win_score(&self) -> f64 {
        if self.miss_b_m < self.miss_a_m {
            1.0
        } else if self.miss_b_m == self.miss_a_m {
            0.5
        } else {
            0.0
        }
    }
}

/// Flies the scenario twice through one gust field, once per estimator.
pub fn run_paired(
    scenario: &Scenario,
    est_a: &dyn TurbulenceEstimator,
    est_b: &dyn TurbulenceEstimator,
    cfg: &SimConfig,
) -> Result<PairedRunRecord> {
    let field = scenario.gust_field(cfg)?;
    let a = simulate(scenario, &field, est_a, cfg)?;
    let b = simulate(scenario, &field, est_b, cfg)?;
    Ok(PairedRunRecord::from_outcomes(scenario, &a, &b))
}
