//! Point-mass translational dynamics with a first-order lateral lag.

use serde::{Deserialize, Serialize};

use super::{add, norm, scale, Vec3, VehicleClass, GRAVITY_VEC, LAG_TAU_S, MAX_DT_S};
use crate::atmos::{isa_pressure, isa_temperature, MAX_ALTITUDE_M};
use crate::error::{Error, Result};

/// ISA sea-level density (kg/m³).
const RHO0: f64 = 1.225;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub t_s: f64,
    /// Ground-frame position, z up (m).
    pub pos: Vec3,
    /// Velocity relative to the air mass (m/s).
    pub vel_air: Vec3,
    /// Achieved lateral acceleration (m/s²).
    pub lat_accel: Vec3,
}

impl VehicleState {
    pub fn new(pos: Vec3, vel_air: Vec3) -> Self {
        Self { t_s: 0.0, pos, vel_air, lat_accel: [0.0; 3] }
    }

    /// Specific mechanical energy `|v|²/2 + g z` (J/kg).
    pub fn specific_energy(&self) -> f64 {
        0.5 * super::dot(self.vel_air, self.vel_air) - GRAVITY_VEC[2] * self.pos[2]
    }

    fn is_finite(&self) -> bool {
        self.pos.iter().chain(&self.vel_air).chain(&self.lat_accel).all(|v| v.is_finite())
    }
}

/// ISA air density, clamped to the table's altitude range.
pub fn air_density(altitude_m: f64) -> f64 {
    let h = altitude_m.clamp(0.0, MAX_ALTITUDE_M);
    RHO0 * crate::atmos::density_ratio(isa_pressure(h), isa_temperature(h))
}

/// ISA speed of sound (m/s).
pub fn speed_of_sound(altitude_m: f64) -> f64 {
    (1.4 * 287.052_87 * isa_temperature(altitude_m.clamp(0.0, MAX_ALTITUDE_M))).sqrt()
}

/// One semi-implicit step. The lag state is advanced exactly over `dt`
/// towards `accel_cmd`, the resulting acceleration (lag + gravity + drag)
/// is held constant over the step, and position advances by the mean air
/// velocity plus `gust` (the mean wind over the step).
pub fn step_dynamics(
    state: &VehicleState,
    vehicle: &VehicleClass,
    accel_cmd: Vec3,
    gust: Vec3,
    dt: f64,
) -> Result<VehicleState> {
    if !(dt > 0.0 && dt <= MAX_DT_S) {
        return Err(Error::domain(format!("dt {dt} s outside (0, {MAX_DT_S}]")));
    }
    let decay = (-dt / LAG_TAU_S).exp();
    let lat = std::array::from_fn(|i| accel_cmd[i] + (state.lat_accel[i] - accel_cmd[i]) * decay);
    let v = state.vel_air;
    let drag = scale(v, -air_density(state.pos[2]) * norm(v) * vehicle.drag_factor());
    let accel = add(add(lat, GRAVITY_VEC), drag);
    let v_new: Vec3 = std::array::from_fn(|i| v[i] + accel[i] * dt);
    let pos = std::array::from_fn(|i| state.pos[i] + 0.5 * (v[i] + v_new[i]) * dt + gust[i] * dt);
    let next = VehicleState { t_s: state.t_s + dt, pos, vel_air: v_new, lat_accel: lat };
    if !next.is_finite() {
        return Err(Error::SimAbort(format!("non-finite vehicle state at t = {:.3} s: {next:?}", next.t_s)));
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dragless() -> VehicleClass {
        VehicleClass { drag_coeff: 0.0, ..VehicleClass::supersonic() }
    }

    #[test]
    fn ballistic_matches_closed_form() {
        let v0 = [600.0, 20.0, 50.0];
        let mut s = VehicleState::new([0.0, 0.0, 8_000.0], v0);
        for _ in 0..100 {
            s = step_dynamics(&s, &dragless(), [0.0; 3], [0.0; 3], 0.01).unwrap();
        }
        let t: f64 = 1.0;
        let expected = [v0[0] * t, v0[1] * t, 8_000.0 + v0[2] * t - 0.5 * 9.81 * t * t];
        for i in 0..3 {
            assert!((s.pos[i] - expected[i]).abs() < 1e-6, "{:?} vs {expected:?}", s.pos);
        }
    }

    #[test]
    fn constant_gust_shifts_position() {
        let v = VehicleClass::supersonic();
        let w = [3.0, -2.0, 0.0];
        let (mut a, mut b) = (VehicleState::new([0.0, 0.0, 5_000.0], [800.0, 0.0, 0.0]), VehicleState::new([0.0, 0.0, 5_000.0], [800.0, 0.0, 0.0]));
        for _ in 0..1_000 {
            a = step_dynamics(&a, &v, [0.0; 3], [0.0; 3], 0.01).unwrap();
            b = step_dynamics(&b, &v, [0.0; 3], w, 0.01).unwrap();
        }
        // Drag sees only the air velocity, so a horizontal gust shifts the
        // track without changing anything else.
        for i in 0..3 {
            assert!((b.pos[i] - a.pos[i] - w[i] * 10.0).abs() < 1e-6, "axis {i}");
        }
        assert_eq!(a.vel_air, b.vel_air);
    }

    #[test]
    fn lag_reaches_command_exponentially() {
        let mut s = VehicleState::new([0.0, 0.0, 5_000.0], [800.0, 0.0, 0.0]);
        let cmd = [0.0, 100.0, 0.0];
        for _ in 0..20 {
            s = step_dynamics(&s, &dragless(), cmd, [0.0; 3], 0.01).unwrap();
        }
        assert!((s.lat_accel[1] - 100.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_dt_and_non_finite() {
        let s = VehicleState::new([0.0; 3], [1.0, 0.0, 0.0]);
        let v = VehicleClass::supersonic();
        assert!(step_dynamics(&s, &v, [0.0; 3], [0.0; 3], 0.0).is_err());
        assert!(step_dynamics(&s, &v, [0.0; 3], [0.0; 3], 0.051).is_err());
        assert!(matches!(step_dynamics(&s, &v, [f64::NAN, 0.0, 0.0], [0.0; 3], 0.01), Err(Error::SimAbort(_))));
    }

    #[test]
    fn density_and_sound_speed_at_sea_level() {
        assert!((air_density(0.0) - 1.225).abs() < 1e-12);
        assert!((speed_of_sound(0.0) - 340.294).abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn energy_never_increases(
            vx in 100.0..2_500.0f64, vz in -300.0..300.0f64, h in 0.0..30_000.0f64, dt in 0.001..0.05f64
        ) {
            let v = VehicleClass::hypersonic_glide();
            let mut s = VehicleState::new([0.0, 0.0, h], [vx, 0.0, vz]);
            for _ in 0..200 {
                let next = step_dynamics(&s, &v, [0.0; 3], [0.0; 3], dt).unwrap();
                let (e0, e1) = (s.specific_energy(), next.specific_energy());
                prop_assert!(e1 <= e0 + 1e-12 * e0.abs());
                s = next;
            }
        }
    }
}
