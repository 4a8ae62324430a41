//! Zero-parameter surface-layer physics: friction velocity, Obukhov length,
//! the Monin–Obukhov TKE backbone, the dissipation-rate estimate and the
//! Kolmogorov output transform.
//!
//! Nothing in this module is learned. Every function is a pure map of its
//! arguments and the fixed [`PhysicsConstants`].

pub mod dryden;

use serde::{Deserialize, Serialize};

use crate::atmos::{AtmosphericState, DRY_ADIABATIC_LAPSE, GRAVITY};

pub const C_MU: f64 = 0.09;
pub const KAPPA: f64 = 0.4;
pub const C_K: f64 = 1.5;

/// Reference height of the wind measurement (m).
pub const WIND_REF_HEIGHT_M: f64 = 10.0;
/// Aerodynamic roughness length, open grassland (m).
pub const ROUGHNESS_LENGTH_M: f64 = 0.03;
/// Bulk heat-transfer coefficient for the surface heat-flux proxy.
pub const HEAT_TRANSFER_COEFF: f64 = 1.3e-3;
/// Layer depth of the heat-flux proxy (m).
pub const FLUX_LAYER_DEPTH_M: f64 = 100.0;
/// Height cap on the similarity evaluation height (m).
pub const HEIGHT_CAP_M: f64 = 500.0;
/// Floor on the evaluation height, keeps ε finite at the surface (m).
pub const HEIGHT_FLOOR_M: f64 = 2.0;
/// Clamp on ζ = h/L for the Businger–Dyer forms.
pub const ZETA_CLAMP: f64 = 5.0;

/// Fixed physical constants carried by every model. Never trained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    pub c_mu: f64,
    pub kappa: f64,
    pub c_k: f64,
    pub g: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self { c_mu: C_MU, kappa: KAPPA, c_k: C_K, g: GRAVITY }
    }
}

/// Surface-layer flux quantities derived from a single state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFluxState {
    pub u_star_mps: f64,
    pub theta_v_k: f64,
    /// Kinematic heat flux w'θ'_v (K·m/s), positive upward.
    pub heat_flux_kms: f64,
    /// Obukhov length; `f64::INFINITY` marks the neutral limit.
    pub obukhov_len_m: f64,
}

impl SurfaceFluxState {
    pub fn from_state(state: &AtmosphericState) -> Self {
        let u_star = friction_velocity(state.wind10_mps);
        let theta_v = state.temperature_k;
        let flux = heat_flux_proxy(state.wind10_mps, state.lapse_k_per_m);
        Self {
            u_star_mps: u_star,
            theta_v_k: theta_v,
            heat_flux_kms: flux,
            obukhov_len_m: obukhov_length(u_star, theta_v, flux),
        }
    }
}

/// Non-negative TKE dissipation rate (m²/s³).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DissipationEstimate {
    pub epsilon_m2s3: f64,
}

/// Neutral log-law friction velocity `u* = κ u10 / ln(z_ref / z0)`.
pub fn friction_velocity(wind10_mps: f64) -> f64 {
    KAPPA * wind10_mps / (WIND_REF_HEIGHT_M / ROUGHNESS_LENGTH_M).ln()
}

/// Bulk-transfer closure `w'θ' = −C_H u10 (dT/dz + Γ_d) Δz`.
pub fn heat_flux_proxy(wind10_mps: f64, lapse_k_per_m: f64) -> f64 {
    -HEAT_TRANSFER_COEFF * wind10_mps * (lapse_k_per_m + DRY_ADIABATIC_LAPSE) * FLUX_LAYER_DEPTH_M
}

/// Obukhov length `L = −u*³ θ_v / (κ g w'θ'_v)`. Zero flux returns `+∞`.
pub fn obukhov_length(u_star_mps: f64, theta_v_k: f64, heat_flux_kms: f64) -> f64 {
    if heat_flux_kms == 0.0 {
        return f64::INFINITY;
    }
    -u_star_mps.powi(3) * theta_v_k / (KAPPA * GRAVITY * heat_flux_kms)
}

/// Businger–Dyer dimensionless shear with ζ clamped to `[−5, 5]`.
pub fn phi_m(zeta: f64) -> f64 {
    let z = zeta.clamp(-ZETA_CLAMP, ZETA_CLAMP);
    if z < 0.0 {
        (1.0 - 16.0 * z).powf(-0.25)
    } else {
        1.0 + 5.0 * z
    }
}

fn phi_epsilon(zeta: f64) -> f64 {
    let z = zeta.clamp(-ZETA_CLAMP, ZETA_CLAMP);
    if z >= 0.0 {
        phi_m(z) - z
    } else {
        phi_m(z)
    }
}

/// Height at which similarity functions are evaluated.
pub fn effective_height(altitude_m: f64) -> f64 {
    altitude_m.clamp(HEIGHT_FLOOR_M, HEIGHT_CAP_M)
}

/// Stability parameter ζ = h_eff / L, zero in the neutral or windless limit.
pub fn stability_zeta(h_eff: f64, obukhov_len_m: f64) -> f64 {
    if !obukhov_len_m.is_finite() || obukhov_len_m == 0.0 {
        0.0
    } else {
        h_eff / obukhov_len_m
    }
}

/// Monin–Obukhov TKE backbone `k = u*² / √C_μ · φ_m(h_eff / L)`.
pub fn mo_tke(state: &AtmosphericState) -> f64 {
    let flux = SurfaceFluxState::from_state(state);
    let zeta = stability_zeta(effective_height(state.altitude_m), flux.obukhov_len_m);
    flux.u_star_mps * flux.u_star_mps / C_MU.sqrt() * phi_m(zeta)
}

/// Surface-layer dissipation `ε = u*³ / (κ h_eff) · φ_ε(ζ)`.
pub fn dissipation(u_star_mps: f64, altitude_m: f64, obukhov_len_m: f64) -> DissipationEstimate {
    let h_eff = effective_height(altitude_m);
    let zeta = stability_zeta(h_eff, obukhov_len_m);
    let eps = u_star_mps.powi(3) / (KAPPA * h_eff) * phi_epsilon(zeta);
    DissipationEstimate { epsilon_m2s3: eps.max(0.0) }
}

/// Backbone TKE and dissipation for one state, sharing the flux computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backbone {
    pub k_mo: f64,
    pub epsilon: DissipationEstimate,
    pub zeta: f64,
}

pub fn backbone(state: &AtmosphericState) -> Backbone {
    let flux = SurfaceFluxState::from_state(state);
    let h_eff = effective_height(state.altitude_m);
    let zeta = stability_zeta(h_eff, flux.obukhov_len_m);
    let u2 = flux.u_star_mps * flux.u_star_mps;
    Backbone {
        k_mo: u2 / C_MU.sqrt() * phi_m(zeta),
        epsilon: dissipation(flux.u_star_mps, state.altitude_m, flux.obukhov_len_m),
        zeta,
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Largest residual the Kolmogorov layer can add: `C_K ε^{1/3} √(ρ/ρ₀)`.
#[inline]
pub fn kolmogorov_scale(eps: DissipationEstimate, density_ratio: f64) -> f64 {
    C_K * eps.epsilon_m2s3.cbrt() * density_ratio.sqrt()
}

/// `k = k_MO + σ(s) C_K ε^{1/3} (ρ/ρ₀)^{1/2}`, bounded by construction to
/// `[k_MO, k_MO + C_K ε^{1/3} √(ρ/ρ₀)]`.
#[inline]
pub fn kolmogorov_output(k_mo: f64, s: f64, eps: DissipationEstimate, density_ratio: f64) -> f64 {
    k_mo + sigmoid(s) * kolmogorov_scale(eps, density_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atmos::isa_state;
    use proptest::prelude::*;

    fn neutral(wind: f64, alt: f64) -> AtmosphericState {
        isa_state(alt).unwrap().with_wind(wind).with_lapse(-DRY_ADIABATIC_LAPSE)
    }

    #[test]
    fn friction_velocity_examples() {
        assert_eq!(friction_velocity(0.0), 0.0);
        let u = friction_velocity(10.0);
        assert!((u - 0.4 * 10.0 / (10.0f64 / 0.03).ln()).abs() < 1e-15);
        assert!((u - 0.6886).abs() < 5e-5);
        assert_eq!(friction_velocity(2.0 * 7.3), 2.0 * friction_velocity(7.3));
    }

    #[test]
    fn obukhov_examples() {
        assert_eq!(obukhov_length(0.5, 300.0, 0.0), f64::INFINITY);
        assert!(obukhov_length(0.5, 300.0, 1e-300).abs() > 1e290);
        assert!(obukhov_length(0.5, 300.0, 0.05) < 0.0);
        let l = obukhov_length(0.5, 300.0, 0.1);
        assert!((l - (-0.125 * 300.0 / (0.4 * 9.81 * 0.1))).abs() < 1e-12);
        assert!((l + 95.57).abs() < 5e-3);
    }

    #[test]
    fn phi_m_examples() {
        assert_eq!(phi_m(0.0), 1.0);
        assert_eq!(phi_m(1.0), 6.0);
        assert!((phi_m(-1.0) - 17f64.powf(-0.25)).abs() < 1e-15);
        assert!((phi_m(-1.0) - 0.4925).abs() < 5e-5);
        assert_eq!(phi_m(100.0), phi_m(5.0));
        assert!((phi_m(-1e-12) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mo_tke_examples() {
        let k = mo_tke(&neutral(10.0, 100.0));
        let u = friction_velocity(10.0);
        assert!((k - u * u / 0.3).abs() < 1e-14);
        assert!((k - 1.5806).abs() < 1e-3);
        assert_eq!(mo_tke(&neutral(0.0, 100.0)), 0.0);
        assert_eq!(mo_tke(&isa_state(100.0).unwrap().with_lapse(0.02)), 0.0);
    }

    #[test]
    fn mo_tke_stable_ratio() {
        // Find a stable state with ζ = 1 exactly by choosing the lapse that
        // gives L = h_eff, then compare with the neutral value.
        let wind = 6.0;
        let h = 200.0;
        let u = friction_velocity(wind);
        let t = isa_state(h).unwrap().temperature_k;
        // L = h  =>  flux = -u^3 T / (κ g h)
        let flux = -u.powi(3) * t / (KAPPA * GRAVITY * h);
        let lapse = -flux / (HEAT_TRANSFER_COEFF * wind * FLUX_LAYER_DEPTH_M) - DRY_ADIABATIC_LAPSE;
        let stable = isa_state(h).unwrap().with_wind(wind).with_lapse(lapse);
        let ratio = mo_tke(&stable) / mo_tke(&neutral(wind, h));
        assert!((ratio - 6.0).abs() < 1e-9, "{ratio}");
    }

    #[test]
    fn dissipation_examples() {
        assert_eq!(dissipation(0.0, 100.0, f64::INFINITY).epsilon_m2s3, 0.0);
        let e = dissipation(0.6886, 100.0, f64::INFINITY).epsilon_m2s3;
        assert!((e - 0.6886f64.powi(3) / 40.0).abs() < 1e-15);
        assert!((e - 8.163e-3).abs() < 1e-6);
        let e8 = dissipation(8.0 * 0.3, 100.0, f64::INFINITY).epsilon_m2s3;
        let e1 = dissipation(0.3, 100.0, f64::INFINITY).epsilon_m2s3;
        assert!((e8 / e1 - 512.0).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_examples() {
        let eps = DissipationEstimate { epsilon_m2s3: 1.0 };
        assert_eq!(kolmogorov_output(2.0, -1e4, eps, 1.0), 2.0);
        assert!((kolmogorov_output(2.0, 0.0, eps, 1.0) - 2.75).abs() < 1e-15);
        let e2 = DissipationEstimate { epsilon_m2s3: 2.0 };
        let r1 = kolmogorov_output(0.0, 0.3, eps, 0.7);
        let r2 = kolmogorov_output(0.0, 0.3, e2, 0.7);
        assert!((r2 / r1 - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn backbone_matches_separate_calls() {
        let s = isa_state(300.0).unwrap().with_wind(9.0).with_lapse(-0.012);
        let b = backbone(&s);
        let f = SurfaceFluxState::from_state(&s);
        assert_eq!(b.k_mo, mo_tke(&s));
        assert_eq!(b.epsilon, dissipation(f.u_star_mps, s.altitude_m, f.obukhov_len_m));
    }

    proptest! {
        #[test]
        fn obukhov_sign_law(u in 0.01..3.0f64, th in 150.0..350.0f64, flux in -1.0..1.0f64) {
            prop_assume!(flux != 0.0);
            let l = obukhov_length(u, th, flux);
            prop_assert_eq!(l.signum(), -flux.signum());
        }

        #[test]
        fn kolmogorov_sandwich_and_monotone(
            k in 0.0..50.0f64, s in -40.0..40.0f64, ds in 0.0..5.0f64,
            e in 0.0..2.0f64, de in 0.0..1.0f64, r in 0.01..1.3f64, dr in 0.0..0.3f64,
        ) {
            let eps = DissipationEstimate { epsilon_m2s3: e };
            let out = kolmogorov_output(k, s, eps, r);
            prop_assert!(out >= k);
            prop_assert!(out <= k + kolmogorov_scale(eps, r));
            prop_assert!(kolmogorov_output(k, s + ds, eps, r) >= out);
            let eps2 = DissipationEstimate { epsilon_m2s3: e + de };
            prop_assert!(kolmogorov_output(k, s, eps2, r) >= out);
            prop_assert!(kolmogorov_output(k, s, eps, r + dr) >= out);
        }

        #[test]
        fn backbone_non_negative(
            h in 0.0..35_000.0f64, u in 0.0..40.0f64, lapse in -0.05..0.05f64,
        ) {
            let s = isa_state(h).unwrap().with_wind(u).with_lapse(lapse);
            let b = backbone(&s);
            prop_assert!(b.k_mo >= 0.0 && b.k_mo.is_finite());
            prop_assert!(b.epsilon.epsilon_m2s3 >= 0.0 && b.epsilon.epsilon_m2s3.is_finite());
        }
    }
}
