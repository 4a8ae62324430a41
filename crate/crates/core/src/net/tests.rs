use super::*;
use crate::atmos::{isa_state, regime_target, bulk_richardson, DRY_ADIABATIC_LAPSE};
use proptest::prelude::*;
use rand::Rng;

fn random_state(rng: &mut impl Rng) -> AtmosphericState {
    let h = rng.random_range(5.0..30_000.0);
    let mut s = isa_state(h).unwrap();
    s.wind10_mps = rng.random_range(0.5..25.0);
    s.lapse_k_per_m = rng.random_range(-0.02..0.01);
    s.latitude_deg = rng.random_range(-80.0..80.0);
    s.temperature_k += rng.random_range(-8.0..8.0);
    s.density_ratio = crate::atmos::density_ratio(s.pressure_pa, s.temperature_k);
    s
}

fn randomized_model(seed: u64) -> PstnetModel {
    let mut m = PstnetModel::init(Dims::REFERENCE, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    for p in m.params_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    m.norm = NormStats {
        mean: [8000.0, 250.0, 50_000.0, 8.0, -0.005, 0.5, 0.0],
        scale: [8000.0, 25.0, 30_000.0, 5.0, 0.006, 0.3, 45.0],
    };
    m.target = TargetStats { mean: 1.0, scale: 1.5 };
    m
}

fn batch(seed: u64, n: usize) -> Vec<TrainSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let state = random_state(&mut rng);
            let target = regime_target(bulk_richardson(&state), state.altitude_m);
            TrainSample { state, k_true: rng.random_range(0.0..3.0), target }
        })
        .collect()
}

fn fd_check(m: &PstnetModel, samples: &[TrainSample], lg: f64, lb: f64) {
    let (g, _) = m.backward(samples, lg, lb).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..m.params().len() {
        let mut plus = m.clone();
        plus.params_mut()[i] += h;
        let mut minus = m.clone();
        minus.params_mut()[i] -= h;
        let fd = (plus.loss(samples, lg, lb).unwrap().total - minus.loss(samples, lg, lb).unwrap().total) / (2.0 * h);
        let err = (g.grads[i] - fd).abs();
        let tol = 1e-4 * fd.abs().max(g.grads[i].abs());
        assert!(err <= tol.max(1e-7), "param {i}: analytic {} vs fd {fd}", g.grads[i]);
        worst = worst.max(err);
    }
    assert!(worst.is_finite());
}

#[test]
fn reference_budget() {
    let m = PstnetModel::init(Dims::REFERENCE, 0);
    let a = m.param_audit();
    assert_eq!(a.total, 543);
    // independent arithmetic over the layer widths
    let expected = (16 * 7 + 16 + 4 * 16 + 4) + 4 * (6 * 7 + 6 + 4 * 6 + 4) + (3 + 3 + 8 * 3 + 8) + (4 + 1);
    assert_eq!(a.total, expected);
    assert_eq!(a.gate + a.experts + a.film + a.head, a.total);
    assert!(a.serialized_bytes < 2560);
    assert_eq!(a.serialized_bytes, m.to_bytes().len());
    assert_eq!(a.norm_stats, 16);
}

#[test]
fn doubling_d_doubles_head_weights() {
    let a = Layout::new(Dims::REFERENCE);
    let b = Layout::new(Dims { d: 8, ..Dims::REFERENCE });
    assert_eq!(b.head_w.len(), 2 * a.head_w.len());
    assert_eq!(b.head_b.len(), 1);
}

#[test]
fn every_audited_scalar_reaches_the_output() {
    let m = randomized_model(3);
    let samples = batch(4, 16);
    let base: Vec<f64> = samples.iter().map(|s| m.predict(&s.state)).collect();
    let mut reachable = 0;
    for i in 0..m.params().len() {
        let mut p = m.clone();
        p.params_mut()[i] += 1e-3;
        if samples.iter().zip(&base).any(|(s, &b)| p.predict(&s.state) != b) {
            reachable += 1;
        }
    }
    assert_eq!(reachable, m.param_audit().total);
}

#[test]
fn zero_gate_is_uniform() {
    let m = PstnetModel::zeros(Dims::REFERENCE);
    let a = m.gate_forward(&[1.0, -2.0, 0.5, 3.0, -1.0, 0.2, 0.0]);
    assert_eq!(a, [0.25; 4]);
}

#[test]
fn gate_shift_invariance() {
    let m = randomized_model(1);
    let x = [0.3, -1.0, 0.2, 1.5, -0.4, 0.9, 0.1];
    let a = m.gate_forward(&x);
    let mut shifted = m.clone();
    let r = shifted.layout().gate_bg.clone();
    for p in &mut shifted.params_mut()[r] {
        *p += 7.25;
    }
    let b = shifted.gate_forward(&x);
    for j in 0..4 {
        assert!((a[j] - b[j]).abs() < 1e-12);
    }
}

#[test]
fn zero_expert_returns_output_bias() {
    let mut m = PstnetModel::zeros(Dims::REFERENCE);
    let r = m.layout().expert_b2[1].clone();
    m.params_mut()[r].copy_from_slice(&[0.5, -1.0, 2.0, 0.25]);
    let z = m.expert_forward(1, &[3.0; 7]).unwrap();
    assert_eq!(z, vec![0.5, -1.0, 2.0, 0.25]);
    assert!(matches!(m.expert_forward(4, &[0.0; 7]), Err(Error::Domain(_))));
}

#[test]
fn expert_parameters_disjoint() {
    let m = randomized_model(2);
    let x = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7];
    let before = m.expert_forward(0, &x).unwrap();
    let mut p = m.clone();
    let r = p.layout().expert(2);
    for v in &mut p.params_mut()[r] {
        *v *= -3.0;
    }
    assert_eq!(before, p.expert_forward(0, &x).unwrap());
    let big = m.expert_forward(3, &[10.0, -10.0, 10.0, -10.0, 10.0, -10.0, 10.0]).unwrap();
    assert!(big.iter().all(|v| v.is_finite()));
}

#[test]
fn film_identity_and_zero_gamma() {
    let m = PstnetModel::zeros(Dims::REFERENCE);
    let z = [1.0, -2.0, 3.0, 0.5];
    assert_eq!(m.film_condition(&z, 0.7).unwrap(), z.to_vec());

    let mut g0 = PstnetModel::zeros(Dims::REFERENCE);
    let r = g0.layout().film_b2.clone();
    g0.params_mut()[r].copy_from_slice(&[-1.0, -1.0, -1.0, -1.0, 0.1, 0.2, 0.3, 0.4]);
    assert_eq!(g0.film_condition(&z, 0.7).unwrap(), vec![0.1, 0.2, 0.3, 0.4]);
    assert_eq!(g0.film_condition(&[9.0; 4], 0.2).unwrap(), vec![0.1, 0.2, 0.3, 0.4]);
    assert!(m.film_condition(&z, 0.0).is_err());
}

#[test]
fn film_is_affine_in_z() {
    let m = randomized_model(5);
    let (z1, z2) = ([1.0, 2.0, -1.0, 0.5], [-0.5, 0.25, 3.0, 1.0]);
    let (a, b) = (1.7, -0.4);
    let rho = 0.45;
    let (_, beta) = m.film_params(rho);
    let mix: Vec<f64> = (0..4).map(|i| a * z1[i] + b * z2[i]).collect();
    let lhs = m.film_condition(&mix, rho).unwrap();
    let f1 = m.film_condition(&z1, rho).unwrap();
    let f2 = m.film_condition(&z2, rho).unwrap();
    for i in 0..4 {
        let rhs = a * f1[i] + b * f2[i] - (a + b - 1.0) * beta[i];
        assert!((lhs[i] - rhs).abs() < 1e-12);
    }
}

#[test]
fn saturated_head_returns_backbone() {
    let mut m = randomized_model(6);
    let l = m.layout().clone();
    m.params_mut()[l.head_w].fill(0.0);
    m.params_mut()[l.head_b.start] = -20.0;
    let s = isa_state(300.0).unwrap().with_wind(8.0).with_lapse(-DRY_ADIABATIC_LAPSE);
    let (k, d) = m.forward(&s).unwrap();
    assert!(((k - d.k_mo) / d.k_mo).abs() < 1e-6);
}

#[test]
fn expert_permutation_symmetry() {
    let m = randomized_model(7);
    let mut p = m.clone();
    let l = m.layout().clone();
    let src = m.params().to_vec();
    let dst = p.params_mut();
    let swap = |dst: &mut [f64], a: Range<usize>, b: Range<usize>| {
        dst[a.clone()].copy_from_slice(&src[b.clone()]);
        dst[b].copy_from_slice(&src[a]);
    };
    swap(dst, l.expert(0), l.expert(3));
    let hg = l.dims.gate_hidden;
    swap(dst, l.gate_wg.start..l.gate_wg.start + hg, l.gate_wg.start + 3 * hg..l.gate_wg.start + 4 * hg);
    swap(dst, l.gate_bg.start..l.gate_bg.start + 1, l.gate_bg.start + 3..l.gate_bg.start + 4);
    for s in batch(8, 10) {
        let (a, b) = (m.predict(&s.state), p.predict(&s.state));
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let samples = batch(11, 8);
    let mut m = PstnetModel::init(Dims::REFERENCE, 9);
    m.norm = randomized_model(0).norm;
    m.target = TargetStats { mean: 1.0, scale: 1.5 };
    fd_check(&m, &samples, 0.1, 0.01);
    fd_check(&randomized_model(12), &samples, 0.1, 0.01);
    fd_check(&randomized_model(13), &samples, 0.7, 0.3);
}

#[test]
fn matched_loss_is_stationary() {
    let mut m = PstnetModel::zeros(Dims::REFERENCE);
    m.target = TargetStats { mean: 0.0, scale: 2.0 };
    let samples: Vec<TrainSample> = batch(20, 8)
        .into_iter()
        .map(|mut s| {
            s.k_true = m.predict(&s.state);
            s.target = uniform_target(0.0);
            s
        })
        .collect();
    let (g, loss) = m.backward(&samples, 0.1, 0.0).unwrap();
    assert!(loss.data_mse < 1e-30);
    assert!(g.l2_norm() < 1e-12, "norm {}", g.l2_norm());
}

#[test]
fn inactive_expert_gets_no_gradient() {
    let mut m = randomized_model(21);
    let l = m.layout().clone();
    m.params_mut()[l.gate_bg.start + 2] = -1e4;
    let samples = batch(22, 8);
    let (g, _) = m.backward(&samples, 0.0, 0.0).unwrap();
    assert!(g.grads[l.expert(2)].iter().all(|&v| v == 0.0));
    assert!(g.grads[l.expert(1)].iter().any(|&v| v != 0.0));
}

#[test]
fn empty_batch_rejected() {
    let m = PstnetModel::zeros(Dims::REFERENCE);
    assert!(matches!(m.backward(&[], 0.1, 0.01), Err(Error::Domain(_))));
}

#[test]
fn save_load_round_trip() {
    let mut m = randomized_model(30);
    m.quantize();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pstn");
    m.save(&path).unwrap();
    let back = PstnetModel::load(&path).unwrap();
    assert_eq!(back, m);
    let path2 = dir.path().join("m2.pstn");
    back.save(&path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn load_error_cases_are_distinct() {
    let bytes = randomized_model(31).to_bytes();
    let truncated = &bytes[..bytes.len() - 9];
    assert!(matches!(PstnetModel::from_bytes(truncated), Err(Error::Checksum { .. })));

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(PstnetModel::from_bytes(&bad_magic), Err(Error::Corrupt(_))));

    let mut flipped = bytes.clone();
    flipped[100] ^= 0x40;
    assert!(matches!(PstnetModel::from_bytes(&flipped), Err(Error::Checksum { .. })));

    let mut v2 = bytes[..bytes.len() - 4].to_vec();
    v2[4..6].copy_from_slice(&2u16.to_le_bytes());
    let crc = crc32fast::hash(&v2);
    v2.extend_from_slice(&crc.to_le_bytes());
    assert!(matches!(PstnetModel::from_bytes(&v2), Err(Error::Version { found: 2, expected: 1 })));
}

#[test]
fn single_precision_path_agrees() {
    let m = randomized_model(40);
    for s in batch(41, 200) {
        let (a, b) = (m.predict(&s.state), m.predict_f32(&s.state));
        assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-12), "{a} vs {b}");
    }
}

proptest! {
    #[test]
    fn gate_on_simplex(seed in 0u64..1000, x in prop::array::uniform7(-10.0f64..10.0)) {
        let a = randomized_model(seed).gate_forward(&x);
        prop_assert!(a.iter().all(|&v| v > 0.0 || v == 0.0));
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn output_sandwiched(seed in 0u64..1000, sseed in 0u64..1000) {
        let m = randomized_model(seed);
        let s = batch(sseed, 1)[0].state;
        let (k, d) = m.forward(&s).unwrap();
        let top = d.k_mo + mophys::kolmogorov_scale(d.epsilon, s.density_ratio);
        prop_assert!(k >= d.k_mo && k <= top);
        prop_assert!((d.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
