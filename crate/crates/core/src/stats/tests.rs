use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;

fn sample(v: &[f64]) -> PairedSample {
    PairedSample::new(v.to_vec()).unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Γ(x) for positive integer or half-integer x by recursion.
fn gamma_half(x: f64) -> f64 {
    let mut g = if x.fract() == 0.0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut y = if x.fract() == 0.0 { 1.0 } else { 0.5 };
    while y < x - 1e-9 {
        g *= y;
        y += 1.0;
    }
    g
}

fn t_cdf_oracle(t: f64, df: f64) -> f64 {
    let c = gamma_half((df + 1.0) / 2.0) / ((df * std::f64::consts::PI).sqrt() * gamma_half(df / 2.0));
    let dens = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let half = simpson(dens, 0.0, t.abs(), 20_000);
    0.5 + half.copysign(t)
}

fn chi2_cdf_oracle(x: f64, df: f64) -> f64 {
    let c = 1.0 / (2f64.powf(df / 2.0) * gamma_half(df / 2.0));
    // x = u² removes the singularity at zero
    let dens = |u: f64| if u == 0.0 && df < 2.0 { 2.0 * c } else { c * (u * u).powf(df / 2.0 - 1.0) * (-u * u / 2.0).exp() * 2.0 * u };
    simpson(dens, 0.0, x.sqrt(), 20_000)
}

#[test]
fn t_cdf_matches_quadrature() {
    for &df in &[1.0, 2.0, 4.0, 9.0, 30.0, 339.0] {
        for &t in &[-3.5, -1.0, -0.2, 0.0, 0.7, 2.0, 4.2426] {
            let (got, want) = (t_cdf(t, df), t_cdf_oracle(t, df));
            assert!((got - want).abs() < 1e-10, "df {df} t {t}: {got} vs {want}");
        }
    }
}

#[test]
fn chi2_cdf_matches_quadrature_and_closed_form() {
    for &df in &[1.0, 2.0, 3.0, 4.0, 7.0] {
        for &x in &[0.1, 1.0, 3.0, 6.5, 12.0] {
            let (got, want) = (chi2_cdf(x, df), chi2_cdf_oracle(x, df));
            assert!((got - want).abs() < 1e-10, "df {df} x {x}: {got} vs {want}");
        }
    }
    assert!((chi2_sf(6.5, 2.0) - (-3.25f64).exp()).abs() < 1e-14);
}

#[test]
fn paired_t_on_one_to_five() {
    let r = paired_t(&sample(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
    let t = 3.0 / (2.5f64.sqrt() / 5f64.sqrt());
    assert!((r.t - t).abs() < 1e-12);
    let p = 2.0 * (1.0 - t_cdf_oracle(t, 4.0));
    assert!((r.p - p).abs() < 1e-10);
    assert!((r.p - 0.0132).abs() < 5e-5);
    let neg = paired_t(&sample(&[-1.0, -2.0, -3.0, -4.0, -5.0])).unwrap();
    assert_eq!(neg.t, -r.t);
    assert_eq!(neg.p, r.p);
}

#[test]
fn degenerate_samples_are_flagged() {
    let zero = sample(&[0.0; 6]);
    let t = paired_t(&zero).unwrap();
    assert_eq!((t.p, t.degenerate), (1.0, Some(Degenerate::ZeroVarianceNullMean)));
    assert_eq!(cohens_d(&zero).unwrap(), 0.0);
    assert_eq!(wilcoxon_signed_rank(&zero).degenerate, Some(Degenerate::AllZero));
    let constant = sample(&[2.0; 6]);
    let t = paired_t(&constant).unwrap();
    assert_eq!((t.p, t.degenerate), (0.0, Some(Degenerate::ZeroVarianceNonzeroMean)));
    assert!(cohens_d(&constant).is_err());
    assert!(PairedSample::new(vec![]).is_err());
    assert!(PairedSample::new(vec![1.0, f64::NAN]).is_err());
    assert!(paired_t(&sample(&[1.0])).is_err());
}

#[test]
fn cohens_d_on_one_to_five() {
    let d = cohens_d(&sample(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
    assert!((d - 3.0 / 2.5f64.sqrt()).abs() < 1e-12);
    assert!((d - 1.8974).abs() < 1e-4);
    assert_eq!(effect_label(d), "large");
    assert_eq!(effect_label(-0.3), "small");
}

/// Brute-force signed-rank distribution on doubled mid-ranks, written as
/// a subset-sum recursion rather than a bitmask sweep.
fn enumeration_oracle(d: &[f64]) -> (f64, f64) {
    let nz: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
    let n = nz.len();
    let mut twice = vec![0i64; n];
    for i in 0..n {
        let less = nz.iter().filter(|y| y.abs() < nz[i].abs()).count() as i64;
        let equal = nz.iter().filter(|y| y.abs() == nz[i].abs()).count() as i64;
        twice[i] = 2 * less + equal + 1;
    }
    let obs: i64 = (0..n).filter(|&i| nz[i] > 0.0).map(|i| twice[i]).sum();
    fn walk(r: &[i64], acc: i64, obs: i64, le: &mut u64, ge: &mut u64) {
        match r.split_first() {
            None => {
                *le += (acc <= obs) as u64;
                *ge += (acc >= obs) as u64;
            }
            Some((&h, t)) => {
                walk(t, acc, obs, le, ge);
                walk(t, acc + h, obs, le, ge);
            }
        }
    }
    let (mut le, mut ge) = (0, 0);
    walk(&twice, 0, obs, &mut le, &mut ge);
    let total = (1u64 << n) as f64;
    ((2.0 * le.min(ge) as f64 / total).min(1.0), ge as f64 / total)
}

proptest! {
    #[test]
    fn wilcoxon_exact_matches_enumeration(
        d in prop::collection::vec(prop_oneof![(-8i32..=8).prop_map(f64::from), -5.0f64..5.0], 1..=10)
    ) {
        let s = sample(&d);
        let w = wilcoxon_signed_rank(&s);
        if d.iter().all(|x| *x == 0.0) {
            prop_assert_eq!(w.degenerate, Some(Degenerate::AllZero));
        } else {
            let (p, p_greater) = enumeration_oracle(&d);
            prop_assert!(w.exact);
            prop_assert_eq!(w.p, p);
            prop_assert_eq!(w.p_greater, p_greater);
            prop_assert!((w.w_plus + w.w_minus - (w.n_used * (w.n_used + 1)) as f64 / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cohens_d_scale_invariant_and_sign_equivariant(
        d in prop::collection::vec(-10.0f64..10.0, 3..30), c in 0.01f64..100.0
    ) {
        let s = sample(&d);
        prop_assume!(s.sd() > 1e-6);
        let base = cohens_d(&s).unwrap();
        let scaled = cohens_d(&sample(&d.iter().map(|x| x * c).collect::<Vec<_>>())).unwrap();
        let negated = cohens_d(&sample(&d.iter().map(|x| -x).collect::<Vec<_>>())).unwrap();
        prop_assert!((scaled - base).abs() < 1e-9 * base.abs().max(1.0));
        prop_assert!((negated + base).abs() < 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn p_values_in_unit_interval(d in prop::collection::vec(-10.0f64..10.0, 2..40)) {
        let s = sample(&d);
        let t = paired_t(&s).unwrap();
        let w = wilcoxon_signed_rank(&s);
        let a = wilcoxon_approx(&s);
        for p in [t.p, w.p, w.p_greater, a.p, a.p_greater] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn friedman_invariant_under_block_and_model_permutation(
        rows in prop::collection::vec(prop::collection::vec(0i32..4, 4), 3..12),
        shift in 0usize..12, rot in 0usize..4
    ) {
        let table: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&x| f64::from(x)).collect()).collect();
        let base = friedman(&table).unwrap();
        let mut blocks = table.clone();
        blocks.rotate_left(shift % table.len());
        let relabel: Vec<Vec<f64>> = table.iter().map(|r| { let mut r = r.clone(); r.rotate_left(rot); r }).collect();
        prop_assert!((friedman(&blocks).unwrap().chi2 - base.chi2).abs() < 1e-9);
        let f = friedman(&relabel).unwrap();
        prop_assert!((f.chi2 - base.chi2).abs() < 1e-9);
        let mut expected = base.mean_ranks.clone();
        expected.rotate_left(rot);
        for (a, b) in f.mean_ranks.iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&f.p));
    }
}

#[test]
fn single_positive_difference() {
    let w = wilcoxon_signed_rank(&sample(&[3.0]));
    assert!(w.exact);
    assert_eq!((w.p_greater, w.p), (0.5, 1.0));
}

#[test]
fn ten_positive_differences_reach_the_extreme_tail() {
    let w = wilcoxon_signed_rank(&sample(&(1..=10).map(f64::from).collect::<Vec<_>>()));
    assert_eq!(w.w_plus, 55.0);
    assert_eq!(w.p, 2.0 / 1024.0);
}

/// Untied sample of size 12 whose positive ranks sum to `w`.
fn sample_with_w_plus(w: usize) -> PairedSample {
    let mut rest = w;
    let d = (1..=12usize)
        .rev()
        .map(|r| {
            if r <= rest {
                rest -= r;
                r as f64
            } else {
                -(r as f64)
            }
        })
        .collect();
    PairedSample::new(d).unwrap()
}

fn exact_approx_gaps() -> Vec<(f64, f64)> {
    (0..=78)
        .map(|w| {
            let s = sample_with_w_plus(w);
            let (e, a) = (wilcoxon_exact(&s), wilcoxon_approx(&s));
            assert_eq!(e.w_plus, w as f64);
            assert!(e.exact && !a.exact);
            (e.p, (e.p - a.p).abs())
        })
        .collect()
}

#[test]
fn approximate_and_exact_agree_in_the_tail_at_twelve() {
    let tail = exact_approx_gaps().into_iter().filter(|g| g.0 <= 0.2).map(|g| g.1).fold(0.0, f64::max);
    assert!(tail < 0.01, "largest tail gap {tail}");
}

#[test]
#[ignore = "the continuity-corrected normal approximation is 0.0137 off near p = 0.42 at n = 12"]
fn approximate_and_exact_agree_everywhere_at_twelve() {
    let worst = exact_approx_gaps().into_iter().map(|g| g.1).fold(0.0, f64::max);
    assert!(worst < 0.01, "largest gap {worst}");
}

#[test]
fn large_samples_take_the_approximate_branch() {
    let d: Vec<f64> = (1..=30).map(|i| f64::from(i) - 10.0).collect();
    let w = wilcoxon_signed_rank(&sample(&d));
    assert!(!w.exact);
    assert_eq!(w.n_used, 29);
}

#[test]
fn bootstrap_constant_and_bracketing() {
    let c = bootstrap_ci(&[4.0; 10], mean, 0.95, 500, 1).unwrap();
    assert_eq!((c.lo, c.hi), (4.0, 4.0));
    let xs = [0.3, -1.2, 2.2, 0.9, 1.4, -0.1, 0.8, 1.7];
    let c = bootstrap_ci(&xs, mean, 0.95, 5_000, 9).unwrap();
    assert!(c.lo <= mean(&xs) && mean(&xs) <= c.hi);
    assert_eq!(c, bootstrap_ci(&xs, mean, 0.95, 5_000, 9).unwrap());
    assert_ne!(c, bootstrap_ci(&xs, mean, 0.95, 5_000, 10).unwrap());
    assert!(bootstrap_ci(&xs, mean, 1.0, 10, 0).is_err());
}

#[test]
fn bootstrap_coverage_is_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 1_000;
    let mut covered = 0;
    for trial in 0..trials {
        let xs: Vec<f64> = (0..50).map(|_| StandardNormal.sample(&mut rng)).collect();
        let c = bootstrap_ci(&xs, mean, 0.95, BOOTSTRAP_RESAMPLES, trial).unwrap();
        covered += (c.lo <= 0.0 && 0.0 <= c.hi) as usize;
    }
    let rate = covered as f64 / trials as f64;
    assert!((rate - 0.95).abs() <= 0.02, "coverage {rate}");
}

/// Exact null distribution of χ²_F over all (k!)^n within-block rank
/// assignments.
fn friedman_exact_p(k: usize, n: usize, observed: f64) -> f64 {
    fn perms(items: Vec<f64>) -> Vec<Vec<f64>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.clone();
            let x = rest.remove(i);
            for mut p in perms(rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }
    let rows = perms((1..=k).map(|r| r as f64).collect());
    let (mut hits, mut total) = (0u64, 0u64);
    let mut idx = vec![0usize; n];
    loop {
        let sums: Vec<f64> = (0..k).map(|j| idx.iter().map(|&r| rows[r][j]).sum()).collect();
        let chi2 = 12.0 / (n * k * (k + 1)) as f64 * sums.iter().map(|s| s * s).sum::<f64>() - 3.0 * (n * (k + 1)) as f64;
        hits += (chi2 >= observed - 1e-9) as u64;
        total += 1;
        let mut pos = 0;
        while pos < n {
            idx[pos] += 1;
            if idx[pos] < rows.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    hits as f64 / total as f64
}

#[test]
fn friedman_matches_exact_permutation_distribution() {
    let table = vec![
        vec![1.2, 2.5, 3.1],
        vec![0.4, 0.9, 1.7],
        vec![2.0, 4.4, 3.3],
        vec![0.7, 1.1, 1.5],
    ];
    let f = friedman(&table).unwrap();
    // rank sums 4, 9, 11
    assert!((f.chi2 - 6.5).abs() < 1e-12);
    assert_eq!(f.tie_correction, 1.0);
    assert!((f.p - (-3.25f64).exp()).abs() < 1e-12);
    let exact = friedman_exact_p(3, 4, f.chi2);
    assert!((exact - 0.042).abs() < 1e-3, "exact p {exact}");
    assert!((friedman_exact_p(3, 4, 0.0) - 1.0).abs() < 1e-12);
}

#[test]
fn friedman_tie_correction_matches_rank_variance_form() {
    let table = vec![
        vec![1.0, 1.0, 3.0, 4.0],
        vec![2.0, 1.0, 1.0, 5.0],
        vec![0.5, 2.0, 2.0, 2.0],
        vec![1.0, 3.0, 2.0, 4.0],
        vec![1.0, 1.0, 1.0, 2.0],
    ];
    let f = friedman(&table).unwrap();
    let rm = RankMatrix::from_outcomes(&table).unwrap();
    let (n, k) = (5.0, 4.0);
    let sums: Vec<f64> = (0..4).map(|j| (0..5).map(|i| rm.row(i)[j]).sum()).collect();
    let a: f64 = rm.ranks.iter().map(|r| r * r).sum();
    let oracle = (k - 1.0) * sums.iter().map(|s| (s - n * (k + 1.0) / 2.0).powi(2)).sum::<f64>()
        / (a - n * k * (k + 1.0).powi(2) / 4.0);
    assert!((f.chi2 - oracle).abs() < 1e-10, "{} vs {oracle}", f.chi2);
    for i in 0..5 {
        assert!((rm.row(i).iter().sum::<f64>() - 10.0).abs() < 1e-12);
    }
}

#[test]
fn friedman_full_ties() {
    let f = friedman(&vec![vec![2.0; 4]; 6]).unwrap();
    assert_eq!((f.chi2, f.p), (0.0, 1.0));
    assert!(friedman(&[vec![1.0, 2.0]]).is_err());
    assert!(friedman(&[vec![1.0, 2.0], vec![1.0]]).is_err());
}

#[test]
fn nemenyi_critical_difference() {
    let cd = critical_difference(2.728, 5, 340);
    assert!((cd - 2.728 * (30.0f64 / 2_040.0).sqrt()).abs() < 1e-15);
    // the commonly quoted 0.3312 is a rounding of the same product
    assert!((cd - 0.3312).abs() < 5e-4);
    assert_eq!(nemenyi_q(5, 0.05).unwrap(), 2.728);
    assert!(matches!(nemenyi_q(11, 0.05), Err(Error::Unsupported(_))));
    assert!(nemenyi_q(5, 0.1).is_err());
    let quarter = critical_difference(2.728, 5, 4 * 340);
    assert!((quarter - cd / 2.0).abs() < 1e-15);
}

#[test]
fn nemenyi_separates_only_distinct_columns() {
    // models 0 and 1 always tie for best, model 2 is always worst
    let table: Vec<Vec<f64>> = (0..30).map(|i| vec![1.0, 1.0, 5.0 + i as f64]).collect();
    let f = friedman(&table).unwrap();
    let nm = nemenyi(&f, 0.05).unwrap();
    assert!(nm.warning.is_none());
    assert!(!nm.significant[0][1]);
    assert!(nm.significant[0][2] && nm.significant[2][1]);
    let flat = friedman(&vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert!(nemenyi(&flat, 0.05).unwrap().warning.is_some());
}

#[test]
fn report_exports_one_line_per_test() {
    let r = StatReport::new(&sample(&[1.0, 2.0, 3.0, 4.0, 5.0]), 3).unwrap();
    assert!(r.ci.lo <= r.ci.hi);
    let text = r.to_text("pstnet_vs_dryden");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("pstnet_vs_dryden\tpaired_t\t4.242641"));
    assert!(lines[1].contains("wilcoxon_exact"));
    assert!(lines.iter().all(|l| l.split('\t').count() == 7));
}
