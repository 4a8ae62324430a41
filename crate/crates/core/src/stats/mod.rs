//! Paired-comparison statistics: t-test, Wilcoxon signed-rank, Cohen's d,
//! percentile bootstrap, Friedman and Nemenyi.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::datagen::mix_seed;
use crate::error::{Error, Result};

/// Per-block differences between two estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    differences: Vec<f64>,
}

impl PairedSample {
    pub fn new(differences: Vec<f64>) -> Result<Self> {
        if differences.is_empty() {
            return Err(Error::domain("paired sample is empty"));
        }
        if differences.iter().any(|d| !d.is_finite()) {
            return Err(Error::domain("paired sample contains non-finite values"));
        }
        Ok(Self { differences })
    }

    /// `a[i] - b[i]`.
    pub fn from_pairs(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::domain("paired outcomes differ in length"));
        }
        Self::new(a.iter().zip(b).map(|(x, y)| x - y).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.differences
    }

    pub fn len(&self) -> usize {
        self.differences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.differences.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.differences)
    }

    /// Sample standard deviation, n − 1 denominator.
    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let n = self.len() as f64;
        (self.differences.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degenerate {
    /// No variation and no effect: p = 1.
    ZeroVarianceNullMean,
    /// No variation around a nonzero mean: p is the limit 0.
    ZeroVarianceNonzeroMean,
    /// Every difference is zero after tie removal.
    AllZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
    pub degenerate: Option<Degenerate>,
}

/// Two-sided Student t tail probability `P(|T| ≥ |t|)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

pub fn t_cdf(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom").cdf(t)
}

pub fn chi2_sf(x: f64, df: f64) -> f64 {
    ChiSquared::new(df).expect("positive degrees of freedom").sf(x)
}

pub fn chi2_cdf(x: f64, df: f64) -> f64 {
    ChiSquared::new(df).expect("positive degrees of freedom").cdf(x)
}

fn normal_sf(z: f64) -> f64 {
    Normal::standard().sf(z)
}

pub fn paired_t(s: &PairedSample) -> Result<TTest> {
    let n = s.len();
    if n < 2 {
        return Err(Error::domain("paired t-test needs at least two differences"));
    }
    let df = (n - 1) as f64;
    let (m, sd) = (s.mean(), s.sd());
    if sd == 0.0 {
        return Ok(if m == 0.0 {
            TTest { t: 0.0, df, p: 1.0, degenerate: Some(Degenerate::ZeroVarianceNullMean) }
        } else {
            TTest { t: m.signum() * f64::INFINITY, df, p: 0.0, degenerate: Some(Degenerate::ZeroVarianceNonzeroMean) }
        });
    }
    let t = m / (sd / (n as f64).sqrt());
    Ok(TTest { t, df, p: t_two_sided_p(t, df), degenerate: None })
}

/// Ascending mid-ranks (1-based) and the sizes of tied groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Largest sample for which the signed-rank distribution is enumerated.
pub const WILCOXON_EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    pub w_minus: f64,
    /// Non-zero differences used.
    pub n_used: usize,
    /// Two-sided.
    pub p: f64,
    /// One-sided `P(W+ ≥ w_plus)` under the null.
    pub p_greater: f64,
    pub exact: bool,
    pub degenerate: Option<Degenerate>,
}

fn signed_ranks(s: &PairedSample) -> (Vec<f64>, Vec<bool>, Vec<usize>) {
    let nz: Vec<f64> = s.values().iter().copied().filter(|&d| d != 0.0).collect();
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    (ranks, nz.iter().map(|&d| d > 0.0).collect(), ties)
}

fn degenerate_wilcoxon(exact: bool) -> Wilcoxon {
    Wilcoxon {
        w_plus: 0.0,
        w_minus: 0.0,
        n_used: 0,
        p: 1.0,
        p_greater: 1.0,
        exact,
        degenerate: Some(Degenerate::AllZero),
    }
}

/// Signed-rank test. Zeros are dropped and tied magnitudes mid-ranked;
/// the null distribution is enumerated over all sign vectors for up to
/// [`WILCOXON_EXACT_MAX_N`] differences, otherwise approximated.
pub fn wilcoxon_signed_rank(s: &PairedSample) -> Wilcoxon {
    let (ranks, _, _) = signed_ranks(s);
    if ranks.len() <= WILCOXON_EXACT_MAX_N {
        wilcoxon_exact(s)
    } else {
        wilcoxon_approx(s)
    }
}

/// Exact branch. Ranks are doubled so mid-ranks compare as integers.
pub fn wilcoxon_exact(s: &PairedSample) -> Wilcoxon {
    let (ranks, positive, _) = signed_ranks(s);
    let n = ranks.len();
    if n == 0 {
        return degenerate_wilcoxon(true);
    }
    assert!(n <= 20, "exact enumeration limited to 20 differences");
    let twice: Vec<u64> = ranks.iter().map(|r| (2.0 * r) as u64).collect();
    let observed: u64 = twice.iter().zip(&positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| twice[i]).sum();
        le += (w <= observed) as u64;
        ge += (w >= observed) as u64;
    }
    let total = (1u64 << n) as f64;
    let w_plus = observed as f64 / 2.0;
    Wilcoxon {
        w_plus,
        w_minus: ranks.iter().sum::<f64>() - w_plus,
        n_used: n,
        p: (2.0 * (le.min(ge) as f64) / total).min(1.0),
        p_greater: ge as f64 / total,
        exact: true,
        degenerate: None,
    }
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction towards the mean.
pub fn wilcoxon_approx(s: &PairedSample) -> Wilcoxon {
    let (ranks, positive, ties) = signed_ranks(s);
    let n = ranks.len();
    if n == 0 {
        return degenerate_wilcoxon(false);
    }
    let nf = n as f64;
    let w_plus: f64 = ranks.iter().zip(&positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let mu = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let (p, p_greater) = if var <= 0.0 {
        (1.0, 1.0)
    } else {
        let sd = var.sqrt();
        let dev = w_plus - mu;
        let z_two = (dev.abs() - 0.5).max(0.0) / sd;
        let z_greater = (dev - 0.5) / sd;
        ((2.0 * normal_sf(z_two)).min(1.0), normal_sf(z_greater))
    };
    Wilcoxon {
        w_plus,
        w_minus: ranks.iter().sum::<f64>() - w_plus,
        n_used: n,
        p,
        p_greater,
        exact: false,
        degenerate: None,
    }
}

/// Paired effect size `mean / sd` of the differences (d_z). Zero when every
/// difference is zero; a domain error when the differences are constant
/// and nonzero.
pub fn cohens_d(s: &PairedSample) -> Result<f64> {
    if s.len() < 2 {
        return Err(Error::domain("Cohen's d needs at least two differences"));
    }
    let (m, sd) = (s.mean(), s.sd());
    if sd == 0.0 {
        return if m == 0.0 { Ok(0.0) } else { Err(Error::domain("zero variance: effect size undefined")) };
    }
    Ok(m / sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub resamples: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + (sorted[i + 1] - sorted[i]) * f
    } else {
        sorted[i]
    }
}

/// Percentile bootstrap. Resample `b` draws from its own generator seeded
/// by `(seed, b)`, so the result does not depend on thread scheduling.
pub fn bootstrap_ci(
    values: &[f64],
    statistic: impl Fn(&[f64]) -> f64 + Sync,
    level: f64,
    resamples: usize,
    seed: u64,
) -> Result<ConfidenceInterval> {
    if values.len() < 2 {
        return Err(Error::domain("bootstrap needs at least two values"));
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(Error::domain("bootstrap level must lie in (0, 1) with at least one resample"));
    }
    let n = values.len();
    let mut stats: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, b| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, b));
                for x in buf.iter_mut() {
                    *x = values[rng.random_range(0..n)];
                }
                statistic(buf)
            },
        )
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(ConfidenceInterval {
        lo: quantile_sorted(&stats, tail),
        hi: quantile_sorted(&stats, 1.0 - tail),
        level,
        resamples,
    })
}

/// Within-block ranks, ascending (smallest outcome gets rank 1), ties
/// mid-ranked. Row-major `n × k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    pub n: usize,
    pub k: usize,
    pub ranks: Vec<f64>,
    /// Σ over blocks and tie groups of t³ − t.
    pub tie_sum: f64,
}

impl RankMatrix {
    pub fn from_outcomes(outcomes: &[Vec<f64>]) -> Result<Self> {
        let n = outcomes.len();
        let k = outcomes.first().map_or(0, Vec::len);
        if n < 2 || k < 2 {
            return Err(Error::domain("rank analysis needs at least two blocks and two models"));
        }
        let mut ranks = Vec::with_capacity(n * k);
        let mut tie_sum = 0.0;
        for row in outcomes {
            if row.len() != k || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("every block needs k finite outcomes"));
            }
            let (r, ties) = midranks(row);
            ranks.extend(r);
            tie_sum += ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
        }
        Ok(Self { n, k, ranks, tie_sum })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.ranks[i * self.k..(i + 1) * self.k]
    }

    pub fn mean_ranks(&self) -> Vec<f64> {
        (0..self.k).map(|j| (0..self.n).map(|i| self.ranks[i * self.k + j]).sum::<f64>() / self.n as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Friedman {
    pub chi2: f64,
    pub df: f64,
    pub p: f64,
    pub n: usize,
    pub k: usize,
    pub mean_ranks: Vec<f64>,
    /// Divisor applied for ties; 1 without ties.
    pub tie_correction: f64,
}

/// Friedman test on an `n × k` table of outcomes (blocks × models).
pub fn friedman(outcomes: &[Vec<f64>]) -> Result<Friedman> {
    let rm = RankMatrix::from_outcomes(outcomes)?;
    Ok(friedman_ranks(&rm))
}

pub fn friedman_ranks(rm: &RankMatrix) -> Friedman {
    let (n, k) = (rm.n as f64, rm.k as f64);
    let mean_ranks = rm.mean_ranks();
    let centre = (k + 1.0) / 2.0;
    let raw = 12.0 * n / (k * (k + 1.0)) * mean_ranks.iter().map(|r| (r - centre).powi(2)).sum::<f64>();
    let tie_correction = 1.0 - rm.tie_sum / (n * (k * k * k - k));
    let df = k - 1.0;
    let (chi2, p) = if tie_correction <= 1e-12 {
        (0.0, 1.0)
    } else {
        let c = raw / tie_correction;
        (c, chi2_sf(c, df))
    };
    Friedman { chi2, df, p, n: rm.n, k: rm.k, mean_ranks, tie_correction }
}

const NEMENYI_TABLE: &str = include_str!("../../data/nemenyi_q.txt");

/// `(k, q_0.05, q_0.01)` rows of the shipped critical-value table.
pub fn nemenyi_table() -> &'static [(usize, f64, f64)] {
    static TABLE: OnceLock<Vec<(usize, f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        NEMENYI_TABLE
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                (f[0].parse().expect("k"), f[1].parse().expect("q05"), f[2].parse().expect("q01"))
            })
            .collect()
    })
}

pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    let row = nemenyi_table()
        .iter()
        .find(|r| r.0 == k)
        .ok_or_else(|| Error::Unsupported(format!("Nemenyi critical values only cover 2 <= k <= 10, got {k}")))?;
    if alpha == 0.05 {
        Ok(row.1)
    } else if alpha == 0.01 {
        Ok(row.2)
    } else {
        Err(Error::Unsupported(format!("Nemenyi alpha must be 0.05 or 0.01, got {alpha}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nemenyi {
    pub alpha: f64,
    pub q: f64,
    pub critical_difference: f64,
    /// `significant[i][j]`: mean ranks of i and j differ by more than CD.
    pub significant: Vec<Vec<bool>>,
    /// Set when the omnibus test did not reject at `alpha`.
    pub warning: Option<String>,
}

pub fn critical_difference(q: f64, k: usize, n: usize) -> f64 {
    q * (k as f64 * (k as f64 + 1.0) / (6.0 * n as f64)).sqrt()
}

pub fn nemenyi(f: &Friedman, alpha: f64) -> Result<Nemenyi> {
    let q = nemenyi_q(f.k, alpha)?;
    let cd = critical_difference(q, f.k, f.n);
    let r = &f.mean_ranks;
    let significant = (0..f.k).map(|i| (0..f.k).map(|j| (r[i] - r[j]).abs() > cd).collect()).collect();
    let warning = (f.p >= alpha)
        .then(|| format!("Friedman test not significant at alpha = {alpha} (p = {:.4}); post-hoc results are unreliable", f.p));
    Ok(Nemenyi { alpha, q, critical_difference: cd, significant, warning })
}

pub const BOOTSTRAP_RESAMPLES: usize = 5_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub n: usize,
    pub mean: f64,
    pub t: TTest,
    pub wilcoxon: Wilcoxon,
    /// None when undefined (constant nonzero differences).
    pub cohens_d: Option<f64>,
    /// Bootstrap interval for the mean difference.
    pub ci: ConfidenceInterval,
}

impl StatReport {
    pub fn new(s: &PairedSample, seed: u64) -> Result<Self> {
        Ok(Self {
            n: s.len(),
            mean: s.mean(),
            t: paired_t(s)?,
            wilcoxon: wilcoxon_signed_rank(s),
            cohens_d: cohens_d(s).ok(),
            ci: bootstrap_ci(s.values(), mean, 0.95, BOOTSTRAP_RESAMPLES, seed)?,
        })
    }

    /// `test  statistic  p  ci_lo  ci_hi  n` lines, tab separated.
    pub fn to_text(&self, label: &str) -> String {
        let mut out = String::new();
        let (lo, hi) = (self.ci.lo, self.ci.hi);
        let n = self.n;
        let _ = writeln!(out, "{label}\tpaired_t\t{:.6}\t{:.6e}\t{lo:.6}\t{hi:.6}\t{n}", self.t.t, self.t.p);
        let kind = if self.wilcoxon.exact { "wilcoxon_exact" } else { "wilcoxon_normal" };
        let _ = writeln!(out, "{label}\t{kind}\t{:.1}\t{:.6e}\t{lo:.6}\t{hi:.6}\t{n}", self.wilcoxon.w_plus, self.wilcoxon.p);
        let d = self.cohens_d.map_or("nan".to_string(), |d| format!("{d:.6}"));
        let _ = writeln!(out, "{label}\tcohens_d\t{d}\t\t{lo:.6}\t{hi:.6}\t{n}");
        out
    }
}

/// Conventional magnitude label for |d|.
pub fn effect_label(d: f64) -> &'static str {
    match d.abs() {
        x if x < 0.2 => "negligible",
        x if x < 0.5 => "small",
        x if x < 0.8 => "medium",
        _ => "large",
    }
}

#[cfg(test)]
mod tests;
