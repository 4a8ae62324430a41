//! The learnable estimator: regime gate, four experts, a shared FiLM
//! hyper-network on density ratio, and the Kolmogorov-constrained head.
//!
//! All learnable scalars live in one flat `Vec<f64>` whose order is fixed by
//! [`Layout`]. That order is also the on-disk order.
//!
//! ```text
//! gate.w_h [H_g x 7]   gate.b_h [H_g]   gate.w_g [4 x H_g]   gate.b_g [4]
//! expert[j].w1 [H_e x 7]  .b1 [H_e]  .w2 [d x H_e]  .b2 [d]     (j = 0..4)
//! film.w1 [H_f x 1]  film.b1 [H_f]  film.w2 [2d x H_f]  film.b2 [2d]
//! head.w [d]  head.b [1]
//! ```

mod backward;
mod io;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::atmos::{
    standardize_unchecked, AtmosphericState, NormStats, RegimeTarget, FEATURE_COUNT, REGIME_COUNT,
};
use crate::error::{Error, Result};
use crate::mophys::{self, DissipationEstimate, PhysicsConstants};

pub use backward::{GradientSet, LossBreakdown, PreparedSample, TrainSample, Workspace};
pub use io::{FORMAT_VERSION, MAGIC};

pub const EXPERTS: usize = REGIME_COUNT;

const GELU_C: f64 = 0.797_884_560_8;
const GELU_A: f64 = 0.044_715;

#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

/// GELU value and derivative sharing one tanh evaluation.
#[inline]
pub fn gelu_with_grad(x: f64) -> (f64, f64) {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    (
        0.5 * x * (1.0 + t),
        0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x),
    )
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub gate_hidden: usize,
    pub expert_hidden: usize,
    pub d: usize,
    pub film_hidden: usize,
}

impl Dims {
    /// Reference configuration: 543 learnable scalars.
    pub const REFERENCE: Dims = Dims { gate_hidden: 16, expert_hidden: 6, d: 4, film_hidden: 3 };
}

impl Default for Dims {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub dims: Dims,
    pub gate_wh: Range<usize>,
    pub gate_bh: Range<usize>,
    pub gate_wg: Range<usize>,
    pub gate_bg: Range<usize>,
    pub expert_w1: [Range<usize>; EXPERTS],
    pub expert_b1: [Range<usize>; EXPERTS],
    pub expert_w2: [Range<usize>; EXPERTS],
    pub expert_b2: [Range<usize>; EXPERTS],
    pub film_w1: Range<usize>,
    pub film_b1: Range<usize>,
    pub film_w2: Range<usize>,
    pub film_b2: Range<usize>,
    pub head_w: Range<usize>,
    pub head_b: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(dims: Dims) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let Dims { gate_hidden: hg, expert_hidden: he, d, film_hidden: hf } = dims;
        let gate_wh = take(hg * FEATURE_COUNT);
        let gate_bh = take(hg);
        let gate_wg = take(EXPERTS * hg);
        let gate_bg = take(EXPERTS);
        let mut w1 = Vec::new();
        let mut b1 = Vec::new();
        let mut w2 = Vec::new();
        let mut b2 = Vec::new();
        for _ in 0..EXPERTS {
            w1.push(take(he * FEATURE_COUNT));
            b1.push(take(he));
            w2.push(take(d * he));
            b2.push(take(d));
        }
        let film_w1 = take(hf);
        let film_b1 = take(hf);
        let film_w2 = take(2 * d * hf);
        let film_b2 = take(2 * d);
        let head_w = take(d);
        let head_b = take(1);
        let arr = |v: Vec<Range<usize>>| -> [Range<usize>; EXPERTS] { v.try_into().expect("four experts") };
        Layout {
            dims,
            gate_wh,
            gate_bh,
            gate_wg,
            gate_bg,
            expert_w1: arr(w1),
            expert_b1: arr(b1),
            expert_w2: arr(w2),
            expert_b2: arr(b2),
            film_w1,
            film_b1,
            film_w2,
            film_b2,
            head_w,
            head_b,
            total: at,
        }
    }

    pub fn gate(&self) -> Range<usize> {
        self.gate_wh.start..self.gate_bg.end
    }

    pub fn expert(&self, j: usize) -> Range<usize> {
        self.expert_w1[j].start..self.expert_b2[j].end
    }

    pub fn film(&self) -> Range<usize> {
        self.film_w1.start..self.film_b2.end
    }

    pub fn head(&self) -> Range<usize> {
        self.head_w.start..self.head_b.end
    }
}

/// Standardization of the TKE target, used by the training losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub mean: f64,
    pub scale: f64,
}

impl Default for TargetStats {
    fn default() -> Self {
        Self { mean: 0.0, scale: 1.0 }
    }
}

/// Everything produced by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardDiagnostics {
    pub alpha: [f64; EXPERTS],
    pub per_expert_z: Vec<Vec<f64>>,
    pub z_bar: Vec<f64>,
    pub s: f64,
    pub k_mo: f64,
    pub epsilon: DissipationEstimate,
    pub k_out: f64,
}

/// Learnable parameters plus the fixed statistics and physics constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PstnetModel {
    layout: Layout,
    params: Vec<f64>,
    pub norm: NormStats,
    pub target: TargetStats,
    pub constants: PhysicsConstants,
}

/// Parameter count breakdown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamAudit {
    pub total: usize,
    pub gate: usize,
    pub experts: usize,
    pub film: usize,
    pub head: usize,
    /// Data-derived normalisation scalars, not counted in `total`.
    pub norm_stats: usize,
    pub serialized_bytes: usize,
}

/// Scratch buffers for one forward pass; reused across samples.
#[derive(Debug, Clone)]
pub(crate) struct Cache {
    pub x: [f64; FEATURE_COUNT],
    pub gate_h: Vec<f64>,
    pub logits: [f64; EXPERTS],
    pub alpha: [f64; EXPERTS],
    pub expert_pre: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub film_pre: Vec<f64>,
    pub film_h: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub z_bar: Vec<f64>,
    pub s: f64,
    pub k: f64,
}

impl Cache {
    pub fn new(dims: Dims) -> Self {
        Self {
            x: [0.0; FEATURE_COUNT],
            gate_h: vec![0.0; dims.gate_hidden],
            logits: [0.0; EXPERTS],
            alpha: [0.0; EXPERTS],
            expert_pre: vec![vec![0.0; dims.expert_hidden]; EXPERTS],
            z: vec![vec![0.0; dims.d]; EXPERTS],
            film_pre: vec![0.0; dims.film_hidden],
            film_h: vec![0.0; dims.film_hidden],
            gamma: vec![0.0; dims.d],
            beta: vec![0.0; dims.d],
            z_bar: vec![0.0; dims.d],
            s: 0.0,
            k: 0.0,
        }
    }
}

#[inline]
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
        *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub(crate) fn softmax(logits: &[f64; EXPERTS]) -> [f64; EXPERTS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|l| (l - max).exp());
    let sum: f64 = e.iter().sum();
    e.map(|v| v / sum)
}

impl PstnetModel {
    /// Model with every learnable scalar set to zero (FiLM at identity
    /// because of the +1 offset on γ).
    pub fn zeros(dims: Dims) -> Self {
        let layout = Layout::new(dims);
        Self {
            params: vec![0.0; layout.total],
            layout,
            norm: NormStats::default(),
            target: TargetStats::default(),
            constants: PhysicsConstants::default(),
        }
    }

    /// Kaiming-uniform weights (bound √(6/fan_in)), zero biases, and a
    /// zero FiLM output layer so training starts at γ = 1, β = 0.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let mut m = Self::zeros(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = m.layout.clone();
        let mut fill = |p: &mut [f64], fan_in: usize| {
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in p {
                *v = rng.random_range(-bound..bound);
            }
        };
        fill(&mut m.params[l.gate_wh.clone()], FEATURE_COUNT);
        fill(&mut m.params[l.gate_wg.clone()], dims.gate_hidden);
        for j in 0..EXPERTS {
            fill(&mut m.params[l.expert_w1[j].clone()], FEATURE_COUNT);
            fill(&mut m.params[l.expert_w2[j].clone()], dims.expert_hidden);
        }
        fill(&mut m.params[l.film_w1.clone()], 1);
        fill(&mut m.params[l.head_w.clone()], dims.d);
        m
    }

    pub fn from_parts(
        dims: Dims,
        params: Vec<f64>,
        norm: NormStats,
        target: TargetStats,
        constants: PhysicsConstants,
    ) -> Result<Self> {
        let layout = Layout::new(dims);
        if params.len() != layout.total {
            return Err(Error::domain(format!(
                "parameter vector has {} entries, layout needs {}",
                params.len(),
                layout.total
            )));
        }
        Ok(Self { layout, params, norm, target, constants })
    }

    pub fn dims(&self) -> Dims {
        self.layout.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Rounds every parameter to single precision, the storage precision of
    /// the model file. A quantized model round-trips through save/load
    /// bit-exactly.
    pub fn quantize(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }

    pub fn is_quantized(&self) -> bool {
        self.params.iter().all(|&p| p == p as f32 as f64)
    }

    pub fn param_audit(&self) -> ParamAudit {
        let l = &self.layout;
        let experts = (0..EXPERTS).map(|j| l.expert(j).len()).sum();
        ParamAudit {
            total: l.total,
            gate: l.gate().len(),
            experts,
            film: l.film().len(),
            head: l.head().len(),
            norm_stats: 2 * FEATURE_COUNT + 2,
            serialized_bytes: io::serialized_len(l.total),
        }
    }

    /// Regime gate α = softmax(W_g σ(W_h x + b_h) + b_g).
    pub fn gate_forward(&self, x: &[f64; FEATURE_COUNT]) -> [f64; EXPERTS] {
        let mut c = Cache::new(self.dims());
        c.x = *x;
        self.gate_into(&mut c);
        c.alpha
    }

    pub(crate) fn gate_into(&self, c: &mut Cache) {
        let (p, l) = (&self.params, &self.layout);
        affine(&p[l.gate_wh.clone()], &p[l.gate_bh.clone()], &c.x, &mut c.gate_h);
        for h in &mut c.gate_h {
            *h = mophys::sigmoid(*h);
        }
        affine(&p[l.gate_wg.clone()], &p[l.gate_bg.clone()], &c.gate_h, &mut c.logits);
        c.alpha = softmax(&c.logits);
    }

    /// Expert `j`: W2 GELU(W1 x + b1) + b2.
    pub fn expert_forward(&self, j: usize, x: &[f64; FEATURE_COUNT]) -> Result<Vec<f64>> {
        if j >= EXPERTS {
            return Err(Error::domain(format!("expert index {j} out of range 0..4")));
        }
        let mut c = Cache::new(self.dims());
        c.x = *x;
        self.expert_into(j, &mut c);
        Ok(c.z[j].clone())
    }

    fn expert_into(&self, j: usize, c: &mut Cache) {
        let (p, l) = (&self.params, &self.layout);
        let Cache { x, expert_pre, z, .. } = c;
        affine(&p[l.expert_w1[j].clone()], &p[l.expert_b1[j].clone()], x, &mut expert_pre[j]);
        let h: smallvec_like::Buf = expert_pre[j].iter().map(|&v| gelu(v)).collect();
        affine(&p[l.expert_w2[j].clone()], &p[l.expert_b2[j].clone()], &h, &mut z[j]);
    }

    /// FiLM parameters (γ, β) for a density ratio from the shared hyper-network.
    pub fn film_params(&self, density_ratio: f64) -> (Vec<f64>, Vec<f64>) {
        let mut c = Cache::new(self.dims());
        self.film_into(density_ratio, &mut c);
        (c.gamma, c.beta)
    }

    fn film_into(&self, density_ratio: f64, c: &mut Cache) {
        let (p, l) = (&self.params, &self.layout);
        let d = self.dims().d;
        affine(&p[l.film_w1.clone()], &p[l.film_b1.clone()], &[density_ratio], &mut c.film_pre);
        for (h, &pre) in c.film_h.iter_mut().zip(&c.film_pre) {
            *h = pre.tanh();
        }
        let mut out = vec![0.0; 2 * d];
        affine(&p[l.film_w2.clone()], &p[l.film_b2.clone()], &c.film_h, &mut out);
        for i in 0..d {
            c.gamma[i] = 1.0 + out[i];
            c.beta[i] = out[d + i];
        }
    }

    /// z̃ = γ ⊙ z + β with (γ, β) from the hyper-network.
    pub fn film_condition(&self, z: &[f64], density_ratio: f64) -> Result<Vec<f64>> {
        if density_ratio <= 0.0 || !density_ratio.is_finite() {
            return Err(Error::domain("density ratio must be positive"));
        }
        if z.len() != self.dims().d {
            return Err(Error::domain("FiLM input has the wrong width"));
        }
        let (gamma, beta) = self.film_params(density_ratio);
        Ok(z.iter().zip(gamma.iter().zip(&beta)).map(|(z, (g, b))| g * z + b).collect())
    }

    /// Network part of the forward pass for a standardized input; fills the
    /// cache up to and including the head logit `s`.
    pub(crate) fn network_into(&self, density_ratio: f64, c: &mut Cache) {
        self.gate_into(c);
        for j in 0..EXPERTS {
            self.expert_into(j, c);
        }
        self.film_into(density_ratio, c);
        let d = self.dims().d;
        for i in 0..d {
            let mix: f64 = (0..EXPERTS).map(|j| c.alpha[j] * c.z[j][i]).sum();
            // Σ α_j (γ z_j + β) = γ Σ α_j z_j + β since α is on the simplex.
            c.z_bar[i] = c.gamma[i] * mix + c.beta[i];
        }
        let (p, l) = (&self.params, &self.layout);
        c.s = p[l.head_b.start] + p[l.head_w.clone()].iter().zip(&c.z_bar).map(|(w, z)| w * z).sum::<f64>();
    }

    /// Full pipeline: features, gate, experts, FiLM, aggregation, head and
    /// the Kolmogorov output layer on top of the MO backbone.
    pub fn forward(&self, state: &AtmosphericState) -> Result<(f64, ForwardDiagnostics)> {
        state.validate()?;
        let mut c = Cache::new(self.dims());
        c.x = standardize_unchecked(&state.as_array(), &self.norm).0;
        self.network_into(state.density_ratio, &mut c);
        let bb = mophys::backbone(state);
        let k = mophys::kolmogorov_output(bb.k_mo, c.s, bb.epsilon, state.density_ratio);
        let per_expert_z = (0..EXPERTS)
            .map(|j| c.z[j].iter().zip(c.gamma.iter().zip(&c.beta)).map(|(z, (g, b))| g * z + b).collect())
            .collect();
        Ok((
            k,
            ForwardDiagnostics {
                alpha: c.alpha,
                per_expert_z,
                z_bar: c.z_bar,
                s: c.s,
                k_mo: bb.k_mo,
                epsilon: bb.epsilon,
                k_out: k,
            },
        ))
    }

    /// TKE estimate without diagnostics. Skips state validation.
    pub fn predict(&self, state: &AtmosphericState) -> f64 {
        let mut c = Cache::new(self.dims());
        self.predict_with(state, &mut c)
    }

    pub(crate) fn predict_with(&self, state: &AtmosphericState, c: &mut Cache) -> f64 {
        c.x = standardize_unchecked(&state.as_array(), &self.norm).0;
        self.network_into(state.density_ratio, c);
        let bb = mophys::backbone(state);
        mophys::kolmogorov_output(bb.k_mo, c.s, bb.epsilon, state.density_ratio)
    }

    /// Single-precision inference path for the network; the physics
    /// backbone stays in double precision.
    pub fn predict_f32(&self, state: &AtmosphericState) -> f64 {
        let s = f32_path::head_logit(self, state);
        let bb = mophys::backbone(state);
        mophys::kolmogorov_output(bb.k_mo, s as f64, bb.epsilon, state.density_ratio)
    }

    /// Gate weights for a raw state.
    pub fn gate_for_state(&self, state: &AtmosphericState) -> [f64; EXPERTS] {
        self.gate_forward(&standardize_unchecked(&state.as_array(), &self.norm).0)
    }

    pub fn standardize_target(&self, k: f64) -> f64 {
        (k - self.target.mean) / self.target.scale
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        io::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        io::load(path)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        io::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        io::decode(bytes)
    }

    /// CRC-32 of the serialized model, used to identify a model file.
    pub fn checksum(&self) -> u32 {
        let bytes = io::encode(self);
        u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"))
    }

    /// Gradient of the full training objective for a batch.
    pub fn backward(&self, batch: &[TrainSample], lambda_gate: f64, lambda_balance: f64) -> Result<(GradientSet, LossBreakdown)> {
        let prepared: Vec<PreparedSample> = batch.iter().map(|s| PreparedSample::new(self, s)).collect::<Result<_>>()?;
        let refs: Vec<&PreparedSample> = prepared.iter().collect();
        self.backward_prepared(&refs, lambda_gate, lambda_balance)
    }

    /// Loss components without gradients.
    pub fn loss(&self, batch: &[TrainSample], lambda_gate: f64, lambda_balance: f64) -> Result<LossBreakdown> {
        let prepared: Vec<PreparedSample> = batch.iter().map(|s| PreparedSample::new(self, s)).collect::<Result<_>>()?;
        let refs: Vec<&PreparedSample> = prepared.iter().collect();
        self.loss_prepared(&refs, lambda_gate, lambda_balance)
    }
}

/// Fixed-capacity buffer for hidden activations; avoids heap traffic in
/// the per-sample hot loop.
mod smallvec_like {
    pub const CAP: usize = 64;

    pub struct Buf {
        data: [f64; CAP],
        len: usize,
    }

    impl FromIterator<f64> for Buf {
        fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
            let mut b = Buf { data: [0.0; CAP], len: 0 };
            for v in iter {
                assert!(b.len < CAP, "hidden layer wider than {CAP}");
                b.data[b.len] = v;
                b.len += 1;
            }
            b
        }
    }

    impl std::ops::Deref for Buf {
        type Target = [f64];
        fn deref(&self) -> &[f64] {
            &self.data[..self.len]
        }
    }
}

mod f32_path {
    use super::*;

    fn affine32(w: &[f64], b: &[f64], x: &[f32], out: &mut [f32]) {
        let n = x.len();
        for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n).zip(b)) {
            *o = *bias as f32 + row.iter().zip(x).map(|(a, b)| *a as f32 * b).sum::<f32>();
        }
    }

    fn gelu32(x: f32) -> f32 {
        0.5 * x * (1.0 + (GELU_C as f32 * (x + GELU_A as f32 * x * x * x)).tanh())
    }

    pub fn head_logit(m: &PstnetModel, state: &AtmosphericState) -> f32 {
        let (p, l, dims) = (&m.params, &m.layout, m.dims());
        let raw = state.as_array();
        let x: Vec<f32> = (0..FEATURE_COUNT).map(|i| ((raw[i] - m.norm.mean[i]) / m.norm.scale[i]) as f32).collect();
        let mut h = vec![0f32; dims.gate_hidden];
        affine32(&p[l.gate_wh.clone()], &p[l.gate_bh.clone()], &x, &mut h);
        for v in &mut h {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        let mut logits = [0f32; EXPERTS];
        affine32(&p[l.gate_wg.clone()], &p[l.gate_bg.clone()], &h, &mut logits);
        let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let e = logits.map(|v| (v - max).exp());
        let sum: f32 = e.iter().sum();
        let alpha = e.map(|v| v / sum);

        let d = dims.d;
        let mut mix = vec![0f32; d];
        let mut pre = vec![0f32; dims.expert_hidden];
        let mut z = vec![0f32; d];
        for j in 0..EXPERTS {
            affine32(&p[l.expert_w1[j].clone()], &p[l.expert_b1[j].clone()], &x, &mut pre);
            let hid: Vec<f32> = pre.iter().map(|&v| gelu32(v)).collect();
            affine32(&p[l.expert_w2[j].clone()], &p[l.expert_b2[j].clone()], &hid, &mut z);
            for i in 0..d {
                mix[i] += alpha[j] * z[i];
            }
        }
        let mut fh = vec![0f32; dims.film_hidden];
        affine32(&p[l.film_w1.clone()], &p[l.film_b1.clone()], &[state.density_ratio as f32], &mut fh);
        for v in &mut fh {
            *v = v.tanh();
        }
        let mut film = vec![0f32; 2 * d];
        affine32(&p[l.film_w2.clone()], &p[l.film_b2.clone()], &fh, &mut film);
        let mut s = p[l.head_b.start] as f32;
        for i in 0..d {
            let zb = (1.0 + film[i]) * mix[i] + film[d + i];
            s += p[l.head_w.start + i] as f32 * zb;
        }
        s
    }
}

/// Anything that maps an atmospheric state to a TKE estimate (m²/s²).
pub trait TurbulenceEstimator: Send + Sync {
    fn name(&self) -> &str;
    fn estimate_tke(&self, state: &AtmosphericState) -> f64;
    /// Learnable parameter count, reported in comparison tables.
    fn param_count(&self) -> usize {
        0
    }
}

impl TurbulenceEstimator for PstnetModel {
    fn name(&self) -> &str {
        "pstnet"
    }

    fn estimate_tke(&self, state: &AtmosphericState) -> f64 {
        self.predict(state)
    }

    fn param_count(&self) -> usize {
        self.layout.total
    }
}

/// Regime target convenience re-export for callers building batches.
pub fn uniform_target(ri: f64) -> RegimeTarget {
    RegimeTarget { probs: [0.25; EXPERTS], ri }
}

#[cfg(test)]
mod tests;
