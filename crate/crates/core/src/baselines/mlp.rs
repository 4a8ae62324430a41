//! Unconstrained MLP regressors on the standardized features.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec::{Decoder, Encoder};
use crate::atmos::{standardize_unchecked, AtmosphericState, NormStats, FEATURE_COUNT};
use crate::datagen::SyntheticSample;
use crate::error::{Error, Result};
use crate::net::{gelu, gelu_with_grad, TargetStats, TurbulenceEstimator};
use crate::train::{fit_target_stats, Adam};

pub const MLP_MAGIC: &[u8; 4] = b"PMLP";
pub const MLP_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MlpKind {
    /// 7→32→16→1.
    Vanilla,
    /// 7→40→40→40→40→40→1 with identity skips between the 40-wide layers.
    Deep,
}

impl MlpKind {
    pub fn widths(self) -> Vec<usize> {
        match self {
            MlpKind::Vanilla => vec![FEATURE_COUNT, 32, 16, 1],
            MlpKind::Deep => vec![FEATURE_COUNT, 40, 40, 40, 40, 40, 1],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MlpKind::Vanilla => "mlp",
            MlpKind::Deep => "deep-mlp",
        }
    }

    fn tag(self) -> u8 {
        match self {
            MlpKind::Vanilla => 0,
            MlpKind::Deep => 1,
        }
    }
}

/// Parameter count of an MLP with the given widths.
pub fn mlp_param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub kind: MlpKind,
    widths: Vec<usize>,
    /// Per layer `w [out x in]` then `b [out]`, layers in order.
    params: Vec<f64>,
    offsets: Vec<usize>,
    pub norm: NormStats,
    pub target: TargetStats,
    /// Hash of the dataset the model was trained on; 0 if untrained.
    pub dataset_hash: u32,
}

fn offsets(widths: &[usize]) -> Vec<usize> {
    let mut at = 0;
    let mut out = vec![0];
    for w in widths.windows(2) {
        at += w[0] * w[1] + w[1];
        out.push(at);
    }
    out
}

impl Mlp {
    pub fn zeros(kind: MlpKind) -> Self {
        let widths = kind.widths();
        let offsets = offsets(&widths);
        Self {
            kind,
            params: vec![0.0; *offsets.last().expect("non-empty")],
            widths,
            offsets,
            norm: NormStats::default(),
            target: TargetStats::default(),
            dataset_hash: 0,
        }
    }

    pub fn init(kind: MlpKind, seed: u64) -> Self {
        let mut m = Self::zeros(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..m.widths.len() - 1 {
            let (n_in, n_out) = (m.widths[l], m.widths[l + 1]);
            let bound = (6.0 / n_in as f64).sqrt();
            let start = m.offsets[l];
            for v in &mut m.params[start..start + n_in * n_out] {
                *v = rng.random_range(-bound..bound);
            }
        }
        m
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn has_skip(&self, l: usize) -> bool {
        self.kind == MlpKind::Deep && l > 0 && l + 1 < self.layers() && self.widths[l] == self.widths[l + 1]
    }

    /// Output in standardized target units for a standardized input.
    pub fn forward_std(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let mut h: Vec<f64> = Vec::with_capacity(64);
        h.extend_from_slice(x);
        let mut next = Vec::with_capacity(64);
        for l in 0..self.layers() {
            self.layer(l, &h, &mut next);
            let last = l + 1 == self.layers();
            for (i, v) in next.iter_mut().enumerate() {
                if !last {
                    *v = gelu(*v);
                    if self.has_skip(l) {
                        *v += h[i];
                    }
                }
            }
            std::mem::swap(&mut h, &mut next);
        }
        h[0]
    }

    fn layer(&self, l: usize, input: &[f64], out: &mut Vec<f64>) {
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let w = &self.params[self.offsets[l]..self.offsets[l] + n_in * n_out];
        let b = &self.params[self.offsets[l] + n_in * n_out..self.offsets[l + 1]];
        out.clear();
        out.extend(w.chunks_exact(n_in).zip(b).map(|(row, b)| b + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()));
    }

    pub fn predict(&self, state: &AtmosphericState) -> f64 {
        let x = standardize_unchecked(&state.as_array(), &self.norm).0;
        self.target.mean + self.target.scale * self.forward_std(&x)
    }

    /// Mean squared error (standardized) and its gradient over a batch of
    /// `(x, y_std)` pairs.
    pub fn loss_and_grad(&self, batch: &[&([f64; FEATURE_COUNT], f64)], grad: &mut Vec<f64>) -> f64 {
        grad.clear();
        grad.resize(self.params.len(), 0.0);
        let n = batch.len() as f64;
        let layers = self.layers();
        let width = *self.widths.iter().max().expect("non-empty");
        let mut loss = 0.0;
        // pre[l] holds the affine output, then the GELU derivative there
        let mut pre: Vec<Vec<f64>> = (0..layers).map(|l| Vec::with_capacity(self.widths[l + 1])).collect();
        let mut acts: Vec<Vec<f64>> = self.widths.iter().map(|&w| Vec::with_capacity(w)).collect();
        let mut delta = Vec::with_capacity(width);
        let mut din = Vec::with_capacity(width);
        for (x, y) in batch.iter().map(|p| (&p.0, p.1)) {
            acts[0].clear();
            acts[0].extend_from_slice(x);
            for l in 0..layers {
                let (head, tail) = acts.split_at_mut(l + 1);
                self.layer(l, &head[l], &mut pre[l]);
                let a = &mut tail[0];
                a.clear();
                a.extend_from_slice(&pre[l]);
                if l + 1 < layers {
                    let skip = self.has_skip(l);
                    for (i, v) in a.iter_mut().enumerate() {
                        let (g, dg) = gelu_with_grad(*v);
                        *v = g;
                        pre[l][i] = dg;
                        if skip {
                            *v += head[l][i];
                        }
                    }
                }
            }
            let r = acts[layers][0] - y;
            loss += r * r / n;

            // delta holds dL/d(output of layer l), turned in place into dL/dz
            delta.clear();
            delta.push(2.0 * r / n);
            for l in (0..layers).rev() {
                let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
                din.clear();
                if self.has_skip(l) {
                    din.extend_from_slice(&delta);
                } else {
                    din.resize(n_in, 0.0);
                }
                if l + 1 < layers {
                    for (d, dg) in delta.iter_mut().zip(&pre[l]) {
                        *d *= dg;
                    }
                }
                let (w0, b0) = (self.offsets[l], self.offsets[l] + n_in * n_out);
                let input = &acts[l];
                for o in 0..n_out {
                    let dz = delta[o];
                    grad[b0 + o] += dz;
                    let row = w0 + o * n_in;
                    let (g, w) = (&mut grad[row..row + n_in], &self.params[row..row + n_in]);
                    for i in 0..n_in {
                        g[i] += dz * input[i];
                        din[i] += dz * w[i];
                    }
                }
                std::mem::swap(&mut delta, &mut din);
            }
        }
        loss
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut e = Encoder::new(MLP_MAGIC, MLP_VERSION);
        e.u8(self.kind.tag());
        e.u32(self.dataset_hash);
        e.norm(&self.norm, &self.target);
        e.u32(self.params.len() as u32);
        for p in &self.params {
            e.f64(*p);
        }
        e.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut d = Decoder::new(&bytes, MLP_MAGIC, MLP_VERSION)?;
        let kind = match d.u8()? {
            0 => MlpKind::Vanilla,
            1 => MlpKind::Deep,
            t => return Err(Error::Corrupt(format!("unknown MLP kind {t}"))),
        };
        let mut m = Mlp::zeros(kind);
        m.dataset_hash = d.u32()?;
        (m.norm, m.target) = d.norm()?;
        if d.u32()? as usize != m.params.len() {
            return Err(Error::Corrupt("MLP parameter count does not match its kind".into()));
        }
        for p in &mut m.params {
            *p = d.f64()?;
        }
        d.finish()?;
        Ok(m)
    }
}

impl TurbulenceEstimator for Mlp {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn estimate_tke(&self, state: &AtmosphericState) -> f64 {
        self.predict(state)
    }

    fn param_count(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub final_learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self { epochs: 300, batch_size: 64, learning_rate: 3e-3, final_learning_rate: 3e-4, seed: 0 }
    }
}

/// Per-epoch training and validation MSE (standardized).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MlpHistory {
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub best_epoch: usize,
}

impl MlpHistory {
    pub fn windowed_monotone(&self, window: usize) -> bool {
        let means: Vec<f64> =
            self.train_mse.chunks_exact(window).map(|c| c.iter().sum::<f64>() / window as f64).collect();
        means.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Same loop contract as the PSTNet trainer with only the data term:
/// Adam, cosine decay, seeded shuffles, best-validation checkpoint and a
/// 10x divergence guard.
pub fn mlp_train(
    kind: MlpKind,
    train: &[SyntheticSample],
    val: &[SyntheticSample],
    cfg: &MlpTrainConfig,
) -> Result<(Mlp, MlpHistory)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::domain("training and validation splits must be non-empty"));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be positive".into()));
    }
    let mut m = Mlp::init(kind, cfg.seed);
    m.norm = NormStats::fit(train.iter().map(|s| &s.state))?;
    m.target = fit_target_stats(train)?;
    let prep = |v: &[SyntheticSample]| -> Vec<([f64; FEATURE_COUNT], f64)> {
        v.iter()
            .map(|s| (standardize_unchecked(&s.state.as_array(), &m.norm).0, m.target_std(s.k_true)))
            .collect()
    };
    let (tr, va) = (prep(train), prep(val));
    let mse = |m: &Mlp, d: &[([f64; FEATURE_COUNT], f64)]| {
        d.iter().map(|(x, y)| (m.forward_std(x) - y).powi(2)).sum::<f64>() / d.len() as f64
    };

    let sched = crate::train::TrainConfig {
        learning_rate: cfg.learning_rate,
        final_learning_rate: cfg.final_learning_rate,
        ..Default::default()
    };
    let initial = mse(&m, &tr);
    let mut adam = Adam::new(m.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_5EED);
    let mut order: Vec<usize> = (0..tr.len()).collect();
    let total_steps = (cfg.epochs * tr.len().div_ceil(cfg.batch_size)) as f64;
    let mut step = 0usize;
    let mut grad = Vec::new();
    let mut hist = MlpHistory::default();
    let mut best = (f64::INFINITY, m.params.clone());

    for epoch in 1..=cfg.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&([f64; FEATURE_COUNT], f64)> = chunk.iter().map(|&i| &tr[i]).collect();
            m.loss_and_grad(&batch, &mut grad);
            adam.step(&mut m.params, &grad, sched.lr_at(step as f64 / total_steps));
            step += 1;
        }
        let (t, v) = (mse(&m, &tr), mse(&m, &va));
        if !t.is_finite() || t > 10.0 * initial {
            return Err(Error::Diverged { epoch, loss: t, initial });
        }
        if v < best.0 {
            best = (v, m.params.clone());
            hist.best_epoch = epoch;
        }
        hist.train_mse.push(t);
        hist.val_mse.push(v);
    }
    m.params = best.1;
    Ok((m, hist))
}

impl Mlp {
    fn target_std(&self, k: f64) -> f64 {
        (k - self.target.mean) / self.target.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(Mlp::zeros(MlpKind::Vanilla).param_count(), 801);
        assert_eq!(mlp_param_count(&[7, 32, 16, 1]), 7 * 32 + 32 + 32 * 16 + 16 + 16 + 1);
        let deep = Mlp::zeros(MlpKind::Deep).param_count();
        assert_eq!(deep, 6921);
        assert!((deep as f64 / 6819.0 - 1.0).abs() < 0.10);
    }

    #[test]
    fn zero_weights_output_final_bias() {
        for kind in [MlpKind::Vanilla, MlpKind::Deep] {
            let mut m = Mlp::zeros(kind);
            let n = m.param_count();
            m.params_mut()[n - 1] = 0.75;
            assert_eq!(m.forward_std(&[1.0, -2.0, 3.0, 0.0, 0.5, -1.0, 2.0]), 0.75);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for kind in [MlpKind::Vanilla, MlpKind::Deep] {
            let m = Mlp::init(kind, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let data: Vec<([f64; FEATURE_COUNT], f64)> = (0..6)
                .map(|_| (std::array::from_fn(|_| rng.random_range(-2.0..2.0)), rng.random_range(-1.0..1.0)))
                .collect();
            let batch: Vec<_> = data.iter().collect();
            let mut g = Vec::new();
            m.loss_and_grad(&batch, &mut g);
            let loss = |m: &Mlp| batch.iter().map(|(x, y)| (m.forward_std(x) - y).powi(2)).sum::<f64>() / 6.0;
            for i in (0..m.param_count()).step_by(7) {
                let h = 1e-6;
                let (mut p, mut q) = (m.clone(), m.clone());
                p.params[i] += h;
                q.params[i] -= h;
                let fd = (loss(&p) - loss(&q)) / (2.0 * h);
                assert!((g[i] - fd).abs() <= (1e-4 * fd.abs()).max(1e-7), "{kind:?} param {i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let mut m = Mlp::init(MlpKind::Deep, 9);
        m.dataset_hash = 0xDEAD_BEEF;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.pmlp");
        m.save(&p).unwrap();
        assert_eq!(Mlp::load(&p).unwrap(), m);
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[40] ^= 1;
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(Mlp::load(&p), Err(Error::Checksum { .. })));
    }
}
