//! Training objective and its hand-written gradient.
//!
//! `L = L_data + λ_g L_gate + λ_b L_bal` with
//! `L_data = mean(((k - k_true) / σ_k)²)`, `L_gate` the mean cross-entropy
//! between α and the soft regime target, and `L_bal = 4 Σ_j ᾱ_j²` where ᾱ is
//! the batch-mean gate (minimised, at 1, by a uniform load).

use serde::{Deserialize, Serialize};

use super::{gelu, gelu_grad, Cache, PstnetModel, EXPERTS};
use crate::atmos::{standardize_unchecked, AtmosphericState, RegimeTarget, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::mophys::{self};

/// One labelled training example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    pub state: AtmosphericState,
    pub k_true: f64,
    pub target: RegimeTarget,
}

/// A sample with the parameter-independent parts of the forward pass
/// (standardization, MO backbone, Kolmogorov scale) computed once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedSample {
    pub x: [f64; FEATURE_COUNT],
    pub density_ratio: f64,
    pub k_mo: f64,
    pub k_scale: f64,
    pub k_true: f64,
    pub target: [f64; EXPERTS],
}

impl PreparedSample {
    pub fn new(model: &PstnetModel, s: &TrainSample) -> Result<Self> {
        s.state.validate()?;
        if !s.k_true.is_finite() {
            return Err(Error::domain("training target must be finite"));
        }
        let bb = mophys::backbone(&s.state);
        Ok(Self {
            x: standardize_unchecked(&s.state.as_array(), &model.norm).0,
            density_ratio: s.state.density_ratio,
            k_mo: bb.k_mo,
            k_scale: mophys::kolmogorov_scale(bb.epsilon, s.state.density_ratio),
            k_true: s.k_true,
            target: s.target.probs,
        })
    }
}

/// Loss components; `total` includes the λ weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub data_mse: f64,
    pub gate_ce: f64,
    pub load_balance: f64,
    pub total: f64,
}

/// Gradient of the total loss, laid out like the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub grads: Vec<f64>,
}

impl GradientSet {
    pub fn l2_norm(&self) -> f64 {
        self.grads.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Reusable forward caches for a mini-batch.
#[derive(Debug, Default)]
pub struct Workspace {
    caches: Vec<Cache>,
}

fn log_softmax(logits: &[f64; EXPERTS]) -> [f64; EXPERTS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.map(|l| l - lse)
}

impl PstnetModel {
    fn forward_batch(&self, batch: &[&PreparedSample], ws: &mut Workspace) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::domain("empty batch"));
        }
        let dims = self.dims();
        if ws.caches.first().is_some_and(|c| c.z_bar.len() != dims.d || c.gate_h.len() != dims.gate_hidden) {
            ws.caches.clear();
        }
        while ws.caches.len() < batch.len() {
            ws.caches.push(Cache::new(dims));
        }
        for (s, c) in batch.iter().zip(ws.caches.iter_mut()) {
            c.x = s.x;
            self.network_into(s.density_ratio, c);
            c.k = s.k_mo + mophys::sigmoid(c.s) * s.k_scale;
        }
        Ok(())
    }

    fn losses(&self, batch: &[&PreparedSample], ws: &Workspace, lg: f64, lb: f64) -> (LossBreakdown, [f64; EXPERTS]) {
        let n = batch.len() as f64;
        let var = self.target.scale * self.target.scale;
        let mut data = 0.0;
        let mut ce = 0.0;
        let mut mean_alpha = [0.0; EXPERTS];
        for (s, c) in batch.iter().zip(&ws.caches) {
            let r = c.k - s.k_true;
            data += r * r / var;
            let ls = log_softmax(&c.logits);
            ce -= (0..EXPERTS).map(|j| s.target[j] * ls[j]).sum::<f64>();
            for j in 0..EXPERTS {
                mean_alpha[j] += c.alpha[j] / n;
            }
        }
        let bal = EXPERTS as f64 * mean_alpha.iter().map(|a| a * a).sum::<f64>();
        let (data, ce) = (data / n, ce / n);
        (LossBreakdown { data_mse: data, gate_ce: ce, load_balance: bal, total: data + lg * ce + lb * bal }, mean_alpha)
    }

    pub fn loss_prepared(&self, batch: &[&PreparedSample], lambda_gate: f64, lambda_balance: f64) -> Result<LossBreakdown> {
        let mut ws = Workspace::default();
        self.forward_batch(batch, &mut ws)?;
        Ok(self.losses(batch, &ws, lambda_gate, lambda_balance).0)
    }

    pub fn backward_prepared(
        &self,
        batch: &[&PreparedSample],
        lambda_gate: f64,
        lambda_balance: f64,
    ) -> Result<(GradientSet, LossBreakdown)> {
        let mut ws = Workspace::default();
        let mut g = GradientSet { grads: vec![0.0; self.params().len()] };
        let loss = self.backward_with(batch, lambda_gate, lambda_balance, &mut ws, &mut g)?;
        Ok((g, loss))
    }

    /// Accumulates the gradient into `grad` (overwritten) using `ws` for the
    /// forward caches. Two passes: forward everything, then backward once the
    /// batch-mean gate needed by the balance term is known.
    pub fn backward_with(
        &self,
        batch: &[&PreparedSample],
        lambda_gate: f64,
        lambda_balance: f64,
        ws: &mut Workspace,
        grad: &mut GradientSet,
    ) -> Result<LossBreakdown> {
        self.forward_batch(batch, ws)?;
        let (loss, mean_alpha) = self.losses(batch, ws, lambda_gate, lambda_balance);

        grad.grads.clear();
        grad.grads.resize(self.params().len(), 0.0);
        let g = &mut grad.grads;
        let p = self.params();
        let l = self.layout();
        let dims = self.dims();
        let (d, he, hf, hg) = (dims.d, dims.expert_hidden, dims.film_hidden, dims.gate_hidden);
        let n = batch.len() as f64;
        let var = self.target.scale * self.target.scale;

        let mut dzbar = vec![0.0; d];
        let mut dmix = vec![0.0; d];
        let mut dout = vec![0.0; 2 * d];
        let mut dz = vec![0.0; d];
        let mut h = vec![0.0; he];
        let mut dh = vec![0.0; he.max(hg).max(hf)];
        let mut mix = vec![0.0; d];

        for (s, c) in batch.iter().zip(&ws.caches) {
            let sig = mophys::sigmoid(c.s);
            let ds = 2.0 * (c.k - s.k_true) / var / n * s.k_scale * sig * (1.0 - sig);

            // head
            for i in 0..d {
                g[l.head_w.start + i] += ds * c.z_bar[i];
                dzbar[i] = ds * p[l.head_w.start + i];
            }
            g[l.head_b.start] += ds;

            // FiLM modulation of the gate-weighted expert mix
            for i in 0..d {
                mix[i] = (0..EXPERTS).map(|j| c.alpha[j] * c.z[j][i]).sum();
                dout[i] = dzbar[i] * mix[i];
                dout[d + i] = dzbar[i];
                dmix[i] = dzbar[i] * c.gamma[i];
            }

            // hyper-network
            let dh_f = &mut dh[..hf];
            dh_f.fill(0.0);
            for (o, &dv) in dout.iter().enumerate() {
                g[l.film_b2.start + o] += dv;
                for k in 0..hf {
                    g[l.film_w2.start + o * hf + k] += dv * c.film_h[k];
                    dh_f[k] += dv * p[l.film_w2.start + o * hf + k];
                }
            }
            for k in 0..hf {
                let dpre = dh_f[k] * (1.0 - c.film_h[k] * c.film_h[k]);
                g[l.film_b1.start + k] += dpre;
                g[l.film_w1.start + k] += dpre * s.density_ratio;
            }

            // experts and the gate weights
            let mut dalpha = [0.0; EXPERTS];
            for j in 0..EXPERTS {
                dalpha[j] = (0..d).map(|i| dmix[i] * c.z[j][i]).sum::<f64>();
                for i in 0..d {
                    dz[i] = dmix[i] * c.alpha[j];
                }
                for k in 0..he {
                    h[k] = gelu(c.expert_pre[j][k]);
                }
                let dh_e = &mut dh[..he];
                dh_e.fill(0.0);
                let (w2, b2) = (l.expert_w2[j].start, l.expert_b2[j].start);
                for i in 0..d {
                    g[b2 + i] += dz[i];
                    for k in 0..he {
                        g[w2 + i * he + k] += dz[i] * h[k];
                        dh_e[k] += dz[i] * p[w2 + i * he + k];
                    }
                }
                let (w1, b1) = (l.expert_w1[j].start, l.expert_b1[j].start);
                for k in 0..he {
                    let dpre = dh_e[k] * gelu_grad(c.expert_pre[j][k]);
                    g[b1 + k] += dpre;
                    for m in 0..FEATURE_COUNT {
                        g[w1 + k * FEATURE_COUNT + m] += dpre * c.x[m];
                    }
                }
            }

            // balance term acts on α directly
            for j in 0..EXPERTS {
                dalpha[j] += lambda_balance * 2.0 * EXPERTS as f64 * mean_alpha[j] / n;
            }
            let dot: f64 = (0..EXPERTS).map(|j| c.alpha[j] * dalpha[j]).sum();
            let mut dlogit = [0.0; EXPERTS];
            let tsum: f64 = s.target.iter().sum();
            for j in 0..EXPERTS {
                dlogit[j] = c.alpha[j] * (dalpha[j] - dot) + lambda_gate * (c.alpha[j] * tsum - s.target[j]) / n;
            }

            // gate
            let dh_g = &mut dh[..hg];
            dh_g.fill(0.0);
            for (j, &dl) in dlogit.iter().enumerate() {
                g[l.gate_bg.start + j] += dl;
                for k in 0..hg {
                    g[l.gate_wg.start + j * hg + k] += dl * c.gate_h[k];
                    dh_g[k] += dl * p[l.gate_wg.start + j * hg + k];
                }
            }
            for k in 0..hg {
                let dpre = dh_g[k] * c.gate_h[k] * (1.0 - c.gate_h[k]);
                g[l.gate_bh.start + k] += dpre;
                for m in 0..FEATURE_COUNT {
                    g[l.gate_wh.start + k * FEATURE_COUNT + m] += dpre * c.x[m];
                }
            }
        }
        Ok(loss)
    }
}
