//! Adam training loop with cosine learning-rate decay, best-validation
//! checkpointing and a divergence guard.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::atmos::{argmax, NormStats, REGIME_COUNT};
use crate::datagen::{Dataset, SyntheticSample};
use crate::error::{Error, Result};
use crate::net::{Dims, Workspace, GradientSet, LossBreakdown, PreparedSample, PstnetModel, TargetStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub final_learning_rate: f64,
    pub lambda_gate: f64,
    pub lambda_balance: f64,
    pub seed: u64,
    pub dims: Dims,
    /// Abort once the epoch loss exceeds this multiple of the initial loss.
    pub divergence_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 64,
            learning_rate: 3e-3,
            final_learning_rate: 3e-4,
            lambda_gate: 0.1,
            lambda_balance: 0.01,
            seed: 0,
            dims: Dims::REFERENCE,
            divergence_factor: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && self.final_learning_rate > 0.0
            && self.lambda_gate >= 0.0
            && self.lambda_balance >= 0.0
            && self.divergence_factor > 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("training config has a non-positive size, rate or weight".into()))
        }
    }

    /// Cosine decay from `learning_rate` to `final_learning_rate`.
    pub fn lr_at(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        self.final_learning_rate
            + 0.5 * (self.learning_rate - self.final_learning_rate) * (1.0 + (std::f64::consts::PI * p).cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Loss over the whole training split at the end of the epoch.
    pub train: LossBreakdown,
    pub val_mse: f64,
    pub gate_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial: LossBreakdown,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub wall_clock_s: f64,
    /// Model state after the last epoch (the returned model is the
    /// best-validation checkpoint).
    #[serde(skip)]
    pub final_params: Vec<f64>,
}

impl TrainHistory {
    /// Means over consecutive non-overlapping windows of `window` epochs
    /// never increase.
    pub fn windowed_monotone(&self, window: usize) -> bool {
        let means: Vec<f64> = self
            .epochs
            .chunks_exact(window)
            .map(|c| c.iter().map(|e| e.train.total).sum::<f64>() / window as f64)
            .collect();
        means.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn final_train_mse(&self) -> f64 {
        self.epochs.last().map_or(self.initial.data_mse, |e| e.train.data_mse)
    }

    /// Tab-separated table: epoch, data_mse, gate_ce, load_balance, total,
    /// val_mse, gate_acc.
    pub fn export(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# epoch\tdata_mse\tgate_ce\tload_balance\ttotal\tval_mse\tgate_acc")?;
        for e in &self.epochs {
            writeln!(
                out,
                "{}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.6}",
                e.epoch, e.train.data_mse, e.train.gate_ce, e.train.load_balance, e.train.total, e.val_mse, e.gate_accuracy
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Mean and population standard deviation of the targets.
pub fn fit_target_stats(samples: &[SyntheticSample]) -> Result<TargetStats> {
    if samples.is_empty() {
        return Err(Error::domain("cannot fit target statistics on zero samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.k_true).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.k_true - mean).powi(2)).sum::<f64>() / n;
    Ok(TargetStats { mean, scale: if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 } })
}

/// Builds an untrained model with normalisation fitted on `train`.
pub fn initial_model(train: &[SyntheticSample], cfg: &TrainConfig) -> Result<PstnetModel> {
    let mut model = PstnetModel::init(cfg.dims, cfg.seed);
    model.norm = NormStats::fit(train.iter().map(|s| &s.state))?;
    model.target = fit_target_stats(train)?;
    Ok(model)
}

fn prepare(model: &PstnetModel, samples: &[SyntheticSample]) -> Result<Vec<PreparedSample>> {
    samples.iter().map(|s| PreparedSample::new(model, &s.train_sample())).collect()
}

fn gate_accuracy(model: &PstnetModel, samples: &[PreparedSample]) -> f64 {
    let hits = samples.iter().filter(|s| argmax(&model.gate_forward(&s.x)) == argmax(&s.target)).count();
    hits as f64 / samples.len().max(1) as f64
}

/// Trains on the dataset's train split, selecting the checkpoint with the
/// lowest validation MSE. The returned model is rounded to storage
/// precision.
pub fn train_loop(ds: &Dataset, cfg: &TrainConfig) -> Result<(PstnetModel, TrainHistory)> {
    let train = ds.train();
    let val = ds.val();
    train_on(&train, &val, cfg)
}

pub fn train_on(train: &[SyntheticSample], val: &[SyntheticSample], cfg: &TrainConfig) -> Result<(PstnetModel, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::domain("training and validation splits must be non-empty"));
    }
    let started = Instant::now();
    let mut model = initial_model(train, cfg)?;
    let prepared = prepare(&model, train)?;
    let val_prepared = prepare(&model, val)?;
    let all: Vec<&PreparedSample> = prepared.iter().collect();
    let val_refs: Vec<&PreparedSample> = val_prepared.iter().collect();
    let (lg, lb) = (cfg.lambda_gate, cfg.lambda_balance);

    let initial = model.loss_prepared(&all, lg, lb)?;
    let mut adam = Adam::new(model.params().len());
    let mut ws = Workspace::default();
    let mut grad = GradientSet { grads: vec![] };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_5EED);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let steps_per_epoch = prepared.len().div_ceil(cfg.batch_size);
    let total_steps = (cfg.epochs * steps_per_epoch) as f64;
    let mut step = 0usize;

    let mut best = (f64::INFINITY, 0usize, model.params().to_vec());
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut batch: Vec<&PreparedSample> = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &prepared[i]));
            model.backward_with(&batch, lg, lb, &mut ws, &mut grad)?;
            let lr = cfg.lr_at(step as f64 / total_steps);
            adam.step(model.params_mut(), &grad.grads, lr);
            step += 1;
        }

        let train_loss = model.loss_prepared(&all, lg, lb)?;
        if !train_loss.total.is_finite() || train_loss.total > cfg.divergence_factor * initial.total {
            return Err(Error::Diverged { epoch, loss: train_loss.total, initial: initial.total });
        }
        let val_mse = model.loss_prepared(&val_refs, 0.0, 0.0)?.data_mse;
        if val_mse < best.0 {
            best = (val_mse, epoch, model.params().to_vec());
        }
        epochs.push(EpochRecord { epoch, train: train_loss, val_mse, gate_accuracy: gate_accuracy(&model, &val_prepared) });
    }

    let final_params = model.params().to_vec();
    model.params_mut().copy_from_slice(&best.2);
    model.quantize();
    let history = TrainHistory {
        initial,
        epochs,
        best_epoch: best.1,
        wall_clock_s: started.elapsed().as_secs_f64(),
        final_params,
    };
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Mean squared error on standardized k.
    pub mse: f64,
    pub mae: f64,
    pub gate_accuracy: f64,
    /// Per-label MSE; `None` where a regime has no samples.
    pub per_regime_mse: [Option<f64>; REGIME_COUNT],
    pub n: usize,
}

pub fn eval_metrics(model: &PstnetModel, samples: &[SyntheticSample]) -> Result<EvalMetrics> {
    eval_with(model, samples, |s| model.predict(&s.state))
}

/// Metrics for any predictor, standardized with the model's target stats.
pub fn eval_with(
    model: &PstnetModel,
    samples: &[SyntheticSample],
    predict: impl Fn(&SyntheticSample) -> f64,
) -> Result<EvalMetrics> {
    if samples.is_empty() {
        return Err(Error::domain("cannot evaluate on an empty split"));
    }
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut hits = 0usize;
    let mut per = [(0.0, 0usize); REGIME_COUNT];
    for s in samples {
        let r = (predict(s) - s.k_true) / model.target.scale;
        sq += r * r;
        abs += r.abs();
        let label = s.regime.argmax();
        if argmax(&model.gate_for_state(&s.state)) == label.index() {
            hits += 1;
        }
        per[label.index()].0 += r * r;
        per[label.index()].1 += 1;
    }
    let n = samples.len() as f64;
    Ok(EvalMetrics {
        mse: sq / n,
        mae: abs / n,
        gate_accuracy: hits as f64 / n,
        per_regime_mse: per.map(|(s, c)| (c > 0).then(|| s / c as f64)),
        n: samples.len(),
    })
}

/// Fraction of samples whose label is the majority label of their gate
/// cluster (clusters = argmax of the gate).
pub fn gate_purity(model: &PstnetModel, samples: &[SyntheticSample]) -> f64 {
    let mut counts = [[0usize; REGIME_COUNT]; REGIME_COUNT];
    for s in samples {
        counts[argmax(&model.gate_for_state(&s.state))][s.regime.argmax().index()] += 1;
    }
    let majority: usize = counts.iter().map(|c| c.iter().copied().max().unwrap_or(0)).sum();
    majority as f64 / samples.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{make_dataset, DatasetSplit};
    use crate::atmos::Regime;
    use crate::mophys;

    #[test]
    fn cosine_schedule_endpoints() {
        let c = TrainConfig::default();
        assert!((c.lr_at(0.0) - 3e-3).abs() < 1e-15);
        assert!((c.lr_at(1.0) - 3e-4).abs() < 1e-15);
        assert!((c.lr_at(0.5) - 1.65e-3).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut a = Adam::new(2);
        let mut p = [1.0, 1.0];
        a.step(&mut p, &[0.5, -2.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn balance_term_bounds() {
        let ds = make_dataset(400, 2).unwrap();
        let mut m = initial_model(&ds.train(), &TrainConfig::default()).unwrap();
        let batch: Vec<_> = ds.train().iter().take(32).map(|s| s.train_sample()).collect();
        let zero = PstnetModel::zeros(Dims::REFERENCE);
        assert!((zero.loss(&batch, 0.0, 1.0).unwrap().load_balance - 1.0).abs() < 1e-12);

        let l = m.layout().clone();
        m.params_mut()[l.gate_bg.start] = 1e4;
        let lb = m.loss(&batch, 0.1, 0.01).unwrap();
        assert!((lb.load_balance - 4.0).abs() < 1e-12);
        assert!((lb.total - (lb.data_mse + 0.1 * lb.gate_ce + 0.01 * lb.load_balance)).abs() < 1e-12);
    }

    #[test]
    fn matched_predictions_give_zero_losses() {
        let m = PstnetModel::zeros(Dims::REFERENCE);
        let ds = make_dataset(400, 4).unwrap();
        let mut batch: Vec<_> = ds.train().iter().take(16).map(|s| s.train_sample()).collect();
        let l = m.layout().clone();
        let mut m = m;
        m.params_mut()[l.gate_bg.start + 1] = 800.0;
        for s in &mut batch {
            s.k_true = m.predict(&s.state);
            s.target = crate::atmos::RegimeTarget::one_hot(Regime::Neutral, 0.0);
        }
        let loss = m.loss(&batch, 0.1, 0.0).unwrap();
        assert_eq!(loss.data_mse, 0.0);
        assert!(loss.gate_ce < 1e-300 || loss.gate_ce == 0.0);
    }

    #[test]
    fn backbone_only_targets_drive_residual_to_zero() {
        let ds = make_dataset(800, 5).unwrap();
        let to_backbone = |v: Vec<SyntheticSample>| -> Vec<SyntheticSample> {
            v.into_iter().map(|mut s| {
                s.k_true = mophys::mo_tke(&s.state);
                s
            })
            .collect()
        };
        let cfg = TrainConfig { epochs: 60, lambda_gate: 0.0, lambda_balance: 0.0, ..TrainConfig::default() };
        let (m, h) = train_on(&to_backbone(ds.train()), &to_backbone(ds.val()), &cfg).unwrap();
        assert!(h.final_train_mse() <= 1e-5, "{}", h.final_train_mse());
        assert!(m.is_quantized());
    }

    #[test]
    fn same_seed_same_parameters() {
        let ds = make_dataset(400, 6).unwrap();
        let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
        let (a, ha) = train_loop(&ds, &cfg).unwrap();
        let (b, hb) = train_loop(&ds, &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(ha.final_params, hb.final_params);
        assert_eq!(ha.epochs.len(), 3);
    }

    #[test]
    fn divergence_guard_trips() {
        let ds = make_dataset(400, 7).unwrap();
        let cfg = TrainConfig { epochs: 5, learning_rate: 1e3, final_learning_rate: 1e3, ..TrainConfig::default() };
        match train_loop(&ds, &cfg) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|(_, h)| h.final_train_mse())),
        }
    }

    #[test]
    fn uniform_gate_accuracy_is_base_rate() {
        let ds = make_dataset(2000, 8).unwrap();
        let mut m = initial_model(&ds.train(), &TrainConfig::default()).unwrap();
        m.params_mut().fill(0.0);
        let test = ds.test();
        let acc = eval_metrics(&m, &test).unwrap().gate_accuracy;
        let base = DatasetSplit::coverage(&ds.split.test, &ds.samples)[0];
        assert!((acc - base).abs() < 1e-12);
    }
}
