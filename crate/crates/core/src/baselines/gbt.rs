//! Least-squares gradient boosting with exact greedy splits.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec::{Decoder, Encoder};
use crate::atmos::{standardize_unchecked, AtmosphericState, NormStats, FEATURE_COUNT};
use crate::datagen::SyntheticSample;
use crate::error::{Error, Result};
use crate::net::{TargetStats, TurbulenceEstimator};

pub const GBT_MAGIC: &[u8; 4] = b"PGBT";
pub const GBT_VERSION: u16 = 1;
pub const MIN_GBT_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub trees: usize,
    pub depth: usize,
    pub shrinkage: f64,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self { trees: 200, depth: 4, shrinkage: 0.1, subsample: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
    /// Already multiplied by the shrinkage.
    Leaf { value: f64 },
}

/// Nodes in creation order; node 0 is the root. `x[feature] <= threshold`
/// goes left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }

    fn leaf_of(&self, x: &[f64; FEATURE_COUNT]) -> usize {
        let mut i = 0;
        while let Node::Split { feature, threshold, left, right } = self.nodes[i] {
            i = if x[feature] <= threshold { left as usize } else { right as usize };
        }
        i
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub base: f64,
    pub trees: Vec<Tree>,
    pub config: GbtConfig,
    pub norm: NormStats,
    pub target: TargetStats,
    pub dataset_hash: u32,
}

impl GbtModel {
    /// Base prediction plus the sum of shrunken leaf values, on raw k.
    pub fn predict_x(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict(&self, state: &AtmosphericState) -> f64 {
        self.predict_x(&standardize_unchecked(&state.as_array(), &self.norm).0)
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(|t| t.nodes.len()).sum()
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(Tree::leaves).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut e = Encoder::new(GBT_MAGIC, GBT_VERSION);
        e.u32(self.dataset_hash);
        e.norm(&self.norm, &self.target);
        let c = &self.config;
        e.u32(c.trees as u32);
        e.u32(c.depth as u32);
        e.f64(c.shrinkage);
        e.f64(c.subsample);
        e.f64(c.seed as f64);
        e.f64(self.base);
        e.u32(self.trees.len() as u32);
        for t in &self.trees {
            e.u32(t.nodes.len() as u32);
            for n in &t.nodes {
                match *n {
                    Node::Leaf { value } => {
                        e.u8(0);
                        e.f64(value);
                    }
                    Node::Split { feature, threshold, left, right } => {
                        e.u8(1);
                        e.u8(feature as u8);
                        e.f64(threshold);
                        e.u32(left);
                        e.u32(right);
                    }
                }
            }
        }
        e.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut d = Decoder::new(&bytes, GBT_MAGIC, GBT_VERSION)?;
        let dataset_hash = d.u32()?;
        let (norm, target) = d.norm()?;
        let config = GbtConfig {
            trees: d.u32()? as usize,
            depth: d.u32()? as usize,
            shrinkage: d.f64()?,
            subsample: d.f64()?,
            seed: d.f64()? as u64,
        };
        let base = d.f64()?;
        let n_trees = d.u32()? as usize;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n = d.u32()? as usize;
            let mut nodes = Vec::with_capacity(n);
            for _ in 0..n {
                nodes.push(match d.u8()? {
                    0 => Node::Leaf { value: d.f64()? },
                    1 => {
                        let feature = d.u8()? as usize;
                        let threshold = d.f64()?;
                        let (left, right) = (d.u32()?, d.u32()?);
                        if feature >= FEATURE_COUNT || left as usize >= n || right as usize >= n {
                            return Err(Error::Corrupt("tree split points outside the tree".into()));
                        }
                        Node::Split { feature, threshold, left, right }
                    }
                    t => return Err(Error::Corrupt(format!("unknown node tag {t}"))),
                });
            }
            trees.push(Tree { nodes });
        }
        d.finish()?;
        Ok(Self { base, trees, config, norm, target, dataset_hash })
    }
}

impl TurbulenceEstimator for GbtModel {
    fn name(&self) -> &str {
        "gbt"
    }

    fn estimate_tke(&self, state: &AtmosphericState) -> f64 {
        self.predict(state)
    }

    fn param_count(&self) -> usize {
        self.leaf_count()
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Best split over presorted per-feature index lists. Only a strictly
/// larger gain replaces the incumbent, so ties resolve to the lowest
/// feature and then the lowest threshold.
fn best_split(xs: &[[f64; FEATURE_COUNT]], r: &[f64], sorted: &[Vec<u32>; FEATURE_COUNT]) -> Option<Split> {
    let n = sorted[0].len();
    if n < 2 {
        return None;
    }
    let total: f64 = sorted[0].iter().map(|&i| r[i as usize]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<Split> = None;
    for (f, order) in sorted.iter().enumerate() {
        let mut left = 0.0;
        for k in 0..n - 1 {
            let i = order[k] as usize;
            left += r[i];
            let (a, b) = (xs[i][f], xs[order[k + 1] as usize][f]);
            if a == b {
                continue;
            }
            let nl = (k + 1) as f64;
            let right = total - left;
            let gain = left * left / nl + right * right / (n as f64 - nl) - parent;
            if gain > 1e-12 * (1.0 + parent.abs()) && best.as_ref().is_none_or(|s| gain > s.gain) {
                let mid = 0.5 * (a + b);
                // guard against the midpoint rounding onto the right value
                let threshold = if mid < b { mid } else { a };
                best = Some(Split { feature: f, threshold, gain });
            }
        }
    }
    best
}

fn grow(
    xs: &[[f64; FEATURE_COUNT]],
    r: &[f64],
    sorted: [Vec<u32>; FEATURE_COUNT],
    depth: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let id = nodes.len() as u32;
    let mean = sorted[0].iter().map(|&i| r[i as usize]).sum::<f64>() / sorted[0].len() as f64;
    nodes.push(Node::Leaf { value: mean });
    if depth == 0 {
        return id;
    }
    let Some(split) = best_split(xs, r, &sorted) else {
        return id;
    };
    let goes_left = |i: u32| xs[i as usize][split.feature] <= split.threshold;
    let mut left: [Vec<u32>; FEATURE_COUNT] = Default::default();
    let mut right: [Vec<u32>; FEATURE_COUNT] = Default::default();
    for f in 0..FEATURE_COUNT {
        for &i in &sorted[f] {
            if goes_left(i) { left[f].push(i) } else { right[f].push(i) }
        }
    }
    drop(sorted);
    let l = grow(xs, r, left, depth - 1, nodes);
    let rr = grow(xs, r, right, depth - 1, nodes);
    nodes[id as usize] = Node::Split { feature: split.feature, threshold: split.threshold, left: l, right: rr };
    id
}

/// Per-tree training MSE on raw targets, index 0 being the base model.
pub type GbtTrace = Vec<f64>;

/// Fits on the standardized features of `train`. Each tree is grown on a
/// (possibly subsampled) set of rows; its leaf values are then refit to
/// the mean residual of every training row reaching the leaf, which keeps
/// the full training MSE non-increasing tree by tree.
pub fn gbt_fit(train: &[SyntheticSample], cfg: &GbtConfig) -> Result<(GbtModel, GbtTrace)> {
    if train.len() < MIN_GBT_SAMPLES {
        return Err(Error::domain(format!("boosting needs at least {MIN_GBT_SAMPLES} samples, got {}", train.len())));
    }
    if !(cfg.shrinkage > 0.0 && cfg.shrinkage <= 1.0 && cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(Error::Config("shrinkage and subsample must lie in (0, 1]".into()));
    }
    let norm = NormStats::fit(train.iter().map(|s| &s.state))?;
    let target = crate::train::fit_target_stats(train)?;
    let xs: Vec<[f64; FEATURE_COUNT]> = train.iter().map(|s| standardize_unchecked(&s.state.as_array(), &norm).0).collect();
    let y: Vec<f64> = train.iter().map(|s| s.k_true).collect();
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mse = |p: &[f64]| p.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
    let mut trace = vec![mse(&pred)];

    let presorted: [Vec<u32>; FEATURE_COUNT] = std::array::from_fn(|f| {
        let mut idx: Vec<u32> = (0..n as u32).collect();
        idx.sort_by(|&a, &b| xs[a as usize][f].total_cmp(&xs[b as usize][f]).then(a.cmp(&b)));
        idx
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trees = Vec::with_capacity(cfg.trees);
    let mut resid = vec![0.0; n];
    let mut keep = vec![true; n];
    for _ in 0..cfg.trees {
        for i in 0..n {
            resid[i] = y[i] - pred[i];
        }
        if cfg.subsample < 1.0 {
            for k in keep.iter_mut() {
                *k = rng.random::<f64>() < cfg.subsample;
            }
        }
        let sorted: [Vec<u32>; FEATURE_COUNT] =
            std::array::from_fn(|f| presorted[f].iter().copied().filter(|&i| keep[i as usize]).collect());
        if sorted[0].is_empty() {
            continue;
        }
        let mut nodes = Vec::new();
        grow(&xs, &resid, sorted, cfg.depth, &mut nodes);
        let mut tree = Tree { nodes };

        let mut sums = vec![(0.0, 0usize); tree.nodes.len()];
        let leaf_of: Vec<usize> = xs.iter().map(|x| tree.leaf_of(x)).collect();
        for (i, &l) in leaf_of.iter().enumerate() {
            sums[l].0 += resid[i];
            sums[l].1 += 1;
        }
        for (node, (s, c)) in tree.nodes.iter_mut().zip(&sums) {
            if let Node::Leaf { value } = node {
                *value = if *c > 0 { cfg.shrinkage * s / *c as f64 } else { 0.0 };
            }
        }
        for (i, &l) in leaf_of.iter().enumerate() {
            if let Node::Leaf { value } = tree.nodes[l] {
                pred[i] += value;
            }
        }
        trace.push(mse(&pred));
        trees.push(tree);
    }
    Ok((GbtModel { base, trees, config: *cfg, norm, target, dataset_hash: 0 }, trace))
}

/// One row of the validation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub config: GbtConfig,
    pub val_mse: f64,
}

pub const GRID_DEPTHS: [usize; 3] = [3, 4, 6];
pub const GRID_SHRINKAGE: [f64; 3] = [0.05, 0.1, 0.3];
pub const GRID_SUBSAMPLE: [f64; 2] = [0.8, 1.0];

/// Fits every grid point and keeps the one with the lowest validation MSE
/// (first in grid order on ties).
pub fn gbt_grid_search(
    train: &[SyntheticSample],
    val: &[SyntheticSample],
    trees: usize,
    seed: u64,
) -> Result<(GbtModel, Vec<GridPoint>)> {
    if val.is_empty() {
        return Err(Error::domain("validation split is empty"));
    }
    let mut grid = Vec::new();
    let mut best: Option<(f64, GbtModel)> = None;
    for depth in GRID_DEPTHS {
        for shrinkage in GRID_SHRINKAGE {
            for subsample in GRID_SUBSAMPLE {
                let config = GbtConfig { trees, depth, shrinkage, subsample, seed };
                let (m, _) = gbt_fit(train, &config)?;
                let val_mse = val.iter().map(|s| (m.predict(&s.state) - s.k_true).powi(2)).sum::<f64>() / val.len() as f64;
                grid.push(GridPoint { config, val_mse });
                if best.as_ref().is_none_or(|(b, _)| val_mse < *b) {
                    best = Some((val_mse, m));
                }
            }
        }
    }
    Ok((best.expect("grid is non-empty").1, grid))
}
