//! Learned baselines without physics priors: two MLPs and a boosted tree
//! ensemble, trained on the same features, targets and splits as PSTNet.

mod codec;
pub mod gbt;
pub mod mlp;

pub use gbt::{gbt_fit, gbt_grid_search, GbtConfig, GbtModel};
pub use mlp::{mlp_train, Mlp, MlpHistory, MlpKind, MlpTrainConfig};

use crate::datagen::Dataset;
use crate::error::Result;

/// All three baselines fitted on one dataset.
#[derive(Debug, Clone)]
pub struct BaselineSet {
    pub mlp: Mlp,
    pub deep_mlp: Mlp,
    pub gbt: GbtModel,
    pub mlp_history: MlpHistory,
    pub deep_history: MlpHistory,
    pub gbt_grid: Vec<gbt::GridPoint>,
}

pub fn train_baselines(ds: &Dataset, mlp_cfg: &MlpTrainConfig, gbt_trees: usize) -> Result<BaselineSet> {
    let (train, val) = (ds.train(), ds.val());
    let (mut mlp, mlp_history) = mlp_train(MlpKind::Vanilla, &train, &val, mlp_cfg)?;
    let (mut deep_mlp, deep_history) = mlp_train(MlpKind::Deep, &train, &val, mlp_cfg)?;
    let (mut gbt, gbt_grid) = gbt_grid_search(&train, &val, gbt_trees, mlp_cfg.seed)?;
    let hash = ds.hash();
    mlp.dataset_hash = hash;
    deep_mlp.dataset_hash = hash;
    gbt.dataset_hash = hash;
    Ok(BaselineSet { mlp, deep_mlp, gbt, mlp_history, deep_history, gbt_grid })
}
