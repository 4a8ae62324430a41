//! Physics-only estimators and a name-keyed registry used by the simulator,
//! the CLI and the service.

use std::path::Path;
use std::sync::Arc;

use crate::atmos::AtmosphericState;
use crate::datagen::{clean_tke, GeneratorConfig};
use crate::mophys::dryden::{dryden_sigma, wind_at_20ft, Severity};
use crate::baselines::{GbtModel, Mlp};
use crate::error::{Error, Result};
use crate::net::{PstnetModel, TurbulenceEstimator};

/// Classical baseline: TKE implied by the Dryden intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrydenEstimator {
    pub severity: Severity,
}

impl Default for DrydenEstimator {
    fn default() -> Self {
        Self { severity: Severity::Light }
    }
}

impl TurbulenceEstimator for DrydenEstimator {
    fn name(&self) -> &str {
        "dryden"
    }

    fn estimate_tke(&self, state: &AtmosphericState) -> f64 {
        dryden_sigma(state.altitude_m, wind_at_20ft(state.wind10_mps), self.severity).tke()
    }
}

/// The noise-free synthetic ground truth. Defines the simulated world's
/// turbulence; never a contestant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthEstimator {
    pub config: GeneratorConfig,
}

impl TurbulenceEstimator for TruthEstimator {
    fn name(&self) -> &str {
        "truth"
    }

    fn estimate_tke(&self, state: &AtmosphericState) -> f64 {
        clean_tke(state, &self.config)
    }
}

/// Always zero: guidance without gust compensation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoneEstimator;

impl TurbulenceEstimator for NoneEstimator {
    fn name(&self) -> &str {
        "none"
    }

    fn estimate_tke(&self, _: &AtmosphericState) -> f64 {
        0.0
    }
}

/// Shared estimator handle.
pub type EstimatorRef = Arc<dyn TurbulenceEstimator>;

/// Estimator names in the default comparison order. The first learned
/// model is the candidate, `dryden` is the reference.
pub const DEFAULT_ESTIMATORS: [&str; 5] = ["pstnet", "mlp", "deep-mlp", "gbt", "dryden"];
pub const REFERENCE_ESTIMATOR: &str = "dryden";

/// Estimators needing no trained artifact, by name.
pub fn builtin(name: &str) -> Option<EstimatorRef> {
    match name {
        "dryden" => Some(Arc::new(DrydenEstimator::default())),
        "truth" => Some(Arc::new(TruthEstimator::default())),
        "none" => Some(Arc::new(NoneEstimator)),
        _ => None,
    }
}

/// File a trained estimator is stored under inside a model directory.
pub fn artifact_file(name: &str) -> Option<&'static str> {
    match name {
        "pstnet" => Some("pstnet.bin"),
        "mlp" => Some("mlp.bin"),
        "deep-mlp" => Some("deep-mlp.bin"),
        "gbt" => Some("gbt.bin"),
        _ => None,
    }
}

/// Loads one trained estimator from a model directory.
pub fn load_trained(name: &str, dir: &Path) -> Result<EstimatorRef> {
    let file = artifact_file(name).ok_or_else(|| Error::Config(format!("unknown estimator '{name}'")))?;
    let path = dir.join(file);
    Ok(match name {
        "pstnet" => Arc::new(PstnetModel::load(&path)?),
        "gbt" => Arc::new(GbtModel::load(&path)?),
        _ => Arc::new(Mlp::load(&path)?),
    })
}

/// Resolves names to estimators, loading trained ones from `dir`. All
/// absent model files are reported together.
pub fn resolve(names: &[String], dir: &Path) -> Result<Vec<EstimatorRef>> {
    let absent: Vec<String> = names
        .iter()
        .filter(|n| builtin(n).is_none())
        .filter_map(|n| match artifact_file(n) {
            Some(f) if dir.join(f).is_file() => None,
            Some(f) => Some(format!("{n} ({})", dir.join(f).display())),
            None => Some(format!("{n} (unknown estimator)")),
        })
        .collect();
    if !absent.is_empty() {
        return Err(Error::Config(format!("missing model files for estimators: {}", absent.join(", "))));
    }
    names.iter().map(|n| builtin(n).map_or_else(|| load_trained(n, dir), Ok)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atmos::isa_state;
    use crate::mophys::dryden::low_altitude_sigma;

    #[test]
    fn dryden_estimator_matches_sigma_sum() {
        let s = isa_state(200.0).unwrap().with_wind(10.0);
        let sig = low_altitude_sigma(200.0, wind_at_20ft(10.0));
        let expected = 0.5 * (sig.u * sig.u + sig.v * sig.v + sig.w * sig.w);
        assert!((DrydenEstimator::default().estimate_tke(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn builtins_resolve_by_name() {
        for n in ["dryden", "truth", "none"] {
            assert_eq!(builtin(n).unwrap().name(), n);
        }
        assert!(builtin("pstnet").is_none());
        let s = isa_state(1_000.0).unwrap().with_wind(5.0);
        assert!(builtin("truth").unwrap().estimate_tke(&s) >= crate::mophys::mo_tke(&s));
    }

    #[test]
    fn resolve_lists_every_absent_model() {
        let dir = tempfile::tempdir().unwrap();
        let names: Vec<String> = ["pstnet", "dryden", "gbt", "bogus"].iter().map(|s| s.to_string()).collect();
        let msg = resolve(&names, dir.path()).err().unwrap().to_string();
        assert!(msg.contains("pstnet (") && msg.contains("gbt (") && msg.contains("bogus (unknown"));
        assert!(!msg.contains("dryden"));
        let m = PstnetModel::init(crate::net::Dims::REFERENCE, 1);
        m.save(&dir.path().join("pstnet.bin")).unwrap();
        let ok = resolve(&names[..2], dir.path()).unwrap();
        assert_eq!(ok.iter().map(|e| e.name()).collect::<Vec<_>>(), vec!["pstnet", "dryden"]);
    }
}
