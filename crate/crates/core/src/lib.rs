//! Physics-structured turbulence estimation: a Monin–Obukhov backbone with a
//! small gated mixture-of-experts residual, plus the data generation,
//! training, baselines, guidance simulation and statistics used to
//! evaluate it.

pub mod atmos;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod ingest;
pub mod mophys;
pub mod net;
pub mod service;
pub mod sim;
pub mod stats;
pub mod train;

pub use atmos::{AtmosphericState, Regime, RegimeTarget};
pub use error::{Error, Result};
pub use net::{PstnetModel, TurbulenceEstimator};
