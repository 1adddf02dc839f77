//! Laboratory for potential-outcome time series: simulate treatment and
//! outcome paths, replay them under counterfactual treatments, compute causal
//! ground truth, and check estimators against it at scale.

pub mod bundle;
pub mod dgp;
pub mod error;
pub mod estimands;
pub mod estimators;
pub mod harness;
pub mod scenario;
pub mod seed;
pub mod stats;

pub use bundle::{PathBundle, TreatmentKind};
pub use error::{Error, ErrorKind, Result};
pub use scenario::ScenarioSpec;
pub use seed::{derive_streams, SeedStream, DEFAULT_MASTER_SEED, StreamLabel, StreamSet};
