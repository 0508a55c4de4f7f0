//! Corruption-robust linear contextual bandit simulation library.
//!
//! The pieces, bottom to top:
//!
//! - [`linalg`]: incrementally maintained weighted ridge-regression state;
//! - [`environment`]: bandit instances, decision-set generators, reward
//!   sampling, and the paired lower-bound construction;
//! - [`adversary`]: corruption strategies with exact budget ledgers for both
//!   the post-action level C and the pre-action level C′;
//! - [`policy`]: CW-OFUL plus the OFUL, enlarged-β OFUL, and greedy
//!   baselines, with the recommended hyperparameter formulas;
//! - [`harness`]: episode orchestration, regret curves, multi-seed
//!   aggregation, and scaling fits;
//! - [`diagnostics`]: trajectory-replay verification of the concentration,
//!   corruption-term, and elliptical-potential inequalities;
//! - [`config`] / [`runner`] / [`output`]: the TOML experiment format,
//!   parallel execution, and CSV/metadata emission behind the `cwoful` CLI.

pub mod adversary;
pub mod config;
pub mod diagnostics;
pub mod environment;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod output;
pub mod policy;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
