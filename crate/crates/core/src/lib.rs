//! Staked credit-point voting for medical insurance catalogue curation.
//!
//! Doctor agents vote on treatments by staking credit points and rate each
//! other's votes with signed stakes. Each stage is settled with per-agent
//! normalized credit changes, written to a hash-chained ledger, and a Monte
//! Carlo harness aggregates many stages and replicates into catalogue
//! decisions.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod canonical;
pub mod catalogue;
pub mod cli;
pub mod config;
pub mod io;
pub mod ledger;
pub mod policy;
pub mod rng;
pub mod settlement;
pub mod sim;
pub mod stats;
pub mod sweep;
pub mod types;

pub use catalogue::{aggregate_scores, decide_catalogue, CatalogueDecision};
pub use config::{BalanceDistribution, ConfigError, SimConfig};
pub use ledger::{ChainStatus, CreditLedger, Digest, StageInput, StageRecord};
pub use policy::{PolicyConfig, PolicyMode, RateBounds, SignModel};
pub use settlement::{settle_stage, settle_stage_with, CoefficientScope, SettlementRules, StageSubmissions};
pub use sim::{run_simulation, RunTrace};
pub use sweep::{sweep_staking_rate, SweepTable};
pub use types::*;
