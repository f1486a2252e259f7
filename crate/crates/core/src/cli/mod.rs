//! Experiment orchestration: declarative configs, reproducible manifests,
//! artifact emission, and the verification suites.

pub mod config;
pub mod emit;
pub mod manifest;
pub mod run;
pub mod verify;

pub use config::{ExperimentConfig, Scenario};
pub use manifest::RunManifest;
pub use run::{exit_code_for, run_experiment};
pub use verify::{criterion, run_suite, CriterionOutcome, Effort};
