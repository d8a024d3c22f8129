//! Experiment harness for the `majlab` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod quadrature;

pub use config::{load_config, parse_config_str, CltScaling, ExperimentConfig, ExperimentKind, MRule, Overrides};
pub use error::{CliError, ConfigError};
pub use experiments::{replay_trial, run_experiment, summarise, RunOutput, SummaryRecord, TrialRecord};
