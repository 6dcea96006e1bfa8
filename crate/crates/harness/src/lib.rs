//! Experiment runner for the terradapt simulator: a TOML config in, CSV
//! reports and a run manifest out.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::run;
pub use report::{Check, Hygiene, Outcome};
