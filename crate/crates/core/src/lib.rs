//! Covariate adaptation for black-box univariate forecasters.
//!
//! A two-stage procedure wraps any univariate forecaster (the oracle):
//! Stage I labels a few historical windows with the oracle and fits a
//! Bayesian ridge generator that produces pseudo-forecasts for every step;
//! Stage II fits a composite-kernel GP on pseudo-forecasts plus covariates
//! and reverts to the oracle wherever the GP is too uncertain.
//!
//! The crate is `no_std` with `alloc`. IO, file formats and the CLI live in
//! the `covadapt` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adapter;
pub mod bayes;
pub mod error;
pub mod features;
pub mod filter;
pub mod gp;
pub mod instance;
pub mod kernel;
pub mod linalg;
pub(crate) mod math;
pub mod metrics;
pub mod oracle;
pub mod pseudo;
pub mod tune;

pub use adapter::{run_adapter, run_stage1, AdapterConfig, AdapterOutcome, Stage1Report};
pub use bayes::{fit_bayes_ridge, fit_bayes_ridge_or_constant, BayesRidgeModel, BayesRidgeOptions};
pub use error::{Error, Result};
pub use features::{lag_matrix, lag_vector, positional_encoding, select_windows, WindowChoice, WindowStrategy};
pub use filter::{quantile, tune_filter_threshold, uncertainty_filter, FilterCandidate, FilterChoice};
pub use gp::{gp_fit, gp_predict, GpModel, Scaling};
pub use instance::{ForecastResult, TaskSpec, TimeSeriesInstance};
pub use kernel::{kernel_eval, KernelConfig, KernelKind, KernelParams};
pub use linalg::{Cholesky, Matrix};
pub use metrics::{mae, mase, rmse, smape};
pub use oracle::{CallLedger, MeteredOracle, Oracle, OracleForecast, OracleRequest};
pub use pseudo::{build_stage1_training_set, fit_generator, generate_pseudo_forecasts, PseudoForecasts, Stage1Data};
pub use tune::{tune_gp, FeatureSubset, SearchSpace, Stage2Rows, TuneOutcome};
