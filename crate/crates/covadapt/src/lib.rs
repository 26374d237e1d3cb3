//! File formats, external oracles, evaluation harness and the `covadapt`
//! command-line tool around [`covadapt_core`].

pub mod cli;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod output;
pub mod remote;
pub mod synthetic;

pub use error::{Error, Result};
