use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("exponential expansion needs order {required}, allowed {allowed}")]
    ExpansionNotConverged { required: usize, allowed: usize },

    #[error("target gate is not unitary (defect {defect:.3e})")]
    NonUnitaryTarget { defect: f64 },

    #[error("phase of diagonal element {index} is undefined (|tau| = {magnitude:.3e})")]
    UndefinedPhase { index: usize, magnitude: f64 },

    #[error("functional increased by {increase:.3e} (J_T {before:.12e} -> {after:.12e})")]
    NonMonotonic { before: f64, after: f64, increase: f64 },

    #[error("update produced a non-finite control value at step {step}")]
    NonFinite { step: usize },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("candidate E0 = {e0} MHz, T = {duration} ns: {source}")]
    Candidate {
        e0: f64,
        duration: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("empty report: {0}")]
    EmptyReport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
