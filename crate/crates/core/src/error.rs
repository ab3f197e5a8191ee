use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: volume {volume:?} vs mask {mask:?}")]
    DimMismatch {
        volume: (usize, usize, usize),
        mask: (usize, usize, usize),
    },

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("truncated payload in {path}: expected {expected} bytes, got {got}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        got: usize,
    },

    #[error("payload does not match header dims in {path}: expected {expected} bytes, got {got}")]
    PayloadMismatch {
        path: PathBuf,
        expected: usize,
        got: usize,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error for study '{study}': {reason}")]
    Manifest { study: String, reason: String },

    #[error("phantom dims {dims:?} too small to place all anatomies (need at least {min:?})")]
    PhantomTooSmall {
        dims: (usize, usize, usize),
        min: (usize, usize, usize),
    },

    #[error("invalid phantom spec: {0}")]
    InvalidPhantomSpec(String),

    #[error("feature extraction failed for study '{study}', feature '{feature}': {reason}")]
    FeatureExtraction {
        study: String,
        feature: String,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("fold construction failed: {0}")]
    FoldPlan(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("unknown strategy '{name}' for {family} (known: {known:?})")]
    UnknownStrategy {
        family: &'static str,
        name: String,
        known: Vec<&'static str>,
    },

    #[error("fold {fold}: {source}")]
    InFold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
