//! Crate-wide error type.

use alloc::string::String;
use thiserror::Error;

/// Errors raised by kernel evaluation, threshold updates and risk metrics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("loss {loss} outside [0, {bound}]")]
    LossOutOfRange { loss: f64, bound: f64 },

    #[error("score {score} outside [0, {bound}]")]
    ScoreOutOfRange { score: f64, bound: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("truth set is empty; false-negative ratio is undefined")]
    EmptyTruth,

    #[error("candidate value {0} is not strictly positive; ratio regret is undefined")]
    NonPositiveValue(f64),

    #[error("value {value} exceeds the declared bound {bound}")]
    ValueAboveBound { value: f64, bound: f64 },

    #[error("time average is undefined before the first update")]
    AverageUndefined,

    #[error("Gram quadratic form is indefinite beyond tolerance: a'Ka = {0}")]
    IndefiniteGram(f64),

    #[error("total weight is not positive: {0}")]
    NonPositiveWeight(f64),

    #[error("partition returned cell {cell} but only {cells} cells exist")]
    CellOutOfRange { cell: usize, cells: usize },

    #[error("covariate is not covered by any partition cell")]
    UncoveredCovariate,
}

pub type Result<T> = core::result::Result<T, Error>;
