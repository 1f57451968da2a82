use thiserror::Error;

use crate::whitney::TruncationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point {point:?} is not inside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("grid with spacing {h} has no interior nodes")]
    NoInteriorNodes { h: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error(
        "decomposition selected no cubes ({} cubes truncated at level {})",
        .0.truncated_cubes, .0.k_max
    )]
    EmptyDecomposition(TruncationReport),

    #[error("point {point:?} lies in the truncated boundary shell (delta = {delta:e}, cutoff = {cutoff:e})")]
    PartialCoverage { point: Vec<f64>, delta: f64, cutoff: f64 },

    #[error("exponential overflow at node {node}: |value| = {value:e} exceeds {limit}")]
    Overflow { node: usize, value: f64, limit: f64 },

    #[error("series overflow for argument {0:e}")]
    SeriesOverflow(f64),

    #[error("series did not reach its tail bound within {0} terms")]
    SeriesTruncated(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("line search failed at Newton iteration {iteration}: step {step:e}, energy {energy:e}, slope {slope:e}")]
    LineSearchFailed {
        iteration: usize,
        step: f64,
        energy: f64,
        slope: f64,
    },

    #[error("Newton iteration did not converge in {iterations} steps (gradient norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
