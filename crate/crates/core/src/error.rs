use thiserror::Error;

/// Errors raised while building or transforming the physical model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid collocation order {0} (need n >= 2)")]
    InvalidOrder(usize),
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("assembly failed: singular boundary block at row `{row}`")]
    Assembly { row: String },
    #[error("phi2 elimination failed: {0}")]
    Elimination(String),
    #[error("mass matrix is singular")]
    SingularMass,
    #[error("domain error: {0}")]
    Domain(String),
}

/// Errors from reduction and linear-algebra kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("matrix is not Hurwitz (max Re lambda = {0:e})")]
    NotStable(f64),
    #[error("ambiguous integrator split: eigenvalue {re:e}{im:+e}i lies in the gap band")]
    AmbiguousSplit { re: f64, im: f64 },
    #[error("{grammian} grammian is rank deficient (relative Hankel value {ratio:e})")]
    Degenerate { grammian: &'static str, ratio: f64 },
    #[error("passivity violation: lumped integrator gain {0:e} is not positive")]
    Passivity(f64),
    #[error("invalid order r = {r} for system of order {n}")]
    InvalidOrder { r: usize, n: usize },
    #[error("no integrator modes found")]
    NoIntegrators,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Errors from network synthesis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("unsupported pole structure: {0}")]
    PoleStructure(String),
    #[error("not RC realizable: {0}")]
    NotRc(String),
    #[error("not positive real: {0}")]
    NotPositiveReal(String),
    #[error("improper rational function")]
    Improper,
}

/// Errors from time-domain simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("concentration {c:e} below floor at node {node}, t = {t:e} s")]
    ConcentrationFloor { t: f64, node: usize, c: f64 },
    #[error("step size underflow at t = {0:e} s")]
    StepUnderflow(f64),
    #[error("singular Newton matrix at t = {0:e} s")]
    Singular(f64),
    #[error("invalid simulation setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Umbrella error for pipeline-level helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
