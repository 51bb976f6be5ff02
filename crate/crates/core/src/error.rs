use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("invalid axis: {0}")]
    InvalidAxis(String),

    #[error("non-finite weight {value} at node {node} (x = {coordinate})")]
    NonFiniteWeight { node: usize, coordinate: f64, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid exponent vector: {0}")]
    Exponent(String),

    #[error("sharp Hardy constant p/(p-1) undefined for p = 1 (component {index})")]
    HardyConstantUndefined { index: usize },

    #[error("non-finite intermediate value in {0}")]
    Overflow(&'static str),

    #[error("invalid map: {0}")]
    MapInvalid(String),

    #[error("layer {layer}: value {value} outside range [{lo}, {hi}]")]
    Range { layer: usize, value: f64, lo: f64, hi: f64 },

    #[error("layer {layer}: singular Jacobian, |d psi/dx| = {derivative:e} at x = {at:?}")]
    SingularJacobian { layer: usize, derivative: f64, at: Vec<f64> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel {layer} is negative ({value}) at {at:?}")]
    NegativeKernel { layer: usize, value: f64, at: Vec<f64> },

    #[error("invalid integration limits: {0}")]
    Limits(String),

    #[error("configuration error: {0}")]
    Config(String),
}
