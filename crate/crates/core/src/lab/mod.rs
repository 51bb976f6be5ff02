//! Operator-norm formulas and empirical lower bounds by ratio maximization.

mod estimate;
mod formula;
mod probe;

pub use estimate::{
    empirical_norm, Estimator, NormReport, ProgressPoint, RefinementPoint, Strategy, Witness, ASCENT_WARMUP,
    LAYER_RADIUS,
};
pub use formula::{composition_norm_formula, multiplication_norm_formula, operator_i_norm_formula};
pub use probe::{divergence_probe, truncation_grid, ProbeGrid, ProbePoint};
