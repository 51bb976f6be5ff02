//! Numerical laboratory for mixed-norm Lebesgue spaces `L_P` on product
//! domains: iterated norms, triangular changes of variables, Hardy-type and
//! product integral operators, and operator-norm estimation by ratio
//! maximization.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod error;
pub mod expr;
pub mod grid;
pub mod lab;
pub mod map;
pub mod norm;
pub mod operators;

pub use error::{Error, Result};
pub use expr::{parse, ScalarFn};
pub use grid::{integrate, make_uniform_axis, slice_mask, Axis, DomainMask, GridFunction, ProductGrid};
pub use norm::{minkowski_gap, mixed_norm, slice_norm, slice_norm_profile, ExponentVector};
pub use map::{
    change_of_variables_check, pullback, Coverage, GeneralMap, Layer, PointMap, Pullback, PullbackPlan, TriangularMap,
};
pub use operators::{
    hardy_apply, hardy_constant, multiplication_apply, operator_i_apply, partial_apply, product_apply, steklov_apply,
    GridOperator, KernelSet, SteklovLimits,
};
pub use lab::{empirical_norm, NormReport, Strategy};
