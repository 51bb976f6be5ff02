//! Iterated `L_P` norms on product grids.
//!
//! The norm is evaluated innermost axis first: the `p_n` norm along the last
//! axis, then the `p_{n-1}` norm of that profile along the next axis, and so
//! on out to `p_1`. Every intermediate is itself a slice norm, and each 1-D
//! reduction is scaled by its largest entry before raising to a power, so
//! exponent ratios like `p_{k}/p_{k+1}` never overflow in the middle of the
//! computation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum_by, scaled_pnorm, GridFunction, PAR_THRESHOLD};

/// Exponents `P = (p_1, ..., p_n)` with `1 <= p_i < inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ExponentVector(Vec<f64>);

impl ExponentVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Exponent("at least one exponent is required".into()));
        }
        for (i, &pi) in p.iter().enumerate() {
            if !(pi.is_finite() && pi >= 1.0) {
                return Err(Error::Exponent(format!("p_{} = {pi} is not in [1, inf)", i + 1)));
            }
        }
        Ok(Self(p))
    }

    pub fn uniform(p: f64, n: usize) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `(p_2, ..., p_n)`, or `None` for a single exponent.
    pub fn tail(&self) -> Option<ExponentVector> {
        (self.0.len() > 1).then(|| ExponentVector(self.0[1..].to_vec()))
    }

    /// `p_i / (p_i - 1)`; undefined at `p_i = 1`.
    pub fn hardy_factor(&self, i: usize) -> Result<f64> {
        let p = self.0[i];
        if p == 1.0 {
            return Err(Error::HardyConstantUndefined { index: i + 1 });
        }
        Ok(p / (p - 1.0))
    }

    /// Hölder conjugate of `p_i`; infinite when `p_i = 1`.
    pub fn conjugate(&self, i: usize) -> f64 {
        conjugate_exponent(self.0[i])
    }
}

impl TryFrom<Vec<f64>> for ExponentVector {
    type Error = Error;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ExponentVector> for Vec<f64> {
    fn from(p: ExponentVector) -> Self {
        p.0
    }
}

pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Weighted `p`-norm of a 1-D sample; `p = inf` gives the max over positively weighted entries.
pub fn weighted_pnorm(values: &[f64], weights: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        values
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .fold(0.0f64, |m, (v, _)| m.max(v.abs()))
    } else {
        scaled_pnorm(values, weights, p)
    }
}

fn check_dims(f: &GridFunction, p: &ExponentVector) -> Result<()> {
    if f.dim() != p.len() {
        return Err(Error::Shape(format!(
            "function is {}-dimensional but {} exponents were given",
            f.dim(),
            p.len()
        )));
    }
    Ok(())
}

/// Reduce the trailing axes `stop..n` of `f` by their iterated norms, leaving
/// an array over axes `0..stop`.
fn reduce_to(f: &GridFunction, p: &ExponentVector, stop: usize) -> Vec<f64> {
    let grid = f.grid();
    let mut cur: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    for level in (stop..f.dim()).rev() {
        let axis = grid.axis(level);
        let m = axis.len();
        let w = axis.weights();
        let pk = p.get(level);
        let rows = cur.len() / m;
        let mut next = vec![0.0; rows];
        if cur.len() >= PAR_THRESHOLD {
            next.par_iter_mut()
                .with_min_len((PAR_THRESHOLD / m).max(1))
                .enumerate()
                .for_each(|(r, out)| *out = scaled_pnorm(&cur[r * m..(r + 1) * m], w, pk));
        } else {
            for (r, out) in next.iter_mut().enumerate() {
                *out = scaled_pnorm(&cur[r * m..(r + 1) * m], w, pk);
            }
        }
        cur = next;
    }
    cur
}

/// `||f||_{L_P(Omega)}`, with `Omega` the mask of `f`.
pub fn mixed_norm(f: &GridFunction, p: &ExponentVector) -> Result<f64> {
    check_dims(f, p)?;
    let v = reduce_to(f, p, 0)[0];
    if !v.is_finite() {
        return Err(Error::Overflow("mixed_norm"));
    }
    Ok(v)
}

/// Slice norms `x_1 -> ||f(x_1, .)||_{L_{P~}(Omega_{x_1})}` for every node of the first axis.
pub fn slice_norm_profile(f: &GridFunction, p: &ExponentVector) -> Result<Vec<f64>> {
    check_dims(f, p)?;
    let prof = reduce_to(f, p, 1);
    if prof.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("slice_norm_profile"));
    }
    Ok(prof)
}

/// `||f(x_1, .)||_{L_{P~}(Omega_{x_1})}` at the first-axis node `x1_index`.
pub fn slice_norm(f: &GridFunction, p_tail: &ExponentVector, x1_index: usize) -> Result<f64> {
    if f.dim() < 2 {
        return Err(Error::Shape("slice norms need at least two axes".into()));
    }
    let m = f.grid().axis(0).len();
    if x1_index >= m {
        return Err(Error::Index(format!("x1 index {x1_index} on an axis of {m} nodes")));
    }
    let slice = f.slice(&[x1_index])?;
    mixed_norm(&slice, p_tail)
}

/// Both sides of Minkowski's integral inequality for a two-variable `f`:
/// `lhs = (int |int f dmu_1|^p dmu_2)^(1/p)`, `rhs = int (int |f|^p dmu_2)^(1/p) dmu_1`.
pub fn minkowski_gap(f: &GridFunction, p: f64) -> Result<(f64, f64)> {
    if f.dim() != 2 {
        return Err(Error::Shape("Minkowski check needs a two-variable function".into()));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Exponent(format!("p = {p} is not in [1, inf)")));
    }
    let grid = f.grid();
    let (a1, a2) = (grid.axis(0), grid.axis(1));
    let (m1, m2) = (a1.len(), a2.len());
    let (w1, w2) = (a1.weights(), a2.weights());
    let v = f.values();

    let inner: Vec<f64> = (0..m2)
        .map(|j| pairwise_sum_by(0, m1, &|i| w1[i] * v[i * m2 + j]))
        .collect();
    let lhs = scaled_pnorm(&inner, w2, p);

    let slice_norms: Vec<f64> = (0..m1).map(|i| scaled_pnorm(&v[i * m2..(i + 1) * m2], w2, p)).collect();
    let rhs = pairwise_sum_by(0, m1, &|i| w1[i] * slice_norms[i]);
    Ok((lhs, rhs))
}
