use std::sync::Arc;

use rayon::prelude::*;

use super::kernel::KernelSet;
use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::grid::{Axis, DomainMask, GridFunction, ProductGrid};

/// Variable limits `a_i(x) <= y_i <= b_i(x)` of a two-dimensional
/// Hardy-Steklov operator. Every limit is a function of `(x1, x2)`, so both
/// `b_1(x_1)` and `b_1(x_2)` conventions can be expressed.
#[derive(Debug, Clone)]
pub struct SteklovLimits {
    pub lower: [ScalarFn; 2],
    pub upper: [ScalarFn; 2],
}

impl SteklovLimits {
    pub fn new(lower: [ScalarFn; 2], upper: [ScalarFn; 2]) -> Self {
        Self { lower, upper }
    }

    /// Parse `[a1, a2]`, `[b1, b2]` over `x1, x2`.
    pub fn parse(lower: [&str; 2], upper: [&str; 2]) -> Result<Self> {
        let vars = ["x1", "x2"];
        Ok(Self {
            lower: [ScalarFn::parse(lower[0], &vars)?, ScalarFn::parse(lower[1], &vars)?],
            upper: [ScalarFn::parse(upper[0], &vars)?, ScalarFn::parse(upper[1], &vars)?],
        })
    }

    /// `a_i = 0`, `b_i = x_i`: the two-dimensional Hardy integral.
    pub fn hardy() -> Self {
        Self {
            lower: [ScalarFn::Const(0.0), ScalarFn::Const(0.0)],
            upper: [ScalarFn::native(2, |x| x[0]), ScalarFn::native(2, |x| x[1])],
        }
    }

    fn interval(&self, i: usize, x: &[f64]) -> Result<(f64, f64)> {
        let a = self.lower[i].eval(x)?;
        let b = self.upper[i].eval(x)?;
        if !(a <= b) {
            return Err(Error::Limits(format!(
                "a_{k} = {a} exceeds b_{k} = {b} at x = {x:?}",
                k = i + 1
            )));
        }
        Ok((a, b))
    }

    fn first_layer_ignores_x2(&self) -> bool {
        !self.lower[0].depends_on(1) && !self.upper[0].depends_on(1)
    }
}

/// Nonzero `(cell, weight * covered fraction)` pairs of `axis` for `[a, b]`.
fn covered(axis: &Axis, a: f64, b: f64, out: &mut Vec<(usize, f64)>) {
    out.clear();
    if b <= axis.lo() || a >= axis.hi() || a >= b {
        return;
    }
    let e = axis.edges();
    let first = e.partition_point(|&v| v <= a).saturating_sub(1);
    let last = e.partition_point(|&v| v < b).min(axis.len());
    for k in first..last {
        let c = axis.coverage(k, a, b);
        if c > 0.0 {
            out.push((k, c * axis.weights()[k]));
        }
    }
}

/// `(Kf)(x) = int_{a_1}^{b_1} int_{a_2}^{b_2} k_1(x_1, y_1) k_2(x_1, x_2, y_2) f(y) dy_2 dy_1`.
///
/// Limits are evaluated at node centres; cells cut by a limit contribute the
/// covered fraction of their weight.
pub fn steklov_apply(
    limits: &SteklovLimits,
    kernels: &KernelSet,
    f: &GridFunction,
    x_grid: &Arc<ProductGrid>,
    x_mask: &DomainMask,
) -> Result<GridFunction> {
    let y = f.grid();
    if y.dim() != 2 || x_grid.dim() != 2 || kernels.len() != 2 {
        return Err(Error::Config("the Hardy-Steklov operator is two-dimensional".into()));
    }
    let (x1a, x2a) = (x_grid.axis(0), x_grid.axis(1));
    let (y1a, y2a) = (y.axis(0), y.axis(1));
    let m2 = y2a.len();
    let g = f.values();
    let mut out = vec![0.0; x_grid.len()];
    let factored = limits.first_layer_ignores_x2();

    let first_layer = |x1: f64, x2: f64, cells: &mut Vec<(usize, f64)>| -> Result<()> {
        let (a, b) = limits.interval(0, &[x1, x2])?;
        covered(y1a, a, b, cells);
        for (j, c) in cells.iter_mut() {
            let k = kernels.eval(0, &[x1], y1a.nodes()[*j])?;
            check_sign(0, k, &[x1, y1a.nodes()[*j]])?;
            *c *= k;
        }
        Ok(())
    };
    let second_layer = |x1: f64, x2: f64, cells: &mut Vec<(usize, f64)>| -> Result<()> {
        let (a, b) = limits.interval(1, &[x1, x2])?;
        covered(y2a, a, b, cells);
        for (l, c) in cells.iter_mut() {
            let k = kernels.eval(1, &[x1, x2], y2a.nodes()[*l])?;
            check_sign(1, k, &[x1, x2, y2a.nodes()[*l]])?;
            *c *= k;
        }
        Ok(())
    };

    out.par_chunks_mut(x2a.len()).enumerate().try_for_each(|(r, row)| -> Result<()> {
        let x1 = x1a.nodes()[r];
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        if factored {
            first_layer(x1, x2a.nodes()[0], &mut c1)?;
            let mut h = vec![0.0; m2];
            for &(j, c) in &c1 {
                for (hv, gv) in h.iter_mut().zip(&g[j * m2..(j + 1) * m2]) {
                    *hv += c * gv;
                }
            }
            for (o, &x2) in row.iter_mut().zip(x2a.nodes()) {
                second_layer(x1, x2, &mut c2)?;
                *o = c2.iter().map(|&(l, c)| c * h[l]).sum();
            }
        } else {
            for (o, &x2) in row.iter_mut().zip(x2a.nodes()) {
                first_layer(x1, x2, &mut c1)?;
                second_layer(x1, x2, &mut c2)?;
                *o = c1
                    .iter()
                    .map(|&(j, cj)| cj * c2.iter().map(|&(l, cl)| cl * g[j * m2 + l]).sum::<f64>())
                    .sum();
            }
        }
        Ok(())
    })?;
    GridFunction::new(x_grid.clone(), x_mask.clone(), out)
}

fn check_sign(layer: usize, k: f64, at: &[f64]) -> Result<()> {
    if k >= 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeKernel {
            layer: layer + 1,
            value: k,
            at: at.to_vec(),
        })
    }
}
