use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridFunction, ProductGrid};
use crate::norm::ExponentVector;

const MAX_TABLE_DIM: usize = 8;

/// Integrals of the piecewise-constant extension of a grid function over
/// boxes `[lo_1, e_1] x ... x [lo_n, e_n]`, tabulated at every tuple of cell
/// edges (Lebesgue measure).
///
/// Between edges the integral is multilinear in the upper corner, so
/// [`CumulativeTable::eval`] is exact for the piecewise-constant integrand at
/// any point, not only at edges.
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    edges: Vec<Vec<f64>>,
    strides: Vec<usize>,
    values: Vec<f64>,
}

impl CumulativeTable {
    pub fn new(f: &GridFunction) -> Result<Self> {
        let grid = f.grid();
        let n = grid.dim();
        if n > MAX_TABLE_DIM {
            return Err(Error::Shape(format!("cumulative tables support at most {MAX_TABLE_DIM} axes, got {n}")));
        }
        let mut shape = grid.shape().to_vec();
        let mut data: Vec<f64> = f
            .values()
            .par_iter()
            .enumerate()
            .with_min_len(4096)
            .map(|(k, &v)| {
                if v == 0.0 {
                    return 0.0;
                }
                let mut vol = 1.0;
                let mut rest = k;
                for i in (0..n).rev() {
                    let m = grid.shape()[i];
                    vol *= grid.axis(i).cell_length(rest % m);
                    rest /= m;
                }
                v * vol
            })
            .collect();
        for axis in 0..n {
            let len = shape[axis];
            let inner: usize = shape[axis + 1..].iter().product();
            let outer: usize = shape[..axis].iter().product();
            let mut next = vec![0.0; outer * (len + 1) * inner];
            next.par_chunks_mut((len + 1) * inner)
                .zip(data.par_chunks(len * inner))
                .for_each(|(dst, src)| {
                    for k in 0..len {
                        for j in 0..inner {
                            dst[(k + 1) * inner + j] = dst[k * inner + j] + src[k * inner + j];
                        }
                    }
                });
            data = next;
            shape[axis] = len + 1;
        }
        let mut strides = vec![1; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        Ok(Self {
            edges: grid.axes().iter().map(|a| a.edges().to_vec()).collect(),
            strides,
            values: data,
        })
    }

    /// Integral over the box from the lower corner to `y`. Coordinates are
    /// clamped to the grid's box.
    pub fn eval(&self, y: &[f64]) -> f64 {
        let n = self.edges.len();
        let mut base = 0usize;
        let mut t = [0.0f64; MAX_TABLE_DIM];
        let mut st = [0usize; MAX_TABLE_DIM];
        for i in 0..n {
            let e = &self.edges[i];
            let m = e.len() - 1;
            let yi = y[i].clamp(e[0], e[m]);
            let j = e.partition_point(|&v| v <= yi).saturating_sub(1).min(m - 1);
            t[i] = (yi - e[j]) / (e[j + 1] - e[j]);
            st[i] = self.strides[i];
            base += j * self.strides[i];
        }
        let mut total = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for i in 0..n {
                if corner >> i & 1 == 1 {
                    w *= t[i];
                    idx += st[i];
                } else {
                    w *= 1.0 - t[i];
                }
            }
            if w != 0.0 {
                total += w * self.values[idx];
            }
        }
        total
    }
}

pub(crate) fn check_anchored(grid: &ProductGrid, what: &str) -> Result<()> {
    for axis in grid.axes() {
        if axis.lo() != 0.0 {
            return Err(Error::Config(format!(
                "{what} needs every axis to start at 0; axis '{}' starts at {}",
                axis.label(),
                axis.lo()
            )));
        }
    }
    Ok(())
}

/// `(H_n f)(x) = (1 / prod x_i) * int_0^{x_1} ... int_0^{x_n} f(y) dy` at every node.
///
/// `f` is extended piecewise-constantly over its cells, so the node's own cell
/// contributes the half lying below the node. The result lives on the full box.
pub fn hardy_apply(f: &GridFunction) -> Result<GridFunction> {
    let grid = f.grid();
    check_anchored(grid, "the Hardy operator")?;
    let table = CumulativeTable::new(f)?;
    let n = grid.dim();
    let mut out = vec![0.0; grid.len()];
    out.par_iter_mut()
        .enumerate()
        .with_min_len(2048)
        .for_each_init(
            || vec![0.0; n],
            |x, (k, o)| {
                grid.point(k, x);
                let denom: f64 = x.iter().product();
                *o = table.eval(x) / denom;
            },
        );
    GridFunction::new(grid.clone(), DomainMask::full(grid.shape()), out)
}

/// `prod_i p_i / (p_i - 1)`.
pub fn hardy_constant(p: &ExponentVector) -> Result<f64> {
    (0..p.len()).map(|i| p.hardy_factor(i)).product()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{lebesgue_axis, Axis};
    use crate::norm::mixed_norm;

    #[test]
    fn constants() {
        assert_eq!(hardy_constant(&ExponentVector::new(vec![2.0, 2.0]).unwrap()).unwrap(), 4.0);
        assert!((hardy_constant(&ExponentVector::new(vec![2.0, 3.0]).unwrap()).unwrap() - 3.0).abs() < 1e-15);
        let p = ExponentVector::new(vec![4.0]).unwrap();
        assert!((hardy_constant(&p).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let p = ExponentVector::new(vec![2.0, 1.0]).unwrap();
        assert!(matches!(hardy_constant(&p), Err(Error::HardyConstantUndefined { index: 2 })));
    }

    #[test]
    fn table_is_exact_for_piecewise_constants() {
        let g = ProductGrid::shared(vec![lebesgue_axis("y1", 0.0, 2.0, 4).unwrap(), lebesgue_axis("y2", 0.0, 1.0, 3).unwrap()]).unwrap();
        let f = GridFunction::from_fn(g.clone(), DomainMask::full(g.shape()), |y| 1.0 + y[0]).unwrap();
        let t = CumulativeTable::new(&f).unwrap();
        // Cells of width 0.5 with values 1.25, 1.75, 2.25, 2.75 along y1.
        assert!((t.eval(&[2.0, 1.0]) - 4.0).abs() < 1e-12);
        assert!((t.eval(&[0.75, 0.5]) - (0.5 * 1.25 + 0.25 * 1.75) * 0.5).abs() < 1e-12);
        assert_eq!(t.eval(&[0.0, 0.7]), 0.0);
        assert!((t.eval(&[9.0, 9.0]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_is_preserved() {
        let g = ProductGrid::shared(vec![lebesgue_axis("x1", 0.0, 3.0, 7).unwrap(), lebesgue_axis("x2", 0.0, 1.0, 5).unwrap()]).unwrap();
        let f = GridFunction::constant(g.clone(), DomainMask::full(g.shape()), 2.5).unwrap();
        let h = hardy_apply(&f).unwrap();
        for v in h.values() {
            assert!((v - 2.5).abs() < 1e-13);
        }
    }

    #[test]
    fn unanchored_axis_is_rejected() {
        let g = ProductGrid::shared(vec![lebesgue_axis("x1", 1.0, 3.0, 7).unwrap()]).unwrap();
        let f = GridFunction::constant(g.clone(), DomainMask::full(g.shape()), 1.0).unwrap();
        assert!(matches!(hardy_apply(&f), Err(Error::Config(_))));
    }

    fn graded(label: &str, top: f64, m: usize) -> Axis {
        // Edge at exactly 1 so indicators of [0, 1] are resolved.
        let inner = lebesgue_axis(label, 0.0, 1.0, m / 4).unwrap();
        let outer = Axis::log_graded(label, 1.0, top, m - m / 4, 1.0, 0.05, |_| Ok(1.0)).unwrap();
        let mut edges = inner.edges().to_vec();
        edges.extend_from_slice(&outer.edges()[1..]);
        Axis::midpoint(label, edges, |_| Ok(1.0)).unwrap()
    }

    #[test]
    fn indicator_ratio_one_dimension() {
        let g = ProductGrid::shared(vec![graded("x1", 1e4, 800)]).unwrap();
        let f = GridFunction::from_fn(g.clone(), DomainMask::full(g.shape()), |x| if x[0] <= 1.0 { 1.0 } else { 0.0 }).unwrap();
        let h = hardy_apply(&f).unwrap();
        let p = ExponentVector::new(vec![2.0]).unwrap();
        let r = mixed_norm(&h, &p).unwrap() / mixed_norm(&f, &p).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 0.01 * 2f64.sqrt(), "{r}");
    }

    #[test]
    fn indicator_ratio_two_dimensions() {
        let g: Arc<ProductGrid> = ProductGrid::shared(vec![graded("x1", 1e3, 300), graded("x2", 1e3, 300)]).unwrap();
        let f = GridFunction::from_fn(g.clone(), DomainMask::full(g.shape()), |x| {
            if x[0] <= 1.0 && x[1] <= 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let h = hardy_apply(&f).unwrap();
        let p = ExponentVector::new(vec![2.0, 2.0]).unwrap();
        let r = mixed_norm(&h, &p).unwrap() / mixed_norm(&f, &p).unwrap();
        assert!((r - 2.0).abs() < 0.04, "{r}");
    }
}
