use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::grid::{Axis, DomainMask, GridFunction, ProductGrid};
use crate::norm::{conjugate_exponent, weighted_pnorm, ExponentVector};

/// Kernel of layer `i` (0-based).
#[derive(Debug, Clone)]
pub enum Kernel {
    /// `k(x_1, ..., x_{i+1}, y_{i+1})`.
    General(ScalarFn),
    /// `u(x_{i+1}) * v(y_{i+1})`.
    RankOne { u: ScalarFn, v: ScalarFn },
}

/// Kernels `k_1, ..., k_n` of a product operator
/// `(Kf)(x) = int prod_i k_i(x_1, ..., x_i, y_i) f(y) dnu(y)`.
#[derive(Debug, Clone)]
pub struct KernelSet {
    kernels: Vec<Kernel>,
}

impl KernelSet {
    pub fn new(kernels: Vec<Kernel>) -> Self {
        Self { kernels }
    }

    /// Kernel `i` is parsed over `x1, ..., x<i>, y<i>`.
    pub fn parse<S: AsRef<str>>(sources: &[S]) -> Result<Self> {
        let kernels = sources
            .iter()
            .enumerate()
            .map(|(i, src)| {
                let mut names: Vec<String> = (1..=i + 1).map(|k| format!("x{k}")).collect();
                names.push(format!("y{}", i + 1));
                let vars: Vec<&str> = names.iter().map(String::as_str).collect();
                Ok(Kernel::General(ScalarFn::parse(src.as_ref(), &vars)?))
            })
            .collect::<Result<_>>()?;
        Ok(Self { kernels })
    }

    /// `k_i = chi_{[0, x_i]}(y_i)`.
    pub fn hardy(n: usize) -> Self {
        let kernels = (0..n)
            .map(|i| {
                Kernel::General(ScalarFn::native(i + 2, move |a| {
                    let (x, y) = (a[i], a[i + 1]);
                    if (0.0..=x).contains(&y) {
                        1.0
                    } else {
                        0.0
                    }
                }))
            })
            .collect();
        Self { kernels }
    }

    pub fn ones(n: usize) -> Self {
        Self {
            kernels: vec![Kernel::General(ScalarFn::Const(1.0)); n],
        }
    }

    pub fn rank_one(pairs: Vec<(ScalarFn, ScalarFn)>) -> Self {
        Self {
            kernels: pairs.into_iter().map(|(u, v)| Kernel::RankOne { u, v }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    /// `x` holds `x_1, ..., x_{i+1}`.
    pub fn eval(&self, i: usize, x: &[f64], y: f64) -> Result<f64> {
        match &self.kernels[i] {
            Kernel::General(k) => {
                let mut args = [0.0; 9];
                if x.len() < args.len() {
                    args[..x.len()].copy_from_slice(x);
                    args[x.len()] = y;
                    Ok(k.eval(&args[..=x.len()])?)
                } else {
                    let mut v = x.to_vec();
                    v.push(y);
                    Ok(k.eval(&v)?)
                }
            }
            Kernel::RankOne { u, v } => Ok(u.eval(&[x[i]])? * v.eval(&[y])?),
        }
    }

    /// True when kernel `i` ignores `x_1, ..., x_i`.
    pub fn prefix_free(&self, i: usize) -> bool {
        match &self.kernels[i] {
            Kernel::General(k) => !(0..i).any(|s| k.depends_on(s)),
            Kernel::RankOne { .. } => true,
        }
    }

    /// `|x_axis| x |y_axis|` table of kernel `i` at the given prefix, checked for sign.
    pub(crate) fn tabulate(&self, i: usize, prefix: &[f64], x_axis: &Axis, y_axis: &Axis) -> Result<Vec<f64>> {
        let (xs, ys) = (x_axis.nodes(), y_axis.nodes());
        let mut table = Vec::with_capacity(xs.len() * ys.len());
        let mut args = prefix.to_vec();
        args.push(0.0);
        for &x in xs {
            args[i] = x;
            for &y in ys {
                let k = self.eval(i, &args, y)?;
                if !(k >= 0.0) || !k.is_finite() {
                    let mut at = args.clone();
                    at.push(y);
                    return Err(Error::NegativeKernel {
                        layer: i + 1,
                        value: k,
                        at,
                    });
                }
                table.push(k);
            }
        }
        Ok(table)
    }

    /// Exact norms `C_i = ||u_i||_{p_i} * ||v_i||_{q_i'}` of rank-one partial
    /// operators from `L_{q_i}(Y_i)` to `L_{p_i}(X_i)`.
    pub fn rank_one_constants(
        &self,
        x: &ProductGrid,
        y: &ProductGrid,
        p: &ExponentVector,
        q: &ExponentVector,
    ) -> Result<Vec<f64>> {
        self.kernels
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let Kernel::RankOne { u, v } = k else {
                    return Err(Error::Config(format!("kernel {} is not rank-one", i + 1)));
                };
                let (xa, ya) = (x.axis(i), y.axis(i));
                let us: Vec<f64> = xa.nodes().iter().map(|&t| u.eval(&[t])).collect::<Result<_, _>>()?;
                let vs: Vec<f64> = ya.nodes().iter().map(|&t| v.eval(&[t])).collect::<Result<_, _>>()?;
                let q_dual = conjugate_exponent(q.get(i));
                Ok(weighted_pnorm(&us, xa.weights(), p.get(i)) * weighted_pnorm(&vs, ya.weights(), q_dual))
            })
            .collect()
    }

    /// `f(y) = prod_i sign(v_i) |v_i(y_i)|^{q_i' - 1}`, which attains equality in
    /// Hoelder's inequality against `prod_i v_i`.
    pub fn holder_extremal(&self, y: &Arc<ProductGrid>, q: &ExponentVector) -> Result<GridFunction> {
        let mut factors = Vec::with_capacity(self.len());
        for (i, k) in self.kernels.iter().enumerate() {
            let Kernel::RankOne { v, .. } = k else {
                return Err(Error::Config(format!("kernel {} is not rank-one", i + 1)));
            };
            if q.get(i) == 1.0 {
                return Err(Error::Exponent("Hoelder extremal needs q_i > 1".into()));
            }
            let e = conjugate_exponent(q.get(i)) - 1.0;
            let vals: Vec<f64> = y
                .axis(i)
                .nodes()
                .iter()
                .map(|&t| v.eval(&[t]).map(|s| s.signum() * s.abs().powf(e)))
                .collect::<Result<_, _>>()?;
            factors.push(vals);
        }
        let mut idx = vec![0usize; y.dim()];
        let values = (0..y.len())
            .map(|k| {
                y.unravel(k, &mut idx);
                idx.iter().enumerate().map(|(i, &j)| factors[i][j]).product()
            })
            .collect();
        GridFunction::new(y.clone(), DomainMask::full(y.shape()), values)
    }
}

struct Schedule<'a> {
    kernels: &'a KernelSet,
    x: &'a ProductGrid,
    y: &'a ProductGrid,
    fixed: Vec<Option<Vec<f64>>>,
}

impl Schedule<'_> {
    /// Apply layers `l..n` to `g` (values over `Y_l x ... x Y_n`) writing
    /// values over `X_l x ... x X_n` into `out`.
    fn level(&self, l: usize, prefix: &mut Vec<f64>, g: &[f64], out: &mut [f64]) -> Result<()> {
        let (xa, ya) = (self.x.axis(l), self.y.axis(l));
        let owned;
        let table: &[f64] = match &self.fixed[l] {
            Some(t) => t,
            None => {
                owned = self.kernels.tabulate(l, prefix, xa, ya)?;
                &owned
            }
        };
        let (nx, ny) = (xa.len(), ya.len());
        let inner_y = g.len() / ny;
        let inner_x = out.len() / nx;
        let wy = ya.weights();
        let mut h = vec![0.0; inner_y];
        for a in 0..nx {
            h.iter_mut().for_each(|v| *v = 0.0);
            for b in 0..ny {
                let c = table[a * ny + b] * wy[b];
                if c != 0.0 {
                    for (hv, gv) in h.iter_mut().zip(&g[b * inner_y..(b + 1) * inner_y]) {
                        *hv += c * gv;
                    }
                }
            }
            if l + 1 == self.kernels.len() {
                out[a] = h[0];
            } else {
                prefix.push(xa.nodes()[a]);
                self.level(l + 1, prefix, &h, &mut out[a * inner_x..(a + 1) * inner_x])?;
                prefix.pop();
            }
        }
        Ok(())
    }
}

/// Apply the product operator to `f` (on the `y` grid), producing values on
/// `(x_grid, x_mask)`.
///
/// The integral is evaluated as nested one-dimensional sums, outermost
/// variable first: for each `x_1` the `y_1` integral collapses `f` to a
/// function of `(y_2, ..., y_n)`, which is then fed to the remaining layers
/// with `x_1` fixed.
pub fn product_apply(
    kernels: &KernelSet,
    f: &GridFunction,
    x_grid: &Arc<ProductGrid>,
    x_mask: &DomainMask,
) -> Result<GridFunction> {
    let y = f.grid();
    let n = y.dim();
    if kernels.len() != n || x_grid.dim() != n {
        return Err(Error::Shape(format!(
            "{} kernels for a {n}-dimensional input and {}-dimensional output",
            kernels.len(),
            x_grid.dim()
        )));
    }
    let fixed = (0..n)
        .map(|i| {
            if kernels.prefix_free(i) {
                let prefix = vec![0.0; i];
                kernels.tabulate(i, &prefix, x_grid.axis(i), y.axis(i)).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let sched = Schedule {
        kernels,
        x: x_grid,
        y,
        fixed,
    };
    let mut out = vec![0.0; x_grid.len()];
    if n == 1 {
        sched.level(0, &mut Vec::new(), f.values(), &mut out)?;
    } else {
        // Split the outermost layer across threads: one x_1 row per task.
        let (xa, ya) = (x_grid.axis(0), y.axis(0));
        let row_x = x_grid.len() / xa.len();
        let row_y = y.len() / ya.len();
        let first = match &sched.fixed[0] {
            Some(t) => t.clone(),
            None => kernels.tabulate(0, &[], xa, ya)?,
        };
        let g = f.values();
        out.par_chunks_mut(row_x).enumerate().try_for_each(|(a, dst)| -> Result<()> {
            let mut h = vec![0.0; row_y];
            for (b, w) in ya.weights().iter().enumerate() {
                let c = first[a * ya.len() + b] * w;
                if c != 0.0 {
                    for (hv, gv) in h.iter_mut().zip(&g[b * row_y..(b + 1) * row_y]) {
                        *hv += c * gv;
                    }
                }
            }
            sched.level(1, &mut vec![xa.nodes()[a]], &h, dst)
        })?;
    }
    GridFunction::new(x_grid.clone(), x_mask.clone(), out)
}

/// `(K_i g)(x_i) = int k_i(x_1, ..., x_i, y_i) g(y_i) dnu_i` on `x_axis`,
/// with `x_prefix = (x_1, ..., x_{i-1})` and `i` 0-based.
pub fn partial_apply(
    kernels: &KernelSet,
    i: usize,
    g: &GridFunction,
    x_prefix: &[f64],
    x_axis: &Axis,
) -> Result<GridFunction> {
    if g.dim() != 1 || x_prefix.len() != i || i >= kernels.len() {
        return Err(Error::Shape(format!(
            "partial operator {} needs a 1-D function and a prefix of length {i}",
            i + 1
        )));
    }
    let ya = g.grid().axis(0);
    let table = kernels.tabulate(i, x_prefix, x_axis, ya)?;
    let ny = ya.len();
    let values = (0..x_axis.len())
        .map(|a| {
            crate::grid::pairwise_sum_by(0, ny, &|b| table[a * ny + b] * ya.weights()[b] * g.values()[b])
        })
        .collect();
    let grid = ProductGrid::shared(vec![x_axis.clone()])?;
    let mask = DomainMask::full(grid.shape());
    GridFunction::new(grid, mask, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lebesgue_axis;

    fn line(label: &str, a: f64, b: f64, m: usize) -> Arc<ProductGrid> {
        ProductGrid::shared(vec![lebesgue_axis(label, a, b, m).unwrap()]).unwrap()
    }

    fn brute_force(kernels: &KernelSet, f: &GridFunction, x: &ProductGrid) -> Vec<f64> {
        let y = f.grid();
        let n = y.dim();
        let (mut xp, mut yp) = (vec![0.0; n], vec![0.0; n]);
        (0..x.len())
            .map(|a| {
                x.point(a, &mut xp);
                (0..y.len())
                    .map(|b| {
                        y.point(b, &mut yp);
                        let k: f64 = (0..n).map(|i| kernels.eval(i, &xp[..=i], yp[i]).unwrap()).product();
                        k * y.weight(b) * f.values()[b]
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn factored_schedule_matches_brute_force() {
        let y = ProductGrid::shared(vec![
            lebesgue_axis("y1", 0.0, 1.0, 6).unwrap(),
            lebesgue_axis("y2", 0.0, 2.0, 5).unwrap(),
            lebesgue_axis("y3", -1.0, 1.0, 4).unwrap(),
        ])
        .unwrap();
        let x = ProductGrid::shared(vec![
            lebesgue_axis("x1", 0.0, 1.0, 3).unwrap(),
            lebesgue_axis("x2", 0.0, 1.0, 4).unwrap(),
            lebesgue_axis("x3", 0.0, 1.0, 2).unwrap(),
        ])
        .unwrap();
        let kernels = KernelSet::parse(&["exp(-abs(x1-y1))", "1 + x1*x2*y2", "chi(0, x1 + x3, y3 + 1)"]).unwrap();
        let f = GridFunction::from_fn(y.clone(), DomainMask::full(y.shape()), |p| 1.0 + p[0] * p[1] - p[2]).unwrap();
        let fast = product_apply(&kernels, &f, &x, &DomainMask::full(x.shape())).unwrap();
        for (a, b) in fast.values().iter().zip(brute_force(&kernels, &f, &x)) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn hardy_kernels_give_hardy_numerator() {
        let g = ProductGrid::shared(vec![lebesgue_axis("y1", 0.0, 1.0, 200).unwrap(), lebesgue_axis("y2", 0.0, 1.0, 200).unwrap()]).unwrap();
        let f = GridFunction::from_fn(g.clone(), DomainMask::full(g.shape()), |y| y[0] + 2.0 * y[1]).unwrap();
        let k = product_apply(&KernelSet::hardy(2), &f, &g, &DomainMask::full(g.shape())).unwrap();
        let mut x = [0.0; 2];
        for (idx, v) in k.values().iter().enumerate() {
            g.point(idx, &mut x);
            let exact = x[0] * x[0] * x[1] / 2.0 + x[0] * x[1] * x[1];
            // Nodal quadrature counts the whole cell below each node: O(h) excess.
            assert!((v - exact).abs() < 1.5e-2, "{v} vs {exact}");
        }
    }

    #[test]
    fn rank_one_factorizes() {
        let y = ProductGrid::shared(vec![lebesgue_axis("y1", 0.0, 1.0, 8).unwrap(), lebesgue_axis("y2", 0.0, 1.0, 9).unwrap()]).unwrap();
        let x = ProductGrid::shared(vec![lebesgue_axis("x1", 0.0, 2.0, 5).unwrap(), lebesgue_axis("x2", 0.0, 1.0, 3).unwrap()]).unwrap();
        let kernels = KernelSet::rank_one(vec![
            (ScalarFn::parse("1 + x", &["x"]).unwrap(), ScalarFn::parse("y^2", &["y"]).unwrap()),
            (ScalarFn::parse("exp(x)", &["x"]).unwrap(), ScalarFn::parse("1 - y", &["y"]).unwrap()),
        ]);
        let f = GridFunction::from_fn(y.clone(), DomainMask::full(y.shape()), |p| (1.0 + p[0]) * p[1]).unwrap();
        let kf = product_apply(&kernels, &f, &x, &DomainMask::full(x.shape())).unwrap();
        let dot = |axis: &Axis, v: &dyn Fn(f64) -> f64, fi: &dyn Fn(f64) -> f64| -> f64 {
            axis.nodes().iter().zip(axis.weights()).map(|(&t, w)| w * v(t) * fi(t)).sum()
        };
        let c = dot(y.axis(0), &|t| t * t, &|t| 1.0 + t) * dot(y.axis(1), &|t| 1.0 - t, &|t| t);
        let mut p = [0.0; 2];
        for (k, v) in kf.values().iter().enumerate() {
            x.point(k, &mut p);
            let expected = (1.0 + p[0]) * p[1].exp() * c;
            assert!((v - expected).abs() < 1e-13 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn zero_input_and_negative_kernel() {
        let g = line("y1", 0.0, 1.0, 10);
        let zero = GridFunction::zeros(g.clone(), DomainMask::full(g.shape())).unwrap();
        let out = product_apply(&KernelSet::hardy(1), &zero, &g, &DomainMask::full(g.shape())).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        let neg = KernelSet::parse(&["x1 - y1"]).unwrap();
        assert!(matches!(
            product_apply(&neg, &zero, &g, &DomainMask::full(g.shape())),
            Err(Error::NegativeKernel { layer: 1, .. })
        ));
    }

    #[test]
    fn partial_operator_examples() {
        let ax = lebesgue_axis("x1", 0.0, 1.0, 1000).unwrap();
        let y = line("y1", 0.0, 1.0, 1000);
        let one = GridFunction::constant(y.clone(), DomainMask::full(y.shape()), 1.0).unwrap();
        let k = partial_apply(&KernelSet::hardy(1), 0, &one, &[], &ax).unwrap();
        for (x, v) in ax.nodes().iter().zip(k.values()) {
            assert!((v - x).abs() < 1.5e-3);
        }
        let lin = GridFunction::from_fn(y.clone(), DomainMask::full(y.shape()), |p| p[0]).unwrap();
        let k = partial_apply(&KernelSet::hardy(1), 0, &lin, &[], &ax).unwrap();
        for (x, v) in ax.nodes().iter().zip(k.values()) {
            assert!((v - x * x / 2.0).abs() < 1e-3);
        }
        let r1 = KernelSet::rank_one(vec![(ScalarFn::parse("2*x", &["x"]).unwrap(), ScalarFn::Const(1.0))]);
        let k = partial_apply(&r1, 0, &lin, &[], &ax).unwrap();
        for (x, v) in ax.nodes().iter().zip(k.values()) {
            assert!((v - x).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_constant_and_extremal() {
        let y = ProductGrid::shared(vec![lebesgue_axis("y1", 0.0, 1.0, 50).unwrap(), lebesgue_axis("y2", 0.0, 1.0, 40).unwrap()]).unwrap();
        let kernels = KernelSet::rank_one(vec![
            (ScalarFn::parse("1 + x", &["x"]).unwrap(), ScalarFn::parse("y + 0.5", &["y"]).unwrap()),
            (ScalarFn::Const(1.0), ScalarFn::parse("exp(y)", &["y"]).unwrap()),
        ]);
        let p = ExponentVector::new(vec![2.0, 3.0]).unwrap();
        let q = ExponentVector::new(vec![1.5, 4.0]).unwrap();
        let c: f64 = kernels.rank_one_constants(&y, &y, &p, &q).unwrap().iter().product();
        let f = kernels.holder_extremal(&y, &q).unwrap();
        let kf = product_apply(&kernels, &f, &y, &DomainMask::full(y.shape())).unwrap();
        let ratio = crate::norm::mixed_norm(&kf, &p).unwrap() / crate::norm::mixed_norm(&f, &q).unwrap();
        assert!((ratio / c - 1.0).abs() < 1e-12, "{ratio} vs {c}");
    }
}
