//! Changes of variables `phi: Omega -> Omega'`.
//!
//! A [`TriangularMap`] has layers `y_i = psi_i(x_1, ..., x_i)`, each strictly
//! monotone in its last argument. Layers are inverted one at a time (analytic
//! inverse when supplied, bisection otherwise), and the density of the
//! pulled-back measure of layer `i` is
//!
//! ```text
//! J_i(y) = w_x(x_i) / (w_y(y_i) * |d psi_i / d x_i|)   at x = phi^{-1}(y)
//! ```
//!
//! where `w_x`, `w_y` are the densities of the source and target axis measures.
//!
//! Pullback `f -> f o phi` works for any [`PointMap`], triangular or not.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::grid::{Axis, DomainMask, GridFunction, ProductGrid};
use crate::norm::ExponentVector;

/// Any pointwise map between coordinate spaces of equal dimension.
pub trait PointMap: Send + Sync {
    fn dim(&self) -> usize;
    fn forward(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

/// A map given by one expression per output coordinate, each in all of `x_1..x_n`.
#[derive(Debug, Clone)]
pub struct GeneralMap {
    components: Vec<ScalarFn>,
}

impl GeneralMap {
    pub fn new(components: Vec<ScalarFn>) -> Self {
        Self { components }
    }

    /// `(x_1, x_2) -> (x_2, -x_1)`.
    pub fn quarter_turn() -> Self {
        Self::new(vec![ScalarFn::native(2, |x| x[1]), ScalarFn::native(2, |x| -x[0])])
    }
}

impl PointMap for GeneralMap {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn forward(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        for (yi, c) in y.iter_mut().zip(&self.components) {
            *yi = c.eval(x)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

/// Layer `i` (1-based) of a triangular map.
///
/// * `forward` takes `(x_1, ..., x_i)`.
/// * `inverse` takes `(x_1, ..., x_{i-1}, y_i)` and returns `x_i`.
/// * `derivative` takes `(x_1, ..., x_i)` and returns `d psi_i / d x_i`.
#[derive(Debug, Clone)]
pub struct Layer {
    pub forward: ScalarFn,
    pub inverse: Option<ScalarFn>,
    pub derivative: Option<ScalarFn>,
}

impl Layer {
    pub fn new(forward: ScalarFn) -> Self {
        Self {
            forward,
            inverse: None,
            derivative: None,
        }
    }

    pub fn with_inverse(mut self, inverse: ScalarFn) -> Self {
        self.inverse = Some(inverse);
        self
    }

    pub fn with_derivative(mut self, derivative: ScalarFn) -> Self {
        self.derivative = Some(derivative);
        self
    }

    /// Parse layer `index` (0-based) from expressions in `x1..`, `y<index+1>`.
    pub fn parse(index: usize, forward: &str, inverse: Option<&str>, derivative: Option<&str>) -> Result<Self> {
        let xs: Vec<String> = (1..=index + 1).map(|k| format!("x{k}")).collect();
        let x_vars: Vec<&str> = xs.iter().map(String::as_str).collect();
        let yi = format!("y{}", index + 1);
        let mut inv_vars: Vec<&str> = x_vars[..index].to_vec();
        inv_vars.push(&yi);
        let mut layer = Layer::new(ScalarFn::parse(forward, &x_vars)?);
        if let Some(src) = inverse {
            layer.inverse = Some(ScalarFn::parse(src, &inv_vars)?);
        }
        if let Some(src) = derivative {
            layer.derivative = Some(ScalarFn::parse(src, &x_vars)?);
        }
        Ok(layer)
    }
}

const MONOTONE_SAMPLES: usize = 65;
const PREFIX_SAMPLES: usize = 9;
const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone)]
pub struct TriangularMap {
    layers: Vec<Layer>,
    source: Arc<ProductGrid>,
    source_density: Vec<ScalarFn>,
    target_density: Vec<ScalarFn>,
    direction: Vec<Monotonicity>,
}

impl TriangularMap {
    /// Build and validate a map on the box spanned by `source`. Both measures
    /// default to Lebesgue; see [`TriangularMap::with_densities`].
    pub fn new(layers: Vec<Layer>, source: Arc<ProductGrid>) -> Result<Self> {
        let n = source.dim();
        if layers.len() != n {
            return Err(Error::MapInvalid(format!(
                "{} layers for a {n}-dimensional source grid",
                layers.len()
            )));
        }
        let mut map = Self {
            layers,
            source,
            source_density: vec![ScalarFn::Const(1.0); n],
            target_density: vec![ScalarFn::Const(1.0); n],
            direction: vec![Monotonicity::Increasing; n],
        };
        for i in 0..n {
            map.direction[i] = map.detect_direction(i)?;
        }
        map.validate()?;
        Ok(map)
    }

    pub fn identity(source: Arc<ProductGrid>) -> Result<Self> {
        let layers = (0..source.dim())
            .map(|i| {
                Layer::new(ScalarFn::native(i + 1, move |x| x[i]))
                    .with_inverse(ScalarFn::native(i + 1, move |a| a[i]))
                    .with_derivative(ScalarFn::Const(1.0))
            })
            .collect();
        Self::new(layers, source)
    }

    /// Densities of the source measures `mu_i` (in `x_i`) and target measures `nu_i` (in `y_i`).
    pub fn with_densities(mut self, source: Vec<ScalarFn>, target: Vec<ScalarFn>) -> Result<Self> {
        if source.len() != self.dim() || target.len() != self.dim() {
            return Err(Error::MapInvalid("one density per layer is required".into()));
        }
        self.source_density = source;
        self.target_density = target;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn source(&self) -> &Arc<ProductGrid> {
        &self.source
    }

    pub fn direction(&self, i: usize) -> Monotonicity {
        self.direction[i]
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        let ax = self.source.axis(i);
        (ax.lo(), ax.hi())
    }

    fn eval_forward(&self, i: usize, args: &mut Vec<f64>, xi: f64) -> Result<f64> {
        args.push(xi);
        let v = self.layers[i].forward.eval(args);
        args.pop();
        let v = v?;
        if !v.is_finite() {
            return Err(Error::MapInvalid(format!("layer {} is not finite at {:?}", i + 1, args)));
        }
        Ok(v)
    }

    /// Representative prefixes `(x_1, ..., x_i)` drawn from the source grid.
    fn sample_prefixes(&self, i: usize) -> Vec<Vec<f64>> {
        let mut prefixes = vec![Vec::new()];
        for k in 0..i {
            let nodes = self.source.axis(k).nodes();
            let picks: Vec<f64> = if nodes.len() <= PREFIX_SAMPLES {
                nodes.to_vec()
            } else {
                (0..PREFIX_SAMPLES)
                    .map(|s| nodes[s * (nodes.len() - 1) / (PREFIX_SAMPLES - 1)])
                    .collect()
            };
            prefixes = prefixes
                .into_iter()
                .flat_map(|p| {
                    picks.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        prefixes
    }

    fn detect_direction(&self, i: usize) -> Result<Monotonicity> {
        let (lo, hi) = self.bounds(i);
        let mut prefix: Vec<f64> = (0..i)
            .map(|k| {
                let nodes = self.source.axis(k).nodes();
                nodes[nodes.len() / 2]
            })
            .collect();
        let a = self.eval_forward(i, &mut prefix, lo)?;
        let b = self.eval_forward(i, &mut prefix, hi)?;
        if a < b {
            Ok(Monotonicity::Increasing)
        } else if a > b {
            Ok(Monotonicity::Decreasing)
        } else {
            Err(Error::MapInvalid(format!(
                "layer {} takes equal values at both ends of its interval",
                i + 1
            )))
        }
    }

    /// Check strict monotonicity in the last argument on sampled slices.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.dim() {
            let (lo, hi) = self.bounds(i);
            for mut prefix in self.sample_prefixes(i) {
                let mut prev: Option<f64> = None;
                for s in 0..MONOTONE_SAMPLES {
                    let x = lo + (hi - lo) * s as f64 / (MONOTONE_SAMPLES - 1) as f64;
                    let v = self.eval_forward(i, &mut prefix, x)?;
                    if let Some(p) = prev {
                        let ok = match self.direction[i] {
                            Monotonicity::Increasing => v > p,
                            Monotonicity::Decreasing => v < p,
                        };
                        if !ok {
                            return Err(Error::MapInvalid(format!(
                                "layer {} is not strictly monotone in x{} near {x} (prefix {:?})",
                                i + 1,
                                i + 1,
                                prefix
                            )));
                        }
                    }
                    prev = Some(v);
                }
            }
        }
        Ok(())
    }

    /// `x_i` with `psi_i(x_prefix, x_i) = y_i`.
    pub fn invert_last(&self, i: usize, x_prefix: &[f64], y_i: f64) -> Result<f64> {
        let (lo, hi) = self.bounds(i);
        let mut args = x_prefix.to_vec();
        let f_lo = self.eval_forward(i, &mut args, lo)?;
        let f_hi = self.eval_forward(i, &mut args, hi)?;
        let (r_lo, r_hi) = (f_lo.min(f_hi), f_lo.max(f_hi));
        let tol = 1e-12 * (1.0 + r_lo.abs().max(r_hi.abs()));
        if !(y_i >= r_lo - tol && y_i <= r_hi + tol) {
            return Err(Error::Range {
                layer: i + 1,
                value: y_i,
                lo: r_lo,
                hi: r_hi,
            });
        }
        if let Some(inv) = &self.layers[i].inverse {
            args.push(y_i);
            let x = inv.eval(&args)?;
            let slack = 1e-9 * (hi - lo);
            if !(x >= lo - slack && x <= hi + slack) {
                return Err(Error::Range {
                    layer: i + 1,
                    value: y_i,
                    lo: r_lo,
                    hi: r_hi,
                });
            }
            return Ok(x.clamp(lo, hi));
        }
        let increasing = self.direction[i] == Monotonicity::Increasing;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let v = self.eval_forward(i, &mut args, mid)?;
            if !(v >= r_lo - tol && v <= r_hi + tol) {
                return Err(Error::MapInvalid(format!(
                    "layer {} leaves its end-point range inside the interval (x = {mid})",
                    i + 1
                )));
            }
            if (v < y_i) == increasing {
                a = mid;
            } else {
                b = mid;
            }
        }
        let fa = self.eval_forward(i, &mut args, a)?;
        let fb = self.eval_forward(i, &mut args, b)?;
        Ok(if (fa - y_i).abs() <= (fb - y_i).abs() { a } else { b })
    }

    /// Full inverse `x = phi^{-1}(y)`.
    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(y.len());
        for (i, &yi) in y.iter().enumerate() {
            let xi = self.invert_last(i, &x, yi)?;
            x.push(xi);
        }
        Ok(x)
    }

    /// `x_i` for `y = (y_prefix, y_i)`, inverting the prefix first.
    pub fn invert_layer(&self, i: usize, y_prefix: &[f64], y_i: f64) -> Result<f64> {
        if y_prefix.len() != i {
            return Err(Error::Index(format!("layer {} needs a prefix of length {i}", i + 1)));
        }
        let x_prefix = self.invert(y_prefix)?;
        self.invert_last(i, &x_prefix, y_i)
    }

    /// `d psi_i / d x_i` at `x = (x_1, ..., x_i)`.
    pub fn layer_derivative(&self, i: usize, x: &[f64]) -> Result<f64> {
        if let Some(d) = &self.layers[i].derivative {
            return Ok(d.eval(x)?);
        }
        let (lo, hi) = self.bounds(i);
        let xi = x[i];
        let h = self.source.axis(i).half_spacing_at(xi);
        let mut args = x[..i].to_vec();
        let (a, b) = if xi - h >= lo && xi + h <= hi {
            (xi - h, xi + h)
        } else if xi - h < lo {
            (xi, xi + h)
        } else {
            (xi - h, xi)
        };
        let fa = self.eval_forward(i, &mut args, a)?;
        let fb = self.eval_forward(i, &mut args, b)?;
        Ok((fb - fa) / (b - a))
    }

    fn jacobian_at(&self, i: usize, x: &[f64], y_i: f64) -> Result<f64> {
        let d = self.layer_derivative(i, &x[..=i])?;
        if !(d.abs() >= 1e-14) {
            return Err(Error::SingularJacobian {
                layer: i + 1,
                derivative: d,
                at: x[..=i].to_vec(),
            });
        }
        let wx = self.source_density[i].eval(&[x[i]])?;
        let wy = self.target_density[i].eval(&[y_i])?;
        if !(wy > 0.0) {
            return Err(Error::Domain(format!(
                "target density of layer {} vanishes at y = {y_i}",
                i + 1
            )));
        }
        Ok(wx / (wy * d.abs()))
    }

    /// `J(psi_i^{-1}(y_1, ..., y_{i-1}, .); y_i)` at `y_point` (length at least `i + 1`).
    pub fn layer_jacobian(&self, i: usize, y_point: &[f64]) -> Result<f64> {
        let x = self.invert(&y_point[..=i])?;
        self.jacobian_at(i, &x, y_point[i])
    }

    /// All layer densities at `y`, sharing one inversion.
    pub fn jacobians(&self, y: &[f64]) -> Result<Vec<f64>> {
        let x = self.invert(y)?;
        (0..self.dim()).map(|i| self.jacobian_at(i, &x, y[i])).collect()
    }

    /// `prod_i J_i(y)^{1/p_i}`.
    pub fn jacobian_product(&self, y: &[f64], p: &ExponentVector) -> Result<f64> {
        let j = self.jacobians(y)?;
        Ok(j.iter().enumerate().map(|(i, ji)| ji.powf(1.0 / p.get(i))).product())
    }

    /// Target-grid nodes whose preimage lies in the source box.
    pub fn image_mask(&self, target: &ProductGrid) -> Result<DomainMask> {
        let n = self.dim();
        let bits: Result<Vec<bool>> = (0..target.len())
            .into_par_iter()
            .with_min_len(512)
            .map_init(
                || vec![0.0; n],
                |y, k| {
                    target.point(k, y);
                    match self.invert(y) {
                        Ok(_) => Ok(true),
                        Err(Error::Range { .. }) => Ok(false),
                        Err(e) => Err(e),
                    }
                },
            )
            .collect();
        DomainMask::from_bits(target.shape(), bits?)
    }

    /// Tabulate every layer density over the masked nodes of `target`.
    pub fn tabulate_jacobians(&self, target: &Arc<ProductGrid>, mask: &DomainMask) -> Result<Vec<LayerJacobian>> {
        let n = self.dim();
        let rows: Result<Vec<Vec<f64>>> = (0..target.len())
            .into_par_iter()
            .with_min_len(256)
            .map_init(
                || vec![0.0; n],
                |y, k| {
                    if !mask.contains(k) {
                        return Ok(vec![0.0; n]);
                    }
                    target.point(k, y);
                    self.jacobians(y)
                },
            )
            .collect();
        let rows = rows?;
        (0..n)
            .map(|i| {
                let values = rows.iter().map(|r| r[i]).collect();
                Ok(LayerJacobian {
                    layer: i,
                    values: GridFunction::new(target.clone(), mask.clone(), values)?,
                })
            })
            .collect()
    }
}

impl PointMap for TriangularMap {
    fn dim(&self) -> usize {
        self.layers.len()
    }

    fn forward(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            y[i] = layer.forward.eval(&x[..=i])?;
        }
        Ok(())
    }
}

/// Density of layer `layer` (0-based) tabulated on the target grid.
#[derive(Debug, Clone)]
pub struct LayerJacobian {
    pub layer: usize,
    pub values: GridFunction,
}

/// Which source nodes landed inside the target domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Coverage {
    pub covered: usize,
    pub uncovered: usize,
    /// Flat indices of masked source nodes mapped outside the target domain.
    pub uncovered_nodes: Vec<usize>,
}

/// Precomputed multilinear interpolation stencils for `f -> f o phi`.
#[derive(Debug, Clone)]
pub struct PullbackPlan {
    source: Arc<ProductGrid>,
    source_mask: DomainMask,
    target: Arc<ProductGrid>,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
    coverage: Coverage,
}

/// Interpolation stencil of coordinate `y` on one axis, plus the index of the nearest node.
fn axis_stencil(axis: &Axis, y: f64) -> Option<([(usize, f64); 2], usize, usize)> {
    let slack = 1e-9 * (axis.hi() - axis.lo());
    if !(y >= axis.lo() - slack && y <= axis.hi() + slack) {
        return None;
    }
    let nodes = axis.nodes();
    let m = nodes.len();
    if m == 1 || y <= nodes[0] {
        return Some(([(0, 1.0), (0, 0.0)], 1, 0));
    }
    if y >= nodes[m - 1] {
        return Some(([(m - 1, 1.0), (0, 0.0)], 1, m - 1));
    }
    let j = nodes.partition_point(|&n| n <= y) - 1;
    let t = (y - nodes[j]) / (nodes[j + 1] - nodes[j]);
    if t == 0.0 {
        return Some(([(j, 1.0), (0, 0.0)], 1, j));
    }
    let nearest = if t <= 0.5 { j } else { j + 1 };
    Some(([(j, 1.0 - t), (j + 1, t)], 2, nearest))
}

impl PullbackPlan {
    pub fn new(
        map: &dyn PointMap,
        source: Arc<ProductGrid>,
        source_mask: DomainMask,
        target: Arc<ProductGrid>,
        target_mask: &DomainMask,
    ) -> Result<Self> {
        let n = source.dim();
        if map.dim() != n || target.dim() != n {
            return Err(Error::Shape("map, source and target dimensions differ".into()));
        }
        if source_mask.shape() != source.shape() || target_mask.shape() != target.shape() {
            return Err(Error::Shape("mask does not match its grid".into()));
        }
        let stencils: Result<Vec<Option<Vec<(usize, f64)>>>> = (0..source.len())
            .into_par_iter()
            .with_min_len(512)
            .map_init(
                || (vec![0.0; n], vec![0.0; n]),
                |(x, y), k| {
                    if !source_mask.contains(k) {
                        return Ok(Some(Vec::new()));
                    }
                    source.point(k, x);
                    map.forward(x, y)?;
                    let mut entries = vec![(0usize, 1.0f64)];
                    let mut nearest = 0usize;
                    for (axis_i, &yi) in y.iter().enumerate() {
                        let stride = target.strides()[axis_i];
                        let Some((st, len, near)) = axis_stencil(target.axis(axis_i), yi) else {
                            return Ok(None);
                        };
                        nearest += near * stride;
                        let mut next = Vec::with_capacity(entries.len() * len);
                        for &(idx, w) in &entries {
                            for &(j, wj) in &st[..len] {
                                next.push((idx + j * stride, w * wj));
                            }
                        }
                        entries = next;
                    }
                    if !target_mask.contains(nearest) {
                        return Ok(None);
                    }
                    entries.retain(|(_, w)| *w != 0.0);
                    Ok(Some(entries))
                },
            )
            .collect();
        let stencils = stencils?;
        let mut offsets = Vec::with_capacity(source.len() + 1);
        let mut entries = Vec::new();
        let mut coverage = Coverage::default();
        offsets.push(0);
        for (k, s) in stencils.into_iter().enumerate() {
            match s {
                Some(e) => {
                    if source_mask.contains(k) {
                        coverage.covered += 1;
                    }
                    entries.extend(e);
                }
                None => {
                    coverage.uncovered += 1;
                    coverage.uncovered_nodes.push(k);
                }
            }
            offsets.push(entries.len());
        }
        Ok(Self {
            source,
            source_mask,
            target,
            offsets,
            entries,
            coverage,
        })
    }

    pub fn coverage(&self) -> &Coverage {
        &self.coverage
    }

    pub fn source(&self) -> &Arc<ProductGrid> {
        &self.source
    }

    pub fn source_mask(&self) -> &DomainMask {
        &self.source_mask
    }

    pub fn target(&self) -> &Arc<ProductGrid> {
        &self.target
    }

    /// `f o phi` on the source grid; `f` must live on the target grid.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if !f.grid().same_geometry(&self.target) {
            return Err(Error::Shape("function does not live on the pullback target grid".into()));
        }
        let vals = f.values();
        let mut out = vec![0.0; self.source.len()];
        out.par_iter_mut().with_min_len(4096).enumerate().for_each(|(k, o)| {
            let mut s = 0.0;
            for &(idx, w) in &self.entries[self.offsets[k]..self.offsets[k + 1]] {
                s += w * vals[idx];
            }
            *o = s;
        });
        GridFunction::new(self.source.clone(), self.source_mask.clone(), out)
    }
}

#[derive(Debug, Clone)]
pub struct Pullback {
    pub function: GridFunction,
    pub coverage: Coverage,
}

/// `f o phi` evaluated on `(source, source_mask)` by multilinear interpolation
/// of `f`. Nodes mapped outside `f`'s domain get zero and are reported.
pub fn pullback(
    f: &GridFunction,
    map: &dyn PointMap,
    source: Arc<ProductGrid>,
    source_mask: DomainMask,
) -> Result<Pullback> {
    let plan = PullbackPlan::new(map, source, source_mask, f.grid().clone(), f.mask())?;
    Ok(Pullback {
        function: plan.apply(f)?,
        coverage: plan.coverage,
    })
}

/// Both sides of the one-layer change of variables formula on the interval
/// `e = [e0, e1]`:
/// `lhs = int_{psi^{-1}(E)} g(psi(x)) dmu`, `rhs = int_E g(y) J(y) dnu`,
/// each by an `m`-node midpoint rule on its own interval.
pub fn change_of_variables_check(
    g: &ScalarFn,
    map: &TriangularMap,
    e: (f64, f64),
    m: usize,
) -> Result<(f64, f64)> {
    if map.dim() != 1 {
        return Err(Error::Shape("change of variables check uses a one-layer map".into()));
    }
    let (e0, e1) = e;
    if !(e0 <= e1) {
        return Err(Error::Domain(format!("interval [{e0}, {e1}] is reversed")));
    }
    if e0 == e1 {
        return Ok((0.0, 0.0));
    }
    let a = map.invert_last(0, &[], e0)?;
    let b = map.invert_last(0, &[], e1)?;
    let (lo, hi) = (a.min(b), a.max(b));
    let x_axis = Axis::uniform("x", lo, hi, m, |x| Ok(map.source_density[0].eval(&[x])?))?;
    let y_axis = Axis::uniform("y", e0, e1, m, |y| Ok(map.target_density[0].eval(&[y])?))?;
    let mut lhs_terms = Vec::with_capacity(m);
    for (&x, &w) in x_axis.nodes().iter().zip(x_axis.weights()) {
        let y = map.layers[0].forward.eval(&[x])?;
        lhs_terms.push(w * g.eval(&[y])?);
    }
    let mut rhs_terms = Vec::with_capacity(m);
    for (&y, &w) in y_axis.nodes().iter().zip(y_axis.weights()) {
        let j = map.layer_jacobian(0, &[y])?;
        rhs_terms.push(w * g.eval(&[y])? * j);
    }
    Ok((
        crate::grid::pairwise_sum(&lhs_terms),
        crate::grid::pairwise_sum(&rhs_terms),
    ))
}
