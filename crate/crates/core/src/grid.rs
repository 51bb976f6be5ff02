//! Discretized product measure spaces.
//!
//! An [`Axis`] is a composite midpoint rule on a partition of an interval:
//! node `k` sits at the midpoint of cell `[edges[k], edges[k+1]]` and carries
//! weight `w(node) * cell_length`, where `w` is the density of the axis
//! measure. A [`ProductGrid`] is an ordered list of axes; values over it are
//! stored row-major with the last axis varying fastest, so the innermost
//! integral of an iterated norm always runs over contiguous memory.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Below this many entries work stays on the calling thread.
pub(crate) const PAR_THRESHOLD: usize = 1 << 14;

/// Pairwise summation of `term(lo..hi)`.
pub(crate) fn pairwise_sum_by(lo: usize, hi: usize, term: &impl Fn(usize) -> f64) -> f64 {
    if hi - lo <= 32 {
        let mut s = 0.0;
        for i in lo..hi {
            s += term(i);
        }
        s
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise_sum_by(lo, mid, term) + pairwise_sum_by(mid, hi, term)
    }
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_by(0, values.len(), &|i| values[i])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    label: String,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    edges: Vec<f64>,
}

impl Axis {
    /// Midpoint rule on the partition `edges` with measure density `density`.
    pub fn midpoint(
        label: impl Into<String>,
        edges: Vec<f64>,
        mut density: impl FnMut(f64) -> Result<f64>,
    ) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidAxis("an axis needs at least one cell".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidAxis("cell edges must be finite".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidAxis("cell edges must be strictly increasing".into()));
        }
        let m = edges.len() - 1;
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for k in 0..m {
            let node = 0.5 * (edges[k] + edges[k + 1]);
            let w = density(node)?;
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight {
                    node: k,
                    coordinate: node,
                    value: w,
                });
            }
            if w < 0.0 {
                return Err(Error::InvalidAxis(format!(
                    "negative weight density {w} at node {k} (x = {node})"
                )));
            }
            nodes.push(node);
            weights.push(w * (edges[k + 1] - edges[k]));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidAxis("nodes are not strictly increasing".into()));
        }
        Ok(Self {
            label: label.into(),
            nodes,
            weights,
            edges,
        })
    }

    /// `m` equal cells on `[a, b]`.
    pub fn uniform(
        label: impl Into<String>,
        a: f64,
        b: f64,
        m: usize,
        density: impl FnMut(f64) -> Result<f64>,
    ) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidAxis(format!("need finite a < b, got [{a}, {b}]")));
        }
        if m == 0 {
            return Err(Error::InvalidAxis("cell count must be positive".into()));
        }
        let h = (b - a) / m as f64;
        let mut edges: Vec<f64> = (0..=m).map(|k| a + k as f64 * h).collect();
        edges[m] = b;
        Self::midpoint(label, edges, density)
    }

    /// `m` cells on `[a, b]`, uniform in `sign(x - anchor) * ln(1 + |x - anchor| / scale)`.
    /// Cells are fine near `anchor` and grow geometrically away from it, which
    /// resolves power-law behaviour over many decades with few nodes.
    pub fn log_graded(
        label: impl Into<String>,
        a: f64,
        b: f64,
        m: usize,
        anchor: f64,
        scale: f64,
        density: impl FnMut(f64) -> Result<f64>,
    ) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidAxis(format!("need finite a < b, got [{a}, {b}]")));
        }
        if m == 0 || !(scale > 0.0) {
            return Err(Error::InvalidAxis("need m > 0 and scale > 0".into()));
        }
        let anchor = anchor.clamp(a, b);
        let to_s = |x: f64| (x - anchor).signum() * ((x - anchor).abs() / scale).ln_1p();
        let from_s = |s: f64| anchor + s.signum() * scale * s.abs().exp_m1();
        let (s0, s1) = (to_s(a), to_s(b));
        let ds = (s1 - s0) / m as f64;
        let mut edges: Vec<f64> = (0..=m).map(|k| from_s(s0 + k as f64 * ds)).collect();
        edges[0] = a;
        edges[m] = b;
        // Symmetric partitions: make mirrored edges exact negatives of each other.
        if (a + b).abs() <= f64::EPSILON * b.abs() && (anchor).abs() <= f64::EPSILON * b.abs() {
            for k in 0..=m / 2 {
                let e = edges[m - k];
                edges[k] = -e;
            }
            if m.is_multiple_of(2) {
                edges[m / 2] = 0.0;
            }
        }
        Self::midpoint(label, edges, density)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn cell_length(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn total_measure(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Index of the cell containing `x`, if `x` lies in `[lo, hi]`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo() && x <= self.hi()) {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= x);
        Some(k.saturating_sub(1).min(self.len() - 1))
    }

    /// Half of the length of the cell containing `x` (nearest cell outside).
    pub fn half_spacing_at(&self, x: f64) -> f64 {
        let k = self.cell_of(x.clamp(self.lo(), self.hi())).unwrap_or(0);
        0.5 * self.cell_length(k)
    }

    /// Fraction of cell `k` covered by `[a, b]`.
    pub fn coverage(&self, k: usize, a: f64, b: f64) -> f64 {
        let lo = a.max(self.edges[k]);
        let hi = b.min(self.edges[k + 1]);
        if hi <= lo {
            0.0
        } else {
            (hi - lo) / self.cell_length(k)
        }
    }

    /// Weighted `p`-norm of `values` along this axis.
    pub fn pnorm(&self, values: &[f64], p: f64) -> f64 {
        scaled_pnorm(values, &self.weights, p)
    }
}

/// `(sum_k w_k |v_k|^p)^(1/p)`, computed as `M * (sum_k w_k (|v_k|/M)^p)^(1/p)`
/// with `M = max |v_k|` so large exponents cannot overflow intermediate powers.
pub(crate) fn scaled_pnorm(values: &[f64], weights: &[f64], p: f64) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s = if p == 1.0 {
        pairwise_sum_by(0, values.len(), &|i| weights[i] * (values[i].abs() / scale))
    } else {
        pairwise_sum_by(0, values.len(), &|i| weights[i] * (values[i].abs() / scale).powf(p))
    };
    scale * s.powf(1.0 / p)
}

/// `m` midpoint nodes on `[a, b]` for the measure with density `weight_fn`.
pub fn make_uniform_axis(a: f64, b: f64, m: usize, weight_fn: impl Fn(f64) -> f64) -> Result<Axis> {
    Axis::uniform("x", a, b, m, |x| Ok(weight_fn(x)))
}

/// Lebesgue measure on `[a, b]` with `m` cells.
pub fn lebesgue_axis(label: impl Into<String>, a: f64, b: f64, m: usize) -> Result<Axis> {
    Axis::uniform(label, a, b, m, |_| Ok(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductGrid {
    axes: Vec<Axis>,
    shape: Vec<usize>,
    strides: Vec<usize>,
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

impl ProductGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Shape("a product grid needs at least one axis".into()));
        }
        let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
        let strides = strides_of(&shape);
        Ok(Self {
            axes,
            shape,
            strides,
        })
    }

    pub fn shared(axes: Vec<Axis>) -> Result<Arc<Self>> {
        Self::new(axes).map(Arc::new)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Vec<&str> {
        self.axes.iter().map(Axis::label).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for (o, s) in out.iter_mut().zip(&self.strides) {
            *o = flat / s;
            flat %= s;
        }
    }

    /// Coordinates of node `flat`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for ((o, s), axis) in out.iter_mut().zip(&self.strides).zip(&self.axes) {
            *o = axis.nodes[rest / s];
            rest %= s;
        }
    }

    /// Product weight of node `flat`.
    pub fn weight(&self, flat: usize) -> f64 {
        let mut rest = flat;
        let mut w = 1.0;
        for (s, axis) in self.strides.iter().zip(&self.axes) {
            w *= axis.weights[rest / s];
            rest %= s;
        }
        w
    }

    /// Grid over axes `k..n`.
    pub fn tail(&self, k: usize) -> Result<ProductGrid> {
        ProductGrid::new(self.axes[k..].to_vec())
    }

    pub fn without_axis(&self, k: usize) -> Result<ProductGrid> {
        let mut axes = self.axes.clone();
        axes.remove(k);
        ProductGrid::new(axes)
    }

    /// Same nodes and weights on every axis; labels may differ.
    pub fn same_geometry(&self, other: &ProductGrid) -> bool {
        self.shape == other.shape
            && self
                .axes
                .iter()
                .zip(&other.axes)
                .all(|(a, b)| a.nodes == b.nodes && a.weights == b.weights)
    }
}

/// A measurable subset of a product grid, stored as an explicit indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainMask {
    shape: Vec<usize>,
    bits: Vec<bool>,
}

impl DomainMask {
    pub fn full(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            bits: vec![true; shape.iter().product()],
        }
    }

    pub fn empty(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            bits: vec![false; shape.iter().product()],
        }
    }

    pub fn from_bits(shape: &[usize], bits: Vec<bool>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if bits.len() != n {
            return Err(Error::Shape(format!(
                "mask has {} entries, shape {:?} needs {n}",
                bits.len(),
                shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            bits,
        })
    }

    /// Nodes whose coordinates satisfy `pred`.
    pub fn from_predicate(grid: &ProductGrid, pred: impl Fn(&[f64]) -> bool + Sync) -> Self {
        let n = grid.dim();
        let mut bits = vec![false; grid.len()];
        bits.par_iter_mut()
            .with_min_len(1024)
            .enumerate()
            .for_each_init(
                || vec![0.0; n],
                |x, (i, b)| {
                    grid.point(i, x);
                    *b = pred(x);
                },
            );
        Self {
            shape: grid.shape().to_vec(),
            bits,
        }
    }

    /// Nodes where `f` is nonzero; evaluation errors propagate.
    pub fn from_fn(grid: &ProductGrid, f: impl Fn(&[f64]) -> Result<f64> + Sync) -> Result<Self> {
        let n = grid.dim();
        let bits: Result<Vec<bool>> = (0..grid.len())
            .into_par_iter()
            .with_min_len(1024)
            .map_init(
                || vec![0.0; n],
                |x, i| {
                    grid.point(i, x);
                    f(x).map(|v| v != 0.0)
                },
            )
            .collect();
        Self::from_bits(grid.shape(), bits?)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn contains(&self, flat: usize) -> bool {
        self.bits[flat]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }

    pub fn intersect(&self, other: &DomainMask) -> Result<DomainMask> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot intersect masks of shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Ok(Self {
            shape: self.shape.clone(),
            bits,
        })
    }

    /// The section of the mask over the first `prefix.len()` indices.
    pub fn slice(&self, prefix: &[usize]) -> Result<DomainMask> {
        let k = prefix.len();
        if k >= self.dim() {
            return Err(Error::Index(format!(
                "prefix of length {k} leaves no axes of a {}-dimensional mask",
                self.dim()
            )));
        }
        let strides = strides_of(&self.shape);
        let mut offset = 0;
        for (i, (&p, &m)) in prefix.iter().zip(&self.shape).enumerate() {
            if p >= m {
                return Err(Error::Index(format!("prefix index {p} on axis {i} of length {m}")));
            }
            offset += p * strides[i];
        }
        let len: usize = self.shape[k..].iter().product();
        Ok(Self {
            shape: self.shape[k..].to_vec(),
            bits: self.bits[offset..offset + len].to_vec(),
        })
    }

    /// Indicator of `pi_i(mask)`: nodes of axis `i` over which some point of the mask lies.
    pub fn projection(&self, axis: usize) -> Vec<bool> {
        let strides = strides_of(&self.shape);
        let m = self.shape[axis];
        let mut out = vec![false; m];
        for (flat, &b) in self.bits.iter().enumerate() {
            if b {
                out[(flat / strides[axis]) % m] = true;
            }
        }
        out
    }

    /// The mask on the remaining axes after integrating out `axis`.
    pub fn project_out(&self, axis: usize) -> DomainMask {
        let outer: usize = self.shape[..axis].iter().product();
        let m = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut bits = vec![false; outer * inner];
        for o in 0..outer {
            for j in 0..m {
                let base = (o * m + j) * inner;
                for i in 0..inner {
                    if self.bits[base + i] {
                        bits[o * inner + i] = true;
                    }
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Self { shape, bits }
    }
}

/// Real values on a product grid, restricted to a mask. Values off the mask
/// are stored as zero.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<ProductGrid>,
    mask: DomainMask,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<ProductGrid>, mask: DomainMask, mut values: Vec<f64>) -> Result<Self> {
        if mask.shape() != grid.shape() {
            return Err(Error::Shape(format!(
                "mask shape {:?} does not match grid shape {:?}",
                mask.shape(),
                grid.shape()
            )));
        }
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        for (v, &b) in values.iter_mut().zip(mask.bits()) {
            if !b {
                *v = 0.0;
            }
        }
        Ok(Self { grid, mask, values })
    }

    pub fn zeros(grid: Arc<ProductGrid>, mask: DomainMask) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, mask, vec![0.0; n])
    }

    pub fn constant(grid: Arc<ProductGrid>, mask: DomainMask, c: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, mask, vec![c; n])
    }

    /// Sample `f` at every masked node.
    pub fn from_fn(
        grid: Arc<ProductGrid>,
        mask: DomainMask,
        f: impl Fn(&[f64]) -> f64 + Sync,
    ) -> Result<Self> {
        Self::try_from_fn(grid, mask, |x| Ok(f(x)))
    }

    pub fn try_from_fn(
        grid: Arc<ProductGrid>,
        mask: DomainMask,
        f: impl Fn(&[f64]) -> Result<f64> + Sync,
    ) -> Result<Self> {
        if mask.shape() != grid.shape() {
            return Err(Error::Shape("mask does not match grid".into()));
        }
        let n = grid.dim();
        let values: Result<Vec<f64>> = (0..grid.len())
            .into_par_iter()
            .with_min_len(1024)
            .map_init(
                || vec![0.0; n],
                |x, i| {
                    if !mask.contains(i) {
                        return Ok(0.0);
                    }
                    grid.point(i, x);
                    f(x)
                },
            )
            .collect();
        Self::new(grid, mask, values?)
    }

    pub fn grid(&self) -> &Arc<ProductGrid> {
        &self.grid
    }

    pub fn mask(&self) -> &DomainMask {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat_index(idx)]
    }

    /// New function on the same grid and mask.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), self.mask.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::new(self.grid.clone(), self.mask.clone(), values).expect("shape preserved")
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && !self.grid.same_geometry(&other.grid) {
            return Err(Error::Shape("functions live on different grids".into()));
        }
        if self.mask != other.mask {
            return Err(Error::Shape("functions have different masks".into()));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        self.with_values(values)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| f(*x, *y)).collect();
        self.with_values(values)
    }

    /// Restrict to the first `prefix.len()` indices fixed.
    pub fn slice(&self, prefix: &[usize]) -> Result<GridFunction> {
        let k = prefix.len();
        let mask = self.mask.slice(prefix)?;
        let offset = self.grid.flat_index(prefix);
        let len = mask.bits().len();
        let grid = Arc::new(self.grid.tail(k)?);
        GridFunction::new(grid, mask, self.values[offset..offset + len].to_vec())
    }

    /// Weighted sum over all nodes.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        pairwise_sum_by(0, self.values.len(), &|i| {
            let v = self.values[i];
            if v == 0.0 {
                0.0
            } else {
                v * g.weight(i)
            }
        })
    }

    /// Largest `|value|` over the mask (zero for an empty mask).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn argmax_abs(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.values.iter().enumerate() {
            if !self.mask.contains(i) {
                continue;
            }
            if best.is_none_or(|(_, b)| v.abs() > b) {
                best = Some((i, v.abs()));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }
}

/// Integrate `f` over axis `axis_index`. The result lives on the remaining
/// axes, with mask equal to the projection of `f`'s mask along that axis.
pub fn integrate(f: &GridFunction, axis_index: usize) -> Result<GridFunction> {
    let n = f.dim();
    if axis_index >= n {
        return Err(Error::Index(format!("axis {axis_index} of a {n}-dimensional function")));
    }
    if n == 1 {
        return Err(Error::Shape(
            "integrating out the only axis leaves a scalar; use GridFunction::integral".into(),
        ));
    }
    let shape = f.grid.shape();
    let m = shape[axis_index];
    let inner: usize = shape[axis_index + 1..].iter().product();
    let outer: usize = shape[..axis_index].iter().product();
    let weights = f.grid.axis(axis_index).weights();
    let vals = &f.values;
    let mut out = vec![0.0; outer * inner];
    out.par_iter_mut()
        .with_min_len(256)
        .enumerate()
        .for_each(|(r, slot)| {
            let (o, i) = (r / inner, r % inner);
            let base = o * m * inner + i;
            *slot = pairwise_sum_by(0, m, &|j| weights[j] * vals[base + j * inner]);
        });
    let grid = Arc::new(f.grid.without_axis(axis_index)?);
    let mask = f.mask.project_out(axis_index);
    GridFunction::new(grid, mask, out)
}

/// Section of `mask` over a fixed index prefix.
pub fn slice_mask(mask: &DomainMask, prefix: &[usize]) -> Result<DomainMask> {
    mask.slice(prefix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square(m: usize) -> Arc<ProductGrid> {
        ProductGrid::shared(vec![
            lebesgue_axis("x1", 0.0, 1.0, m).unwrap(),
            lebesgue_axis("x2", 0.0, 1.0, m).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn uniform_axis_nodes_and_weights() {
        let ax = make_uniform_axis(0.0, 1.0, 4, |_| 1.0).unwrap();
        assert_eq!(ax.nodes(), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(ax.weights(), &[0.25; 4]);
        for m in [1, 2, 3, 7, 100, 1001] {
            let ax = make_uniform_axis(0.0, 1.0, m, |_| 1.0).unwrap();
            assert_relative_eq!(ax.total_measure(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn weighted_axis_total_measure() {
        let ax = make_uniform_axis(0.0, 1.0, 1000, |x| 2.0 * x).unwrap();
        assert!((ax.total_measure() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_weight_reports_node() {
        let err = make_uniform_axis(0.0, 1.0, 4, |x| if x > 0.5 { f64::NAN } else { 1.0 }).unwrap_err();
        match err {
            Error::NonFiniteWeight { node, coordinate, .. } => {
                assert_eq!(node, 2);
                assert_eq!(coordinate, 0.625);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_axis_carries_full_measure() {
        let ax = lebesgue_axis("t", 0.0, 3.0, 1).unwrap();
        assert_eq!(ax.nodes(), &[1.5]);
        assert_eq!(ax.weights(), &[3.0]);
    }

    #[test]
    fn log_graded_is_symmetric() {
        let ax = Axis::log_graded("y", -100.0, 100.0, 40, 0.0, 1.0, |_| Ok(1.0)).unwrap();
        let n = ax.nodes();
        for k in 0..n.len() {
            assert_eq!(n[k], -n[n.len() - 1 - k]);
        }
        assert_relative_eq!(ax.total_measure(), 200.0, epsilon = 1e-10);
    }

    #[test]
    fn slice_of_full_and_empty_masks() {
        let full = DomainMask::full(&[3, 4, 5]);
        let s = full.slice(&[1]).unwrap();
        assert_eq!(s.shape(), &[4, 5]);
        assert!(s.is_full());
        let s = full.slice(&[2, 3]).unwrap();
        assert_eq!(s.shape(), &[5]);
        assert!(s.is_full());
        let empty = DomainMask::empty(&[3, 4]);
        assert!(empty.slice(&[0]).unwrap().is_empty());
        assert!(full.slice(&[3]).is_err());
        assert!(full.slice(&[0, 0, 0]).is_err());
    }

    #[test]
    fn triangle_slice_at_half() {
        // {x2 <= x1} on [0,1]^2 with 8 cells; node 0.4375 is the last node <= 0.5.
        let g = unit_square(8);
        let tri = DomainMask::from_predicate(&g, |x| x[1] <= x[0]);
        let k = g.axis(0).nodes().iter().position(|&x| x == 0.4375).unwrap();
        let s = tri.slice(&[k]).unwrap();
        let expected: Vec<bool> = g.axis(1).nodes().iter().map(|&x2| x2 <= 0.4375).collect();
        assert_eq!(s.bits(), expected.as_slice());
    }

    #[test]
    fn integrate_constant_and_product() {
        let g = unit_square(1000);
        let one = GridFunction::constant(g.clone(), DomainMask::full(g.shape()), 1.0).unwrap();
        let r = integrate(&one, 1).unwrap();
        assert!(r.values().iter().all(|v| (v - 1.0).abs() < 1e-12));

        let f = GridFunction::from_fn(g.clone(), DomainMask::full(g.shape()), |x| x[0] * x[1]).unwrap();
        let r = integrate(&f, 1).unwrap();
        for (x1, v) in g.axis(0).nodes().iter().zip(r.values()) {
            assert!((v - x1 / 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn integrate_over_triangle_gives_slice_length() {
        let g = unit_square(400);
        let tri = DomainMask::from_predicate(&g, |x| x[1] <= x[0]);
        let f = GridFunction::constant(g.clone(), tri, 1.0).unwrap();
        let r = integrate(&f, 1).unwrap();
        for (x1, v) in g.axis(0).nodes().iter().zip(r.values()) {
            assert!((v - x1).abs() <= 1.0 / 400.0);
        }
    }

    #[test]
    fn projection_matches_union_of_slices() {
        let g = unit_square(9);
        let mask = DomainMask::from_predicate(&g, |x| x[0] + x[1] < 0.7);
        let p1 = mask.projection(1);
        let mut union = vec![false; 9];
        for i in 0..9 {
            for (u, b) in union.iter_mut().zip(mask.slice(&[i]).unwrap().bits()) {
                *u |= *b;
            }
        }
        assert_eq!(p1, union);
        let p0 = mask.projection(0);
        let from_slices: Vec<bool> = (0..9).map(|i| !mask.slice(&[i]).unwrap().is_empty()).collect();
        assert_eq!(p0, from_slices);
    }
}
