//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use mixnorm_core::grid::lebesgue_axis;
use mixnorm_core::{DomainMask, GridFunction, Layer, ProductGrid, TriangularMap};

/// `[0, 1]^2` with `m` cells per axis, labelled `prefix1`, `prefix2`.
pub fn square(prefix: &str, m: usize) -> Arc<ProductGrid> {
    ProductGrid::shared(vec![
        lebesgue_axis(format!("{prefix}1"), 0.0, 1.0, m).unwrap(),
        lebesgue_axis(format!("{prefix}2"), 0.0, 1.0, m).unwrap(),
    ])
    .unwrap()
}

/// A smooth bump on `grid`.
pub fn bump(grid: &Arc<ProductGrid>) -> GridFunction {
    GridFunction::from_fn(grid.clone(), DomainMask::full(grid.shape()), |x| {
        (-(x[0] - 0.3).powi(2) * 8.0 - (x[1] - 0.6).powi(2) * 5.0).exp()
    })
    .unwrap()
}

/// `psi(x) = (x1 / 2, x2 / (1 + x1))` on `[0, 1]^2`.
pub fn coupling_map(m: usize) -> TriangularMap {
    TriangularMap::new(
        vec![
            Layer::parse(0, "x1/2", Some("2*y1"), Some("0.5")).unwrap(),
            Layer::parse(1, "x2/(1+x1)", Some("y2*(1+x1)"), Some("1/(1+x1)")).unwrap(),
        ],
        square("x", m),
    )
    .unwrap()
}
