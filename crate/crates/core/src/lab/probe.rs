use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::grid::{Axis, DomainMask, GridFunction, ProductGrid};
use crate::norm::{mixed_norm, ExponentVector};
use crate::operators::GridOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbePoint {
    pub radius: f64,
    pub nodes: usize,
    pub value: f64,
}

/// Resolution of the truncation grids: `cells` log-graded cells per axis,
/// fine within `scale` of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeGrid {
    pub cells: usize,
    pub scale: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            cells: 400,
            scale: 0.05,
        }
    }
}

/// The box `[-r, r]^n` with log-graded Lebesgue axes labelled `label1..`.
pub fn truncation_grid(label: &str, n: usize, r: f64, resolution: ProbeGrid) -> Result<Arc<ProductGrid>> {
    let axes = (1..=n)
        .map(|i| Axis::log_graded(format!("{label}{i}"), -r, r, resolution.cells, 0.0, resolution.scale, |_| Ok(1.0)))
        .collect::<Result<Vec<_>>>()?;
    ProductGrid::shared(axes)
}

/// `||T_R f||_{L_P}` on nested boxes `[-R, R]^n`, where `build` constructs the
/// operator on each truncation grid. Growth of the trace signals that `T f`
/// leaves `L_P` on the whole space.
pub fn divergence_probe(
    build: impl Fn(&Arc<ProductGrid>) -> Result<Box<dyn GridOperator>>,
    f: &ScalarFn,
    p: &ExponentVector,
    truncations: &[f64],
    resolution: ProbeGrid,
) -> Result<Vec<ProbePoint>> {
    if truncations.windows(2).any(|w| !(w[0] < w[1])) || truncations.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Config("truncation radii must be positive and increasing".into()));
    }
    truncations
        .iter()
        .map(|&r| {
            let grid = truncation_grid("y", p.len(), r, resolution)?;
            let mask = DomainMask::full(grid.shape());
            let input = GridFunction::try_from_fn(grid.clone(), mask, |y| Ok(f.eval(y)?))?;
            let op = build(&grid)?;
            let out = op.apply(&input)?;
            Ok(ProbePoint {
                radius: r,
                nodes: grid.len(),
                value: mixed_norm(&out, p)?,
            })
        })
        .collect()
}
