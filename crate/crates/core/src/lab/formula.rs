use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{DomainMask, GridFunction, ProductGrid};
use crate::map::TriangularMap;
use crate::norm::ExponentVector;
use crate::operators::hardy_constant;

/// Max over positively weighted masked nodes of `value(node)`; 0 on an empty mask.
fn node_max(
    grid: &ProductGrid,
    mask: &DomainMask,
    value: impl Fn(&[f64], usize) -> Result<f64> + Sync,
) -> Result<f64> {
    let n = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .with_min_len(256)
        .filter(|&k| mask.contains(k) && grid.weight(k) > 0.0)
        .map_init(
            || vec![0.0; n],
            |y, k| {
                grid.point(k, y);
                value(y, k)
            },
        )
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Discrete `esssup_y prod_i J_i(y)^{1/p_i}` over the masked nodes of `Omega'`.
pub fn composition_norm_formula(
    map: &TriangularMap,
    p: &ExponentVector,
    target: &Arc<ProductGrid>,
    mask: &DomainMask,
) -> Result<f64> {
    node_max(target, mask, |y, _| map.jacobian_product(y, p))
}

/// Discrete `esssup |g|`.
pub fn multiplication_norm_formula(g: &GridFunction) -> f64 {
    let grid = g.grid();
    g.values()
        .iter()
        .enumerate()
        .filter(|&(k, _)| g.mask().contains(k) && grid.weight(k) > 0.0)
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
}

/// Discrete `esssup_y |g(y)| * prod_i (p_i / (p_i - 1)) J_i(y)^{1/p_i}` over the
/// masked nodes of `g`'s grid.
pub fn operator_i_norm_formula(map: &TriangularMap, g: &GridFunction, p: &ExponentVector) -> Result<f64> {
    let c = hardy_constant(p)?;
    let values = g.values();
    let sup = node_max(g.grid(), g.mask(), |y, k| {
        if values[k] == 0.0 {
            return Ok(0.0);
        }
        Ok(values[k].abs() * map.jacobian_product(y, p)?)
    })?;
    Ok(c * sup)
}
