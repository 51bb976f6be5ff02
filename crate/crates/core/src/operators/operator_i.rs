use rayon::prelude::*;

use super::hardy::{check_anchored, hardy_apply, CumulativeTable};
use super::multiplication_apply;
use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridFunction};
use crate::map::{pullback, PointMap, TriangularMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Integrate `f * g` up to `phi(x)` directly.
    Direct,
    /// Compose pullback, Hardy averaging and multiplication.
    Pipeline,
}

/// `(If)(x) = (1 / prod psi_i(x)) * int_0^{psi_1(x)} ... int_0^{psi_n(x)} f(y) g(y) dy`
/// on the map's source grid. `f` and `g` live on a grid of `Omega'` anchored at 0.
pub fn operator_i_apply(map: &TriangularMap, g: &GridFunction, f: &GridFunction, route: Route) -> Result<GridFunction> {
    let fg = multiplication_apply(f, g)?;
    let source = map.source().clone();
    let full = DomainMask::full(source.shape());
    match route {
        Route::Pipeline => {
            let h = hardy_apply(&fg)?;
            Ok(pullback(&h, map, source, full)?.function)
        }
        Route::Direct => {
            check_anchored(fg.grid(), "operator I")?;
            let table = CumulativeTable::new(&fg)?;
            let n = source.dim();
            let values: Result<Vec<f64>> = (0..source.len())
                .into_par_iter()
                .with_min_len(1024)
                .map_init(
                    || (vec![0.0; n], vec![0.0; n]),
                    |(x, y), k| {
                        source.point(k, x);
                        map.forward(x, y)?;
                        if let Some(bad) = y.iter().position(|&v| !(v > 0.0)) {
                            return Err(Error::Domain(format!(
                                "psi_{} = {} is not positive at x = {x:?}",
                                bad + 1,
                                y[bad]
                            )));
                        }
                        Ok(table.eval(y) / y.iter().product::<f64>())
                    },
                )
                .collect();
            GridFunction::new(source, full, values?)
        }
    }
}
