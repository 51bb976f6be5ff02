mod common;

use std::sync::Arc;

use common::square;
use mixnorm_core::grid::lebesgue_axis;
use mixnorm_core::lab::{composition_norm_formula, Estimator};
use mixnorm_core::operators::{CompositionOperator, HardyOperator};
use mixnorm_core::{
    hardy_apply, hardy_constant, minkowski_gap, mixed_norm, product_apply, slice_norm_profile, DomainMask,
    ExponentVector, GridFunction, GridOperator, KernelSet, Layer, PointMap, ProductGrid, PullbackPlan, TriangularMap,
};
use proptest::prelude::*;

const M: usize = 6;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn values(len: usize, lo: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..5.0f64, len)
}

fn mask(len: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(prop::bool::weighted(0.8), len)
}

fn exponents(n: usize) -> impl Strategy<Value = ExponentVector> {
    prop::collection::vec(1.0f64..6.0, n).prop_map(|p| ExponentVector::new(p).unwrap())
}

fn function(grid: &Arc<ProductGrid>, bits: Vec<bool>, v: Vec<f64>) -> GridFunction {
    GridFunction::new(grid.clone(), DomainMask::from_bits(grid.shape(), bits).unwrap(), v).unwrap()
}

/// `psi1 = a x1 + b x1^3`, `psi2 = x2 / (1 + c x1) + d x2^3` on the unit square.
fn coupling_map(a: f64, b: f64, c: f64, d: f64, m: usize) -> (TriangularMap, Arc<ProductGrid>) {
    let map = TriangularMap::new(
        vec![
            Layer::parse(0, &format!("{a}*x1 + {b}*x1^3"), None, None).unwrap(),
            Layer::parse(1, &format!("x2/(1 + {c}*x1) + {d}*x2^3"), None, None).unwrap(),
        ],
        square(0.0, 1.0, m),
    )
    .unwrap();
    let target = ProductGrid::shared(vec![
        lebesgue_axis("y1", 0.0, a + b, m).unwrap(),
        lebesgue_axis("y2", 0.0, 1.0 + d, m).unwrap(),
    ])
    .unwrap();
    (map, target)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixed_norm_is_a_norm(
        f in values(M * M, -5.0), g in values(M * M, -5.0), bits in mask(M * M),
        p in exponents(2), c in -3.0f64..3.0,
    ) {
        let grid = square(0.0, 1.0, M);
        let f = function(&grid, bits.clone(), f);
        let g = function(&grid, bits, g);
        let (nf, ng) = (mixed_norm(&f, &p).unwrap(), mixed_norm(&g, &p).unwrap());
        let sum = mixed_norm(&f.linear_combination(1.0, &g, 1.0).unwrap(), &p).unwrap();
        prop_assert!(sum <= (nf + ng) * (1.0 + 1e-12));
        prop_assert!(close(mixed_norm(&f.scale(c), &p).unwrap(), c.abs() * nf, 1e-12));
        prop_assert!(nf >= 0.0);
    }

    #[test]
    fn profile_agrees_with_full_norm(f in values(M * M, -5.0), bits in mask(M * M), p in exponents(2)) {
        let grid = square(0.0, 2.0, M);
        let f = function(&grid, bits, f);
        let prof = slice_norm_profile(&f, &p).unwrap();
        let outer = mixnorm_core::norm::weighted_pnorm(&prof, grid.axis(0).weights(), p.get(0));
        prop_assert!(close(outer, mixed_norm(&f, &p).unwrap(), 1e-12));
    }

    #[test]
    fn minkowski_inequality(f in values(M * M, -5.0), p in 1.0f64..8.0) {
        let grid = square(0.0, 1.0, M);
        let f = function(&grid, vec![true; M * M], f);
        let (lhs, rhs) = minkowski_gap(&f, p).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn hardy_is_linear_positive_and_bounded(
        f in values(M * M, 0.0), g in values(M * M, -5.0), p in prop::collection::vec(1.1f64..6.0, 2), a in -2.0f64..2.0,
    ) {
        let grid = square(0.0, 1.0, M);
        let f = function(&grid, vec![true; M * M], f);
        let g = function(&grid, vec![true; M * M], g);
        let hf = hardy_apply(&f).unwrap();
        prop_assert!(hf.values().iter().all(|v| *v >= 0.0));

        let combo = hardy_apply(&f.linear_combination(a, &g, 1.0).unwrap()).unwrap();
        let expect = hf.linear_combination(a, &hardy_apply(&g).unwrap(), 1.0).unwrap();
        for (x, y) in combo.values().iter().zip(expect.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }

        let p = ExponentVector::new(p).unwrap();
        let nf = mixed_norm(&f, &p).unwrap();
        if nf > 0.0 {
            let ratio = mixed_norm(&hf, &p).unwrap() / nf;
            prop_assert!(ratio <= hardy_constant(&p).unwrap() * 1.01, "{} > {}", ratio, hardy_constant(&p).unwrap());
        }
    }

    #[test]
    fn product_operator_is_linear_and_positive(
        f in values(M * M, 0.0), g in values(M * M, -5.0), a in -2.0f64..2.0, s in 0.1f64..3.0,
    ) {
        let y = square(0.0, 1.0, M);
        let x = square(0.0, 2.0, M - 1);
        let xm = DomainMask::full(x.shape());
        let kernels = KernelSet::parse(&[format!("exp(-{s}*x1*y1)"), "1 + x1*x2 + y2".to_string()]).unwrap();
        let f = function(&y, vec![true; M * M], f);
        let g = function(&y, vec![true; M * M], g);
        let kf = product_apply(&kernels, &f, &x, &xm).unwrap();
        prop_assert!(kf.values().iter().all(|v| *v >= 0.0));
        let kg = product_apply(&kernels, &g, &x, &xm).unwrap();
        let combo = product_apply(&kernels, &f.linear_combination(a, &g, 1.0).unwrap(), &x, &xm).unwrap();
        for ((c, u), v) in combo.values().iter().zip(kf.values()).zip(kg.values()) {
            let e = a * u + v;
            prop_assert!((c - e).abs() <= 1e-12 * (1.0 + u.abs() + v.abs()));
        }
    }

    #[test]
    fn inverse_undoes_forward(
        a in 0.5f64..2.0, b in 0.0f64..1.0, c in 0.0f64..2.0, d in 0.0f64..0.5,
        x in prop::array::uniform2(0.0f64..1.0),
    ) {
        let (map, _) = coupling_map(a, b, c, d, 8);
        let mut y = [0.0; 2];
        map.forward(&x, &mut y).unwrap();
        let back = map.invert(&y).unwrap();
        prop_assert!((back[0] - x[0]).abs() < 1e-10 && (back[1] - x[1]).abs() < 1e-10, "{:?} vs {:?}", back, x);
    }

    #[test]
    fn map_is_triangular(
        a in 0.5f64..2.0, b in 0.0f64..1.0, c in 0.0f64..2.0, d in 0.0f64..0.5,
        x1 in 0.0f64..1.0, x2 in prop::array::uniform2(0.0f64..1.0),
    ) {
        let (map, _) = coupling_map(a, b, c, d, 8);
        let (mut u, mut v) = ([0.0; 2], [0.0; 2]);
        map.forward(&[x1, x2[0]], &mut u).unwrap();
        map.forward(&[x1, x2[1]], &mut v).unwrap();
        prop_assert_eq!(u[0], v[0]);
    }

    #[test]
    fn jacobian_is_reciprocal_derivative(
        a in 0.5f64..2.0, b in 0.0f64..1.0, c in 0.0f64..2.0, d in 0.0f64..0.5,
        x in prop::array::uniform2(0.05f64..0.95),
    ) {
        let (fd, _) = coupling_map(a, b, c, d, 200);
        let exact = TriangularMap::new(
            vec![
                Layer::parse(0, &format!("{a}*x1 + {b}*x1^3"), None, Some(&format!("{a} + 3*{b}*x1^2"))).unwrap(),
                Layer::parse(1, &format!("x2/(1 + {c}*x1) + {d}*x2^3"), None, Some(&format!("1/(1 + {c}*x1) + 3*{d}*x2^2"))).unwrap(),
            ],
            square(0.0, 1.0, 200),
        )
        .unwrap();
        let mut y = [0.0; 2];
        exact.forward(&x, &mut y).unwrap();
        let d1 = a + 3.0 * b * x[0] * x[0];
        let d2 = 1.0 / (1.0 + c * x[0]) + 3.0 * d * x[1] * x[1];
        let j = exact.jacobians(&y).unwrap();
        prop_assert!(close(j[0], 1.0 / d1, 1e-9) && close(j[1], 1.0 / d2, 1e-9), "{:?}", j);
        let j = fd.jacobians(&y).unwrap();
        prop_assert!(close(j[0], 1.0 / d1, 1e-4) && close(j[1], 1.0 / d2, 1e-4), "{:?}", j);
    }

    #[test]
    fn pullback_is_linear_and_respects_structure(
        a in 0.5f64..2.0, b in 0.0f64..1.0, c in 0.0f64..2.0, d in 0.0f64..0.5,
        f in values(10 * 10, -5.0), g in values(10 * 10, -5.0), h in values(10, -5.0), s in -2.0f64..2.0,
    ) {
        let (map, target) = coupling_map(a, b, c, d, 10);
        let tm = map.image_mask(&target).unwrap();
        let plan = PullbackPlan::new(&map, map.source().clone(), DomainMask::full(&[10, 10]), target.clone(), &tm).unwrap();
        let f = GridFunction::new(target.clone(), tm.clone(), f).unwrap();
        let g = GridFunction::new(target.clone(), tm.clone(), g).unwrap();
        let combo = plan.apply(&f.linear_combination(s, &g, 1.0).unwrap()).unwrap();
        let pf = plan.apply(&f).unwrap();
        let pg = plan.apply(&g).unwrap();
        for ((x, u), v) in combo.values().iter().zip(pf.values()).zip(pg.values()) {
            prop_assert!((x - (s * u + v)).abs() <= 1e-12 * (1.0 + u.abs() + v.abs()));
        }

        // A function of y1 alone pulls back to a function of x1 alone.
        let full = DomainMask::full(target.shape());
        let only_y1 = GridFunction::new(target.clone(), full.clone(), (0..100).map(|k| h[k / 10]).collect()).unwrap();
        let plan = PullbackPlan::new(&map, map.source().clone(), DomainMask::full(&[10, 10]), target, &full).unwrap();
        let pulled = plan.apply(&only_y1).unwrap();
        let covered: Vec<bool> = (0..100).map(|k| !plan.coverage().uncovered_nodes.contains(&k)).collect();
        for row in 0..10 {
            let vals: Vec<f64> = (0..10).filter(|j| covered[row * 10 + j]).map(|j| pulled.values()[row * 10 + j]).collect();
            for w in vals.windows(2) {
                prop_assert!((w[0] - w[1]).abs() <= 1e-12 * (1.0 + w[0].abs()));
            }
        }
    }

    #[test]
    fn ratio_is_scale_invariant(f in values(M * M, -5.0), c in prop_oneof![-1e6f64..-1e-6, 1e-6f64..1e6], p in exponents(2)) {
        let grid = square(0.0, 1.0, M);
        let op = HardyOperator::new(grid.clone(), DomainMask::full(grid.shape())).unwrap();
        let est = Estimator::new(&op, &p, &p, 7).unwrap();
        let scaled: Vec<f64> = f.iter().map(|v| c * v).collect();
        match (est.ratio(f).unwrap(), est.ratio(scaled).unwrap()) {
            (Some(r), Some(s)) => prop_assert!(close(r, s, 1e-12)),
            (r, s) => prop_assert_eq!(r.is_none(), s.is_none()),
        }
    }

    #[test]
    fn composition_respects_formula_bound(
        a in 0.5f64..2.0, b in 0.0f64..1.0, c in 0.0f64..2.0, d in 0.0f64..0.5,
        centers in prop::collection::vec(prop::array::uniform2(0.1f64..0.9), 1..4),
        width in 0.1f64..0.4, p in exponents(2),
    ) {
        let (map, target) = coupling_map(a, b, c, d, 60);
        let op = CompositionOperator::triangular(&map, target.clone()).unwrap();
        let (_, tm) = op.domain();
        let formula = composition_norm_formula(&map, &p, &target, tm).unwrap();
        let (sa, sd) = (a + b, 1.0 + d);
        let f = GridFunction::from_fn(target.clone(), tm.clone(), |y| {
            centers
                .iter()
                .map(|z| (-((y[0] / sa - z[0]).powi(2) + (y[1] / sd - z[1]).powi(2)) / (width * width)).exp())
                .sum()
        })
        .unwrap();
        let ratio = mixed_norm(&op.apply(&f).unwrap(), &p).unwrap() / mixed_norm(&f, &p).unwrap();
        prop_assert!(ratio <= formula * 1.05, "{} > {}", ratio, formula);
    }
}
