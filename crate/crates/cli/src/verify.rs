//! The `core` property suite behind `mixnorm verify`: reduced versions of the
//! library's acceptance checks, seeded so runs are reproducible.

use std::sync::Arc;

use anyhow::Result;
use mixnorm_core::expr::{parse, BinOp, Expr, ExprKind, Func, Span};
use mixnorm_core::grid::lebesgue_axis;
use mixnorm_core::lab::{
    composition_norm_formula, divergence_probe, multiplication_norm_formula, operator_i_norm_formula, Estimator,
    ProbeGrid,
};
use mixnorm_core::norm::weighted_pnorm;
use mixnorm_core::operators::{CompositionOperator, HardyOperator, IdentityOperator, MultiplicationOperator, Route};
use mixnorm_core::{
    change_of_variables_check, hardy_apply, hardy_constant, minkowski_gap, mixed_norm, operator_i_apply,
    product_apply, slice_norm_profile, Axis, DomainMask, ExponentVector, GeneralMap, GridFunction, GridOperator,
    KernelSet, Layer, ProductGrid, ScalarFn, Strategy, TriangularMap,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::report::{Outcome, Table};

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

type CheckFn = fn(&mut ChaCha8Rng) -> Result<(bool, String)>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("mixed_norm_oracle", mixed_norm_oracle),
    ("slice_recursion", slice_recursion),
    ("rotation_probe", rotation_probe),
    ("coupling_map", coupling_map),
    ("one_dimensional_base_case", one_dimensional),
    ("hardy_one_dimension", hardy_1d),
    ("hardy_two_dimensions", hardy_2d),
    ("rank_one_kernels", rank_one),
    ("multiplication", multiplication),
    ("operator_i_routes", operator_i),
    ("change_of_variables", change_of_variables),
    ("minkowski", minkowski),
    ("parser", parser),
];

pub fn run(seed: u64) -> Result<Outcome> {
    let mut checks = Vec::with_capacity(CHECKS.len());
    for (k, &(name, check)) in CHECKS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let (passed, detail) = match check(&mut rng) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e:#}")),
        };
        checks.push(Check { name, passed, detail });
    }
    let violations = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("check {} failed: {}", c.name, c.detail))
        .collect();
    let rows = checks
        .iter()
        .map(|c| vec![c.name.to_string(), c.passed.to_string(), c.detail.clone()])
        .collect();
    Ok(Outcome {
        results: json!({ "suite": "core", "checks": checks }),
        table: Some(Table {
            header: vec!["name", "passed", "detail"],
            rows,
        }),
        violations,
    })
}

fn exps(p: &[f64]) -> Result<ExponentVector> {
    Ok(ExponentVector::new(p.to_vec())?)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn full(g: &Arc<ProductGrid>) -> DomainMask {
    DomainMask::full(g.shape())
}

fn square(a: f64, b: f64, m: usize) -> Result<Arc<ProductGrid>> {
    Ok(ProductGrid::shared(vec![lebesgue_axis("x1", a, b, m)?, lebesgue_axis("x2", a, b, m)?])?)
}

fn sampled(rng: &mut ChaCha8Rng, lo: f64, hi: f64, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random edges from `a` with random, occasionally zero, density.
fn random_axis(rng: &mut ChaCha8Rng, label: &str, m: usize) -> Result<Axis> {
    let mut edges = vec![rng.random_range(-2.0..2.0)];
    for _ in 0..m {
        let last = edges[edges.len() - 1];
        edges.push(last + rng.random_range(0.05..1.0));
    }
    Ok(Axis::midpoint(label, edges, |_| Ok(if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.1..3.0) }))?)
}

/// Uniform cells on `[0, 1]`, then log-graded cells on `[1, top]`.
fn graded(label: &str, top: f64, m: usize) -> Result<Axis> {
    let inner = lebesgue_axis(label, 0.0, 1.0, m / 4)?;
    let outer = Axis::log_graded(label, 1.0, top, m - m / 4, 1.0, 0.05, |_| Ok(1.0))?;
    let mut edges = inner.edges().to_vec();
    edges.extend_from_slice(&outer.edges()[1..]);
    Ok(Axis::midpoint(label, edges, |_| Ok(1.0))?)
}

fn best_of(op: &dyn GridOperator, p: &ExponentVector, budget: usize, seed: u64) -> Result<f64> {
    let est = Estimator::new(op, p, p, seed)?;
    let mut best = 0.0f64;
    for s in [Strategy::Random, Strategy::Layered, Strategy::Ascent] {
        best = best.max(est.run(s, budget)?.empirical_lower);
    }
    Ok(best)
}

fn ratio(f: &GridFunction, tf: &GridFunction, p: &ExponentVector) -> Result<f64> {
    Ok(mixed_norm(tf, p)? / mixed_norm(f, p)?)
}

const F23: &str = "1/((1+abs(y1))*sqrt(1+abs(y2)))";

fn mixed_norm_oracle(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let axes = ["y1", "y2"].map(|l| lebesgue_axis(l, -50.0, 50.0, 1000));
    let grid = ProductGrid::shared(axes.into_iter().collect::<Result<Vec<_>, _>>()?)?;
    let f = ScalarFn::parse(F23, &["y1", "y2"])?;
    let f = GridFunction::try_from_fn(grid.clone(), full(&grid), |y| Ok(f.eval(y)?))?;
    let v = mixed_norm(&f, &exps(&[2.0, 3.0])?)?;
    let r = 50.0f64;
    let exact = (2.0 * (1.0 - 1.0 / (1.0 + r))).sqrt() * (4.0 * (1.0 - (1.0 + r).powf(-0.5))).cbrt();
    Ok((rel(v, exact) <= 1e-3, format!("norm {v:.6} on [-50,50]^2, closed form {exact:.6}")))
}

fn slice_recursion(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=3);
        let axes = (1..=n)
            .map(|i| {
                let m = rng.random_range(2..10);
                random_axis(rng, &format!("x{i}"), m)
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = ProductGrid::shared(axes)?;
        let bits = (0..grid.len()).map(|_| rng.random_bool(0.7)).collect();
        let values = sampled(rng, -3.0, 3.0, grid.len());
        let f = GridFunction::new(grid.clone(), DomainMask::from_bits(grid.shape(), bits)?, values)?;
        let p = exps(&sampled(rng, 1.0, 5.0, n))?;
        let whole = mixed_norm(&f, &p)?;
        let outer = weighted_pnorm(&slice_norm_profile(&f, &p)?, grid.axis(0).weights(), p.get(0));
        worst = worst.max(if whole > 0.0 { rel(outer, whole) } else { outer });
    }
    Ok((worst <= 1e-12, format!("max relative gap {worst:.2e}")))
}

fn rotation_probe(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let f = ScalarFn::parse(F23, &["y1", "y2"])?;
    let p = exps(&[2.0, 3.0])?;
    let res = ProbeGrid { cells: 200, scale: 0.05 };
    let rot = divergence_probe(
        |g| {
            let m = full(g);
            Ok(Box::new(CompositionOperator::new(&GeneralMap::quarter_turn(), g.clone(), m.clone(), g.clone(), m)?))
        },
        &f,
        &p,
        &[10.0, 100.0],
        res,
    )?;
    let id = divergence_probe(|g| Ok(Box::new(IdentityOperator::new(g.clone(), full(g)))), &f, &p, &[1e3, 1e4], res)?;
    let (a, b) = (rot[0].value, rot[1].value);
    let settle = rel(id[1].value, id[0].value);
    Ok((
        b > a && rel(a, 2.19) <= 0.05 && rel(b, 3.04) <= 0.05 && settle < 0.01,
        format!("rotation {a:.4} -> {b:.4}; identity step {:.2}%", 100.0 * settle),
    ))
}

fn coupling_map(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let m = 200;
    let map = TriangularMap::new(
        vec![
            Layer::parse(0, "x1/2", Some("2*y1"), Some("0.5"))?,
            Layer::parse(1, "x2/(1+x1)", Some("y2*(1+x1)"), Some("1/(1+x1)"))?,
        ],
        square(0.0, 1.0, m)?,
    )?;
    let h = 0.5 / (m as f64 - 0.5);
    let target = ProductGrid::shared(vec![
        Axis::uniform("y1", 0.0, m as f64 * h, m, |_| Ok(1.0))?,
        lebesgue_axis("y2", 0.0, 1.0, m)?,
    ])?;
    let p = exps(&[2.0, 3.0])?;
    let op = CompositionOperator::triangular(&map, target.clone())?;
    let formula = composition_norm_formula(&map, &p, &target, op.domain().1)?;
    let analytic = 2f64.powf(5.0 / 6.0);
    let report = Estimator::new(&op, &p, &p, rng.random())?.run(Strategy::Layered, 500)?;
    let best = report.empirical_lower;
    Ok((
        (formula - analytic).abs() <= 1e-6 && best >= 0.9 * formula && best <= 1.02 * formula,
        format!("formula {formula:.7}, empirical {best:.5}"),
    ))
}

fn one_dimensional(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let x = ProductGrid::shared(vec![lebesgue_axis("x1", 0.0, 1.0, 400)?])?;
    let map = TriangularMap::new(vec![Layer::parse(0, "x1/2", None, None)?], x)?;
    let y = ProductGrid::shared(vec![lebesgue_axis("y1", 0.0, 0.5, 400)?])?;
    let op = CompositionOperator::triangular(&map, y.clone())?;
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let pv = exps(&[p])?;
        let formula = composition_norm_formula(&map, &pv, &y, op.domain().1)?;
        let est = Estimator::new(&op, &pv, &pv, rng.random())?.run(Strategy::Layered, 200)?.empirical_lower;
        ok &= (formula - 2f64.powf(1.0 / p)).abs() <= 1e-9 && est >= 0.95 * formula && est <= 1.01 * formula;
        detail.push(format!("p={p}: {formula:.6}/{est:.5}"));
    }
    Ok((ok, detail.join(", ")))
}

fn hardy_1d(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let p = exps(&[2.0])?;
    let g = ProductGrid::shared(vec![graded("x1", 1e4, 800)?])?;
    let ind = GridFunction::from_fn(g.clone(), full(&g), |x| if x[0] <= 1.0 { 1.0 } else { 0.0 })?;
    let indicator = ratio(&ind, &hardy_apply(&ind)?, &p)?;
    let g = ProductGrid::shared(vec![graded("x1", 1e8, 4000)?])?;
    let ext = GridFunction::from_fn(g.clone(), full(&g), |x| {
        if (1.0..=1e6).contains(&x[0]) {
            x[0].powf(-0.5)
        } else {
            0.0
        }
    })?;
    let extremal = ratio(&ext, &hardy_apply(&ext)?, &p)?;
    let small = ProductGrid::shared(vec![graded("x1", 1e3, 200)?])?;
    let worst = best_of(&HardyOperator::new(small.clone(), full(&small))?, &p, 100, rng.random())?;
    Ok((
        rel(indicator, 2f64.sqrt()) <= 0.01 && extremal >= 1.7 && worst <= 2.0 * 1.01,
        format!("indicator {indicator:.5}, extremal {extremal:.4}, max sampled {worst:.4}"),
    ))
}

fn hardy_2d(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let p = exps(&[2.0, 2.0])?;
    let c = hardy_constant(&p)?;
    let g = ProductGrid::shared(vec![graded("x1", 1e3, 300)?, graded("x2", 1e3, 300)?])?;
    let ind = GridFunction::from_fn(g.clone(), full(&g), |x| if x[0] <= 1.0 && x[1] <= 1.0 { 1.0 } else { 0.0 })?;
    let indicator = ratio(&ind, &hardy_apply(&ind)?, &p)?;
    let g = ProductGrid::shared(vec![graded("x1", 1e6, 320)?, graded("x2", 1e6, 320)?])?;
    let ext = GridFunction::from_fn(g.clone(), full(&g), |x| {
        if x.iter().all(|v| (1.0..=1e4).contains(v)) {
            (x[0] * x[1]).powf(-0.5)
        } else {
            0.0
        }
    })?;
    let extremal = ratio(&ext, &hardy_apply(&ext)?, &p)?;
    let small = ProductGrid::shared(vec![graded("x1", 1e2, 40)?, graded("x2", 1e2, 40)?])?;
    let worst = best_of(&HardyOperator::new(small.clone(), full(&small))?, &p, 100, rng.random())?;
    Ok((
        rel(indicator, 2.0) <= 0.02 && extremal >= 0.7 * c && worst <= c * 1.01,
        format!("indicator {indicator:.4}, extremal {extremal:.4}, max sampled {worst:.4}"),
    ))
}

fn rank_one(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let x = square(0.0, 1.0, 16)?;
    let y = square(0.0, 2.0, 12)?;
    let xm = full(&x);
    let mut worst_bound = 0.0f64;
    let mut worst_extremal = f64::INFINITY;
    for _ in 0..20 {
        let mut pairs = Vec::new();
        for _ in 0..2 {
            let u = format!("{} + {}*t^2", rng.random_range(0.1..2.0), rng.random_range(0.0..1.0));
            let (c, d) = (rng.random_range(0.1..2.0), rng.random_range(0.0..3.0));
            let v = if rng.random_bool(0.5) {
                format!("{c}*exp(-{d}*t) + {}", rng.random_range(0.0..0.5))
            } else {
                format!("max(0, {c} - {d}*t)")
            };
            pairs.push((ScalarFn::parse(&u, &["t"])?, ScalarFn::parse(&v, &["t"])?));
        }
        let kernels = KernelSet::rank_one(pairs);
        let p = exps(&sampled(rng, 1.2, 4.0, 2))?;
        let q = exps(&sampled(rng, 1.2, 4.0, 2))?;
        let bound: f64 = kernels.rank_one_constants(&x, &y, &p, &q)?.iter().product();
        let f = GridFunction::new(y.clone(), full(&y), sampled(rng, -1.0, 1.0, y.len()))?;
        let kf = product_apply(&kernels, &f, &x, &xm)?;
        worst_bound = worst_bound.max(mixed_norm(&kf, &p)? / (bound * mixed_norm(&f, &q)?));
        let e = kernels.holder_extremal(&y, &q)?;
        let ke = product_apply(&kernels, &e, &x, &xm)?;
        worst_extremal = worst_extremal.min(mixed_norm(&ke, &p)? / (bound * mixed_norm(&e, &q)?));
    }
    Ok((
        worst_bound <= 1.01 && worst_extremal >= 0.98,
        format!("max ratio/bound {worst_bound:.6}, min extremal ratio/bound {worst_extremal:.6}"),
    ))
}

fn multiplication(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid = square(0.0, 1.0, 8)?;
    let p = exps(&[2.0, 3.0])?;
    let mut worst = 0.0f64;
    let mut peaks = true;
    for _ in 0..10 {
        let g = GridFunction::new(grid.clone(), full(&grid), sampled(rng, -3.0, 3.0, grid.len()))?;
        let max = multiplication_norm_formula(&g);
        let argmax = g.argmax_abs();
        let op = MultiplicationOperator::new(g);
        let report = Estimator::new(&op, &p, &p, rng.random())?.run(Strategy::Layered, 3 * grid.len())?;
        worst = worst.max((report.empirical_lower - max).abs());
        peaks &= report.witness_peak == argmax;
    }
    Ok((worst <= 1e-10 && peaks, format!("max |empirical - max|g|| {worst:.2e}, peaks at argmax: {peaks}")))
}

fn operator_i(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let x = square(0.0, 1.0, 60)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let a: f64 = rng.random_range(0.5..2.0);
        let c: f64 = rng.random_range(0.0..2.0);
        let map = TriangularMap::new(
            vec![
                Layer::parse(0, &format!("{a}*x1"), Some(&format!("y1/{a}")), Some(&a.to_string()))?,
                Layer::parse(
                    1,
                    &format!("x2/(1 + {c}*x1)"),
                    Some(&format!("y2*(1 + {c}*x1)")),
                    Some(&format!("1/(1 + {c}*x1)")),
                )?,
            ],
            x.clone(),
        )?;
        let y = ProductGrid::shared(vec![lebesgue_axis("y1", 0.0, a, 120)?, lebesgue_axis("y2", 0.0, 1.0, 120)?])?;
        let vars = ["y1", "y2"];
        let g = ScalarFn::parse(
            &format!(
                "1 + {}*exp(-((y1 - {})^2 + (y2 - {})^2)*{})",
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..a),
                rng.random_range(0.0..1.0),
                rng.random_range(1.0..8.0)
            ),
            &vars,
        )?;
        let f = ScalarFn::parse(
            &format!("{} + {}*y1*y2 + exp(-{}*y1)", rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..3.0)),
            &vars,
        )?;
        let g = GridFunction::try_from_fn(y.clone(), full(&y), |v| Ok(g.eval(v)?))?;
        let f = GridFunction::try_from_fn(y.clone(), full(&y), |v| Ok(f.eval(v)?))?;
        let direct = operator_i_apply(&map, &g, &f, Route::Direct)?;
        let pipeline = operator_i_apply(&map, &g, &f, Route::Pipeline)?;
        let dev = direct.values().iter().zip(pipeline.values()).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        worst = worst.max(dev / direct.max_abs());
    }
    let grid = square(0.0, 1.0, 20)?;
    let id = TriangularMap::identity(grid.clone())?;
    let one = GridFunction::constant(grid.clone(), full(&grid), 1.0)?;
    let formula = operator_i_norm_formula(&id, &one, &exps(&[2.0, 2.0])?)?;
    Ok((worst <= 1e-2 && formula == 4.0, format!("max relative route gap {worst:.2e}, identity formula {formula}")))
}

fn change_of_variables(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let source = ProductGrid::shared(vec![lebesgue_axis("x1", 0.0, 2.0, 1000)?])?;
    let mut worst = 0.0f64;
    for case in 0..20 {
        let (a, b): (f64, f64) = (rng.random_range(0.2..2.0), rng.random_range(0.0..1.0));
        let psi = match case % 4 {
            0 => format!("{a}*x1 + {b}*x1^3"),
            1 => format!("5 - {a}*x1 - {b}*x1^2"),
            2 => format!("exp({}*x1)", a.min(1.5)),
            _ => format!("sqrt(1 + {a}*x1) + {b}*x1"),
        };
        let mut map = TriangularMap::new(vec![Layer::parse(0, &psi, None, None)?], source.clone())?;
        if rng.random_bool(0.5) {
            let ws = ScalarFn::parse(&format!("1 + {}*x1", rng.random_range(0.0..2.0)), &["x1"])?;
            let wt = ScalarFn::parse(&format!("1/(1 + {}*y1^2)", rng.random_range(0.0..1.0)), &["y1"])?;
            map = map.with_densities(vec![ws], vec![wt])?;
        }
        let forward = &map.layers()[0].forward;
        let (u, v) = (forward.eval(&[0.0])?, forward.eval(&[2.0])?);
        let (lo, hi) = (u.min(v), u.max(v));
        let t0 = rng.random_range(0.0..0.8);
        let t1 = rng.random_range(t0 + 0.1..=1.0);
        let g = ScalarFn::parse(
            &format!("1 + {}*exp(-{}*(y1 - {})^2)", rng.random_range(0.0..2.0), rng.random_range(0.1..4.0), (lo + hi) / 2.0),
            &["y1"],
        )?;
        let (lhs, rhs) = change_of_variables_check(&g, &map, (lo + t0 * (hi - lo), lo + t1 * (hi - lo)), 1000)?;
        worst = worst.max(rel(lhs, rhs));
    }
    Ok((worst <= 1e-3, format!("max relative gap {worst:.2e}")))
}

fn minkowski(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let (m1, m2) = (rng.random_range(3..16), rng.random_range(3..16));
        let grid = ProductGrid::shared(vec![random_axis(rng, "x1", m1)?, random_axis(rng, "x2", m2)?])?;
        let p = rng.random_range(1.0..6.0);
        let f = GridFunction::new(grid.clone(), full(&grid), sampled(rng, -2.0, 2.0, grid.len()))?;
        let (lhs, rhs) = minkowski_gap(&f, p)?;
        if lhs > rhs * (1.0 + 1e-12) {
            violations += 1;
        }
        let u = sampled(rng, 0.0, 2.0, m1);
        let v = sampled(rng, 0.0, 2.0, m2);
        let sep = GridFunction::new(grid.clone(), full(&grid), (0..m1 * m2).map(|k| u[k / m2] * v[k % m2]).collect())?;
        let (lhs, rhs) = minkowski_gap(&sep, p)?;
        worst = worst.max(rel(lhs, rhs));
    }
    Ok((violations == 0 && worst <= 1e-10, format!("{violations} violations, separable gap {worst:.2e}")))
}

const GOLDEN: &[(&str, &[f64], f64)] = &[
    ("1 + 2 * 3", &[], 7.0),
    ("8 / 4 / 2", &[], 1.0),
    ("2 ^ 3 ^ 2", &[], 512.0),
    ("-2 ^ 2", &[], 4.0),
    ("1.5e2 + .5", &[], 150.5),
    ("min(x1, y1) + max(x1, y1)", &[1.0, 5.0], 6.0),
    ("chi(0, x1, y1)", &[2.0, 2.1], 0.0),
    ("1/((1+abs(y1))*sqrt(1+abs(x1)))", &[3.0, 1.0], 0.25),
];

const BAD: &[(&str, usize)] = &[("", 0), ("1 +", 3), ("min(x1", 6), ("x1 y1", 3), ("1e+", 3), ("abs x1", 4)];

const VARS: &[&str] = &["x1", "x2", "y1"];

fn node(kind: ExprKind) -> Expr {
    Expr::new(kind, Span::new(0, 0))
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.3) {
        return match rng.random_range(0..3) {
            0 => node(ExprKind::Const(f64::from(rng.random_range(0u32..1000)) / 8.0)),
            1 => node(ExprKind::Const(rng.random_range(0.0..1e6))),
            _ => {
                let slot = rng.random_range(0..VARS.len());
                node(ExprKind::Var {
                    name: VARS[slot].to_string(),
                    slot,
                })
            }
        };
    }
    match rng.random_range(0..3) {
        0 => node(ExprKind::Neg(Box::new(random_expr(rng, depth - 1)))),
        1 => {
            let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];
            let op = ops[rng.random_range(0..ops.len())];
            node(ExprKind::Binary {
                op,
                lhs: Box::new(random_expr(rng, depth - 1)),
                rhs: Box::new(random_expr(rng, depth - 1)),
            })
        }
        _ => {
            let func = Func::ALL[rng.random_range(0..Func::ALL.len())];
            let args = (0..func.arity()).map(|_| random_expr(rng, depth - 1)).collect();
            node(ExprKind::Call { func, args })
        }
    }
}

fn parser(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut failures = Vec::new();
    for &(src, args, want) in GOLDEN {
        match parse(src, &["x1", "y1"]).map(|e| e.eval(args)) {
            Ok(Ok(got)) if (got - want).abs() <= 1e-12 * want.abs().max(1.0) => {}
            other => failures.push(format!("{src:?}: {other:?}")),
        }
    }
    for &(src, offset) in BAD {
        match parse(src, &["x1", "y1"]) {
            Err(e) if e.offset == offset => {}
            other => failures.push(format!("{src:?}: {other:?}")),
        }
    }
    let trips = 500;
    for _ in 0..trips {
        let e = random_expr(rng, 5);
        let text = e.to_string();
        match parse(&text, VARS) {
            Ok(back) if back == e => {}
            other => failures.push(format!("{text}: {other:?}")),
        }
    }
    let detail = match failures.first() {
        None => format!("{} golden cases, {} error positions, {trips} round-trips", GOLDEN.len(), BAD.len()),
        Some(first) => format!("{} failures, first {first}", failures.len()),
    };
    Ok((failures.is_empty(), detail))
}
