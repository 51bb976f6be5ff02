#![allow(dead_code)]

use std::sync::Arc;

use mixnorm_core::expr::{parse, BinOp, EvalErrorKind, Expr, ExprKind, Func, Span};
use mixnorm_core::grid::lebesgue_axis;
use mixnorm_core::ProductGrid;
use proptest::prelude::*;
use proptest::strategy::BoxedStrategy;

pub fn square(a: f64, b: f64, m: usize) -> Arc<ProductGrid> {
    ProductGrid::shared(vec![lebesgue_axis("x1", a, b, m).unwrap(), lebesgue_axis("x2", a, b, m).unwrap()]).unwrap()
}

pub fn line(a: f64, b: f64, m: usize) -> Arc<ProductGrid> {
    ProductGrid::shared(vec![lebesgue_axis("x1", a, b, m).unwrap()]).unwrap()
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Value(f64),
    ParseError { offset: usize, expected: &'static [&'static str] },
    EvalError(fn(&EvalErrorKind) -> bool),
}

#[derive(Debug, Clone)]
pub struct GoldenCase {
    pub source: &'static str,
    pub vars: &'static [&'static str],
    pub args: &'static [f64],
    pub outcome: Outcome,
}

const XY: &[&str] = &["x1", "y1"];

fn ok(source: &'static str, args: &'static [f64], value: f64) -> GoldenCase {
    GoldenCase {
        source,
        vars: XY,
        args,
        outcome: Outcome::Value(value),
    }
}

fn parse_err(source: &'static str, offset: usize, expected: &'static [&'static str]) -> GoldenCase {
    GoldenCase {
        source,
        vars: XY,
        args: &[],
        outcome: Outcome::ParseError { offset, expected },
    }
}

fn eval_err(source: &'static str, args: &'static [f64], kind: fn(&EvalErrorKind) -> bool) -> GoldenCase {
    GoldenCase {
        source,
        vars: XY,
        args,
        outcome: Outcome::EvalError(kind),
    }
}

fn is_div(k: &EvalErrorKind) -> bool {
    matches!(k, EvalErrorKind::DivisionByZero)
}

fn is_domain(k: &EvalErrorKind) -> bool {
    matches!(k, EvalErrorKind::Domain(_))
}

fn is_unbound(k: &EvalErrorKind) -> bool {
    matches!(k, EvalErrorKind::UnboundVariable(_))
}

pub fn golden_cases() -> Vec<GoldenCase> {
    vec![
        ok("1 + 2 * 3", &[], 7.0),
        ok("(1 + 2) * 3", &[], 9.0),
        ok("8 / 4 / 2", &[], 1.0),
        ok("10 - 4 - 3", &[], 3.0),
        ok("2 ^ 3 ^ 2", &[], 512.0),
        ok("-2 ^ 2", &[], 4.0),
        ok("2 ^ -1", &[], 0.5),
        ok("--3", &[], 3.0),
        ok("1.5e2 + .5", &[], 150.5),
        ok("2E-1", &[], 0.2),
        ok("x1 * y1", &[3.0, 4.0], 12.0),
        ok("abs(-x1)", &[2.5, 0.0], 2.5),
        ok("sqrt(16)", &[], 4.0),
        ok("exp(0) + log(1)", &[], 1.0),
        ok("min(x1, y1) + max(x1, y1)", &[1.0, 5.0], 6.0),
        ok("pow(1 + x1, 1/3)", &[1.0, 0.0], 2f64.cbrt()),
        ok("chi(0, x1, y1)", &[2.0, 2.0], 1.0),
        ok("chi(0, x1, y1)", &[2.0, 2.1], 0.0),
        ok("1/((1+abs(y1))*sqrt(1+abs(x1)))", &[3.0, 1.0], 0.25),
        ok("  x1\n +\ty1 ", &[1.0, 2.0], 3.0),
        ok("(-2) ^ 3 + 0 ^ 0", &[], -7.0),
        ok("y1 - x1", &[1.0, 0.25], -0.75),
        parse_err("", 0, &["number", "identifier", "'('", "'-'"]),
        parse_err("1 +", 3, &["number", "identifier", "'('", "'-'"]),
        parse_err("min(x1", 6, &["','", "')'"]),
        parse_err("(x1 + 1", 7, &["')'", "operator"]),
        parse_err("x1 y1", 3, &["operator", "end of input"]),
        parse_err("foo(x1)", 0, &[]),
        parse_err("z + 1", 0, &[]),
        parse_err("1 $ 2", 2, &[]),
        parse_err("1e+", 3, &["digit"]),
        parse_err("1e999", 0, &[]),
        parse_err("sqrt(1, 2)", 0, &[]),
        parse_err("min(1)", 0, &[]),
        parse_err("abs x1", 4, &["'('"]),
        parse_err("*2", 0, &["number", "identifier", "'('", "'-'"]),
        parse_err("min(1,)", 6, &["number", "identifier", "'('", "'-'"]),
        eval_err("1 / (x1 - 1)", &[1.0, 0.0], is_div),
        eval_err("log(x1)", &[0.0, 0.0], is_domain),
        eval_err("sqrt(x1)", &[-1.0, 0.0], is_domain),
        eval_err("0 ^ -1", &[], is_domain),
        eval_err("pow(x1, 0.5)", &[-4.0, 0.0], is_domain),
        eval_err("(-8) ^ (1/3)", &[], is_domain),
        eval_err("exp(1000) - exp(1000)", &[], is_domain),
        eval_err("x1 + y1", &[1.0], is_unbound),
    ]
}

/// Check one golden case; `Err` carries a description of the mismatch.
pub fn check_golden(case: &GoldenCase) -> Result<(), String> {
    let parsed = parse(case.source, case.vars);
    match (&case.outcome, parsed) {
        (Outcome::ParseError { offset, expected }, Err(e)) => {
            if e.offset != *offset {
                return Err(format!("{:?}: offset {} != {offset}", case.source, e.offset));
            }
            if e.offset > case.source.len() {
                return Err(format!("{:?}: offset beyond source", case.source));
            }
            if !expected.is_empty() && e.expected != *expected {
                return Err(format!("{:?}: expected set {:?} != {expected:?}", case.source, e.expected));
            }
            Ok(())
        }
        (Outcome::ParseError { .. }, Ok(_)) => Err(format!("{:?}: parsed but should fail", case.source)),
        (_, Err(e)) => Err(format!("{:?}: unexpected parse error {e}", case.source)),
        (Outcome::Value(v), Ok(ast)) => match ast.eval(case.args) {
            Ok(got) if (got - v).abs() <= 1e-12 * v.abs().max(1.0) => Ok(()),
            Ok(got) => Err(format!("{:?}: {got} != {v}", case.source)),
            Err(e) => Err(format!("{:?}: eval error {e}", case.source)),
        },
        (Outcome::EvalError(pred), Ok(ast)) => match ast.eval(case.args) {
            Err(e) if pred(&e.kind) && e.span.end <= case.source.len() => Ok(()),
            other => Err(format!("{:?}: got {other:?}", case.source)),
        },
    }
}

fn node(kind: ExprKind) -> Expr {
    Expr::new(kind, Span::new(0, 0))
}

/// Random well-formed expressions over `vars` (constants are nonnegative,
/// as the lexer produces them).
pub fn arb_expr(vars: &'static [&'static str]) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|k| node(ExprKind::Const(f64::from(k) / 8.0))),
        (0.0f64..1e6).prop_map(|c| node(ExprKind::Const(c))),
        prop::sample::select((0..vars.len()).collect::<Vec<_>>())
            .prop_map(move |slot| node(ExprKind::Var { name: vars[slot].to_string(), slot })),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| node(ExprKind::Neg(Box::new(e)))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| node(ExprKind::Binary {
                    op,
                    lhs: Box::new(l),
                    rhs: Box::new(r)
                })),
            (prop::sample::select(Func::ALL.to_vec()), prop::collection::vec(inner, 3)).prop_map(|(func, mut args)| {
                args.truncate(func.arity());
                node(ExprKind::Call { func, args })
            }),
        ]
    })
    .boxed()
}

/// `parse(display(e)) == e`.
pub fn round_trips(e: &Expr, vars: &[&str]) -> Result<(), String> {
    let text = e.to_string();
    match parse(&text, vars) {
        Ok(back) if &back == e => Ok(()),
        Ok(back) => Err(format!("{text} reparsed as {back}")),
        Err(err) => Err(format!("{text}: {err}")),
    }
}

/// Uniform cells on `[0, 1]` followed by log-graded cells on `[1, top]`, with
/// an edge at exactly 1 so indicators of `[0, 1]` are resolved.
pub fn graded(label: &str, top: f64, m: usize) -> mixnorm_core::Axis {
    use mixnorm_core::Axis;
    let inner = lebesgue_axis(label, 0.0, 1.0, m / 4).unwrap();
    let outer = Axis::log_graded(label, 1.0, top, m - m / 4, 1.0, 0.05, |_| Ok(1.0)).unwrap();
    let mut edges = inner.edges().to_vec();
    edges.extend_from_slice(&outer.edges()[1..]);
    Axis::midpoint(label, edges, |_| Ok(1.0)).unwrap()
}
