use std::collections::HashMap;
use std::fmt;

use super::ast::{BinOp, Expr, ExprKind, Func, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum EvalErrorKind {
    UnboundVariable(String),
    DivisionByZero,
    Domain(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub span: Span,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = (self.span.start, self.span.end);
        match &self.kind {
            EvalErrorKind::UnboundVariable(name) => {
                write!(f, "unbound variable '{name}' at {a}..{b}")
            }
            EvalErrorKind::DivisionByZero => write!(f, "division by zero at {a}..{b}"),
            EvalErrorKind::Domain(msg) => write!(f, "domain error at {a}..{b}: {msg}"),
        }
    }
}

impl std::error::Error for EvalError {}

fn domain(span: Span, msg: impl Into<String>) -> EvalError {
    EvalError {
        kind: EvalErrorKind::Domain(msg.into()),
        span,
    }
}

fn checked_pow(base: f64, exponent: f64, span: Span) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(domain(span, "zero raised to a negative power"));
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(domain(span, format!("negative base {base} with non-integer exponent {exponent}")));
    }
    Ok(base.powf(exponent))
}

impl Expr {
    /// Evaluate with variables supplied by slot.
    pub fn eval(&self, vars: &[f64]) -> Result<f64, EvalError> {
        self.eval_with(&|_: &str, slot: usize| vars.get(slot).copied())
    }

    fn eval_with(&self, lookup: &dyn Fn(&str, usize) -> Option<f64>) -> Result<f64, EvalError> {
        let span = self.span;
        let value = match &self.kind {
            ExprKind::Const(c) => *c,
            ExprKind::Var { name, slot } => lookup(name, *slot).ok_or_else(|| EvalError {
                kind: EvalErrorKind::UnboundVariable(name.clone()),
                span,
            })?,
            ExprKind::Neg(inner) => -inner.eval_with(lookup)?,
            ExprKind::Binary { op, lhs, rhs } => {
                let a = lhs.eval_with(lookup)?;
                let b = rhs.eval_with(lookup)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError {
                                kind: EvalErrorKind::DivisionByZero,
                                span,
                            });
                        }
                        a / b
                    }
                    BinOp::Pow => checked_pow(a, b, span)?,
                }
            }
            ExprKind::Call { func, args } => {
                let mut vals = [0.0; 3];
                for (slot, a) in vals.iter_mut().zip(args) {
                    *slot = a.eval_with(lookup)?;
                }
                match func {
                    Func::Abs => vals[0].abs(),
                    Func::Sqrt => {
                        if vals[0] < 0.0 {
                            return Err(domain(span, format!("sqrt of negative value {}", vals[0])));
                        }
                        vals[0].sqrt()
                    }
                    Func::Exp => vals[0].exp(),
                    Func::Log => {
                        if vals[0] <= 0.0 {
                            return Err(domain(span, format!("log of nonpositive value {}", vals[0])));
                        }
                        vals[0].ln()
                    }
                    Func::Min => vals[0].min(vals[1]),
                    Func::Max => vals[0].max(vals[1]),
                    Func::Pow => checked_pow(vals[0], vals[1], span)?,
                    Func::Chi => {
                        if vals[0] <= vals[2] && vals[2] <= vals[1] {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        };
        if value.is_nan() {
            return Err(domain(span, "result is not a number"));
        }
        Ok(value)
    }
}

/// Evaluate with variables bound by name.
pub fn evaluate(ast: &Expr, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
    ast.eval_with(&|name: &str, _slot: usize| bindings.get(name).copied())
}
