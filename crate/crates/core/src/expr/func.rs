use std::fmt;
use std::sync::Arc;

use super::{parse, EvalError, Expr, ParseError};

type NativeFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A real function of a fixed argument list, backed by a parsed expression or
/// a native closure. Arguments are passed positionally in the order of the
/// variable list the function was declared with.
#[derive(Clone)]
pub enum ScalarFn {
    Const(f64),
    Expr { source: String, ast: Expr },
    Native { arity: usize, f: Arc<NativeFn> },
}

impl ScalarFn {
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self, ParseError> {
        let ast = parse(source, vars)?;
        Ok(ScalarFn::Expr {
            source: source.to_string(),
            ast,
        })
    }

    pub fn native(arity: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn::Native {
            arity,
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        ScalarFn::Const(c)
    }

    #[inline]
    pub fn eval(&self, args: &[f64]) -> Result<f64, EvalError> {
        match self {
            ScalarFn::Const(c) => Ok(*c),
            ScalarFn::Expr { ast, .. } => ast.eval(args),
            ScalarFn::Native { f, .. } => Ok(f(args)),
        }
    }

    /// Conservative: native closures are assumed to read every argument.
    pub fn depends_on(&self, slot: usize) -> bool {
        match self {
            ScalarFn::Const(_) => false,
            ScalarFn::Expr { ast, .. } => ast.uses_slot(slot),
            ScalarFn::Native { arity, .. } => slot < *arity,
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            ScalarFn::Const(c) => Some(*c),
            _ => None,
        }
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Const(c) => write!(f, "Const({c})"),
            ScalarFn::Expr { source, .. } => write!(f, "Expr({source:?})"),
            ScalarFn::Native { arity, .. } => write!(f, "Native(arity = {arity})"),
        }
    }
}

impl From<f64> for ScalarFn {
    fn from(c: f64) -> Self {
        ScalarFn::Const(c)
    }
}
