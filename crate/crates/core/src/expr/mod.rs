//! Expression language used by configurations to describe weights, maps,
//! kernels and test functions.
//!
//! ```
//! use mixnorm_core::expr::parse;
//!
//! let e = parse("1/((1+abs(y1))*sqrt(1+abs(y2)))", &["y1", "y2"]).unwrap();
//! assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 1.0);
//! ```

mod ast;
mod eval;
mod func;
mod parser;

pub use ast::{BinOp, Expr, ExprKind, Func, Span};
pub use eval::{evaluate, EvalError, EvalErrorKind};
pub use func::ScalarFn;
pub use parser::{parse, ParseError};

/// `["x1", …, "xn"]`-style names.
pub fn indexed_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}
