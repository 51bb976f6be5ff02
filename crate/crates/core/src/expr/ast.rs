use std::fmt;

/// Byte range of a node in its source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Built-in functions callable from expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Exp,
    Log,
    Min,
    Max,
    Pow,
    /// `chi(a, b, e)`: indicator of the closed interval `[a, b]` evaluated at `e`.
    Chi,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Abs,
        Func::Sqrt,
        Func::Exp,
        Func::Log,
        Func::Min,
        Func::Max,
        Func::Pow,
        Func::Chi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
            Func::Chi => "chi",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Abs | Func::Sqrt | Func::Exp | Func::Log => 1,
            Func::Min | Func::Max | Func::Pow => 2,
            Func::Chi => 3,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Expression tree node. Equality is structural and ignores spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Const(f64),
    /// `slot` is the position of `name` in the variable list the expression was parsed against.
    Var { name: String, slot: usize },
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call { func: Func, args: Vec<Expr> },
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Self { kind, span }
    }

    /// Whether the variable in `slot` occurs anywhere in the tree.
    pub fn uses_slot(&self, slot: usize) -> bool {
        match &self.kind {
            ExprKind::Const(_) => false,
            ExprKind::Var { slot: s, .. } => *s == slot,
            ExprKind::Neg(inner) => inner.uses_slot(slot),
            ExprKind::Binary { lhs, rhs, .. } => lhs.uses_slot(slot) || rhs.uses_slot(slot),
            ExprKind::Call { args, .. } => args.iter().any(|a| a.uses_slot(slot)),
        }
    }

    /// Distinct variable names in order of first occurrence.
    pub fn free_vars(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match &e.kind {
                ExprKind::Const(_) => {}
                ExprKind::Var { name, .. } => {
                    if !out.iter().any(|n| n == name) {
                        out.push(name.clone());
                    }
                }
                ExprKind::Neg(inner) => walk(inner, out),
                ExprKind::Binary { lhs, rhs, .. } => {
                    walk(lhs, out);
                    walk(rhs, out);
                }
                ExprKind::Call { args, .. } => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn node_count(&self) -> usize {
        match &self.kind {
            ExprKind::Const(_) | ExprKind::Var { .. } => 1,
            ExprKind::Neg(inner) => 1 + inner.node_count(),
            ExprKind::Binary { lhs, rhs, .. } => 1 + lhs.node_count() + rhs.node_count(),
            ExprKind::Call { args, .. } => 1 + args.iter().map(Expr::node_count).sum::<usize>(),
        }
    }
}

/// Fully parenthesized form; reparses to a structurally identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Const(c) => write!(f, "{c:?}"),
            ExprKind::Var { name, .. } => f.write_str(name),
            ExprKind::Neg(inner) => write!(f, "(-{inner})"),
            ExprKind::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            ExprKind::Call { func, args } => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
