//! Hand-written recursive-descent parser.
//!
//! Precedence, loosest first: `+ -`, `* /`, `^` (right associative), unary
//! minus, atoms. Unary minus binds tighter than `^`, so `-x^2` is `(-x)^2`.

use std::fmt;

use super::ast::{BinOp, Expr, ExprKind, Func, Span};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// Byte offset into the source.
    pub offset: usize,
    /// 1-based line.
    pub line: usize,
    /// 1-based column, counted in characters.
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    fn at(source: &str, offset: usize, message: impl Into<String>, expected: &[&str]) -> Self {
        let offset = offset.min(source.len());
        let before = &source[..offset];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = source[line_start..offset].chars().count() + 1;
        Self {
            offset,
            line,
            column,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at {}:{} (offset {}): {}",
            self.line, self.column, self.offset, self.message
        )?;
        if !self.expected.is_empty() {
            write!(f, "; expected one of: {}", self.expected.join(" "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, Span::new(start, start + 1)));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                } else {
                    return Err(ParseError::at(src, j, "malformed exponent in number", &["digit"]));
                }
            }
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::at(src, start, format!("invalid number '{text}'"), &[]))?;
            if !value.is_finite() {
                return Err(ParseError::at(src, start, format!("number '{text}' is not finite"), &[]));
            }
            out.push((Tok::Num(value), Span::new(start, i)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), Span::new(start, i)));
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(ParseError::at(src, start, format!("unexpected character '{ch}'"), &[]));
    }
    out.push((Tok::End, Span::new(src.len(), src.len())));
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, Span)>,
    pos: usize,
    vars: &'a [&'a str],
}

const EXPR_START: &[&str] = &["number", "identifier", "'('", "'-'"];

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        ParseError::at(self.src, self.span().start, message, expected)
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        self.error(format!("unexpected {}", self.peek().describe()), expected)
    }

    fn expression(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.power()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.power()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.unary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.power()?;
            return Ok(binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            let (_, span) = self.bump();
            let inner = self.unary()?;
            let span = span.join(inner.span);
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                let (_, span) = self.bump();
                Ok(Expr::new(ExprKind::Const(v), span))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expression()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected(&["')'", "operator"]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                let span = self.span();
                if let Some(slot) = self.vars.iter().position(|v| *v == name) {
                    self.bump();
                    return Ok(Expr::new(ExprKind::Var { name, slot }, span));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.bump();
                    return self.call(func, span);
                }
                let mut expected: Vec<&str> = self.vars.to_vec();
                expected.extend(Func::ALL.iter().map(|f| f.name()));
                Err(self.error(format!("unknown identifier '{name}'"), &expected))
            }
            _ => Err(self.unexpected(EXPR_START)),
        }
    }

    fn call(&mut self, func: Func, name_span: Span) -> Result<Expr, ParseError> {
        if *self.peek() != Tok::LParen {
            return Err(self.unexpected(&["'('"]));
        }
        self.bump();
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            let end = self.bump().1;
            return self.finish_call(func, args, name_span.join(end));
        }
        loop {
            args.push(self.expression()?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    let end = self.bump().1;
                    return self.finish_call(func, args, name_span.join(end));
                }
                _ => return Err(self.unexpected(&["','", "')'"])),
            }
        }
    }

    fn finish_call(&self, func: Func, args: Vec<Expr>, span: Span) -> Result<Expr, ParseError> {
        if args.len() != func.arity() {
            return Err(ParseError::at(
                self.src,
                span.start,
                format!(
                    "{} expects {} argument(s), found {}",
                    func.name(),
                    func.arity(),
                    args.len()
                ),
                &[],
            ));
        }
        Ok(Expr::new(ExprKind::Call { func, args }, span))
    }
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span.join(rhs.span);
    Expr::new(
        ExprKind::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        },
        span,
    )
}

/// Parse `source`, resolving identifiers against `allowed_vars`. A variable's
/// slot is its index in `allowed_vars`.
pub fn parse(source: &str, allowed_vars: &[&str]) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        src: source,
        toks,
        pos: 0,
        vars: allowed_vars,
    };
    let expr = p.expression()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected(&["operator", "end of input"]));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unterminated_call_reports_end_position() {
        let err = parse("min(x1", &["x1"]).unwrap_err();
        assert_eq!(err.offset, 6);
        assert_eq!(err.column, 7);
        assert_eq!(err.expected, vec!["','", "')'"]);
    }

    #[test]
    fn line_and_column_follow_newlines() {
        let err = parse("x1 +\n  foo", &["x1"]).unwrap_err();
        assert_eq!((err.line, err.column, err.offset), (2, 3, 7));
    }

    #[test]
    fn spans_cover_source() {
        let e = parse("abs(x1) + 2", &["x1"]).unwrap();
        assert_eq!(e.span, Span::new(0, 11));
    }
}
