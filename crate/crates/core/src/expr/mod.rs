//! Scalar coefficient expressions over positions `x1..xd`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | 'pi' | 'e' | 'x'<n> | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | sqrt | sin | cos | tanh
//! ```
//!
//! Expressions are immutable and cheap to clone. [`Expr::deriv`] returns a new
//! expression, so derivatives can be printed as well as evaluated.

mod deriv;
mod parse;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::parse;

/// Byte range of the source text an expression node came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Const(Constant),
    /// Zero-based axis index; printed as `x{index + 1}`.
    Var(usize),
    Neg(Expr),
    Bin(BinOp, Expr, Expr),
    Call(Func, Expr),
}

#[derive(Debug, PartialEq)]
struct Inner {
    node: Node,
    span: Span,
}

/// Immutable, shareable expression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr(Arc<Inner>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NegativeBaseFractionalPower,
    Overflow,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::LogOfNonPositive => "log of a non-positive number",
            DomainKind::SqrtOfNegative => "sqrt of a negative number",
            DomainKind::NegativeBaseFractionalPower => "negative base raised to a fractional power",
            DomainKind::Overflow => "non-finite intermediate value",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{function}` takes 1 argument, got {found} (byte {offset})")]
    Arity {
        function: String,
        found: usize,
        offset: usize,
    },
    #[error("{kind} in sub-expression at bytes {span}")]
    Domain { kind: DomainKind, span: Span },
    #[error("expression uses x{needed} but the point has {got} coordinates")]
    PointDimension { needed: usize, got: usize },
}

impl Expr {
    pub(crate) fn with_span(node: Node, span: Span) -> Expr {
        Expr(Arc::new(Inner { node, span }))
    }

    pub fn num(v: f64) -> Expr {
        Expr::with_span(Node::Num(v), Span::default())
    }

    /// Variable for the zero-based `axis` (printed `x{axis+1}`).
    pub fn var(axis: usize) -> Expr {
        Expr::with_span(Node::Var(axis), Span::default())
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn span(&self) -> Span {
        self.0.span
    }

    pub fn as_num(&self) -> Option<f64> {
        match self.node() {
            Node::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_num() == Some(1.0)
    }

    /// True when no variable occurs in the tree.
    pub fn is_constant(&self) -> bool {
        self.max_axis().is_none()
    }

    pub fn depends_on(&self, axis: usize) -> bool {
        match self.node() {
            Node::Num(_) | Node::Const(_) => false,
            Node::Var(i) => *i == axis,
            Node::Neg(a) | Node::Call(_, a) => a.depends_on(axis),
            Node::Bin(_, a, b) => a.depends_on(axis) || b.depends_on(axis),
        }
    }

    /// Largest zero-based axis index used, if any.
    pub fn max_axis(&self) -> Option<usize> {
        match self.node() {
            Node::Num(_) | Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Call(_, a) => a.max_axis(),
            Node::Bin(_, a, b) => match (a.max_axis(), b.max_axis()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Evaluates at `x`, reporting the offending sub-expression on a domain
    /// error. Every successful result is finite.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        let domain = |kind| {
            Err(ExprError::Domain {
                kind,
                span: self.span(),
            })
        };
        let v = match self.node() {
            Node::Num(v) => *v,
            Node::Const(c) => c.value(),
            Node::Var(i) => match x.get(*i) {
                Some(v) => *v,
                None => {
                    return Err(ExprError::PointDimension {
                        needed: i + 1,
                        got: x.len(),
                    })
                }
            },
            Node::Neg(a) => -a.eval(x)?,
            Node::Bin(op, a, b) => {
                let l = a.eval(x)?;
                let r = b.eval(x)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return domain(DomainKind::DivisionByZero);
                        }
                        l / r
                    }
                    BinOp::Pow => {
                        if l == 0.0 && r < 0.0 {
                            return domain(DomainKind::DivisionByZero);
                        }
                        if l < 0.0 && r.fract() != 0.0 {
                            return domain(DomainKind::NegativeBaseFractionalPower);
                        }
                        pow(l, r)
                    }
                }
            }
            Node::Call(f, a) => {
                let u = a.eval(x)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return domain(DomainKind::LogOfNonPositive);
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < 0.0 {
                            return domain(DomainKind::SqrtOfNegative);
                        }
                        u.sqrt()
                    }
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Tanh => u.tanh(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            domain(DomainKind::Overflow)
        }
    }
}

/// Small integer exponents by repeated multiplication so that `x^2` is
/// exactly `x*x`.
fn pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() <= 16.0 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Num(v) if v.is_sign_negative() => PREC_NEG,
            Node::Num(_) | Node::Const(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
            Node::Neg(_) => PREC_NEG,
            Node::Bin(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            Node::Bin(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            Node::Bin(BinOp::Pow, ..) => PREC_POW,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self.node() {
            Node::Num(v) => write!(f, "{v}"),
            Node::Const(Constant::Pi) => write!(f, "pi"),
            Node::Const(Constant::E) => write!(f, "e"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => {
                write!(f, "-")?;
                a.fmt_at(f, PREC_NEG)
            }
            Node::Bin(op, a, b) => {
                let (sym, left, right) = match op {
                    BinOp::Add => (" + ", PREC_ADD, PREC_MUL),
                    BinOp::Sub => (" - ", PREC_ADD, PREC_MUL),
                    BinOp::Mul => ("*", PREC_MUL, PREC_NEG),
                    BinOp::Div => ("/", PREC_MUL, PREC_NEG),
                    BinOp::Pow => ("^", PREC_ATOM, PREC_NEG),
                };
                a.fmt_at(f, left)?;
                f.write_str(sym)?;
                b.fmt_at(f, right)
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, dim: usize, x: &[f64]) -> Result<f64, ExprError> {
        parse(src, dim)?.eval(x)
    }

    #[test]
    fn basic_evaluation() {
        assert_eq!(ev("1 + x1^2", 1, &[2.0]).unwrap(), 5.0);
        assert_eq!(ev("2 + sin(x1)", 1, &[0.0]).unwrap(), 2.0);
        assert_eq!(ev("exp(0)", 1, &[0.0]).unwrap(), 1.0);
        assert_eq!(ev("x1*x2", 2, &[3.0, 4.0]).unwrap(), 12.0);
    }

    #[test]
    fn precedence_rules() {
        assert_eq!(ev("-2^2", 1, &[0.0]).unwrap(), -4.0);
        assert_eq!(ev("2^3^2", 1, &[0.0]).unwrap(), 512.0);
        assert_eq!(ev("2^-1", 1, &[0.0]).unwrap(), 0.5);
        assert_eq!(ev("1 - 2 - 3", 1, &[0.0]).unwrap(), -4.0);
        assert_eq!(ev("8 / 4 / 2", 1, &[0.0]).unwrap(), 1.0);
        assert_eq!(ev("2 * -3", 1, &[0.0]).unwrap(), -6.0);
    }

    #[test]
    fn division_by_zero_reports_location() {
        let err = ev("3 + 1/x1", 1, &[0.0]).unwrap_err();
        assert_eq!(
            err,
            ExprError::Domain {
                kind: DomainKind::DivisionByZero,
                span: Span { start: 4, end: 8 }
            }
        );
    }

    #[test]
    fn other_domain_errors() {
        let kind = |src: &str, x: f64| match ev(src, 1, &[x]) {
            Err(ExprError::Domain { kind, .. }) => kind,
            other => panic!("expected domain error, got {other:?}"),
        };
        assert_eq!(kind("log(x1)", 0.0), DomainKind::LogOfNonPositive);
        assert_eq!(kind("sqrt(x1)", -1.0), DomainKind::SqrtOfNegative);
        assert_eq!(
            kind("x1^0.5", -1.0),
            DomainKind::NegativeBaseFractionalPower
        );
        assert_eq!(kind("x1^-1", 0.0), DomainKind::DivisionByZero);
        assert_eq!(kind("exp(x1)", 1000.0), DomainKind::Overflow);
    }

    #[test]
    fn negative_base_integer_power_is_fine() {
        assert_eq!(ev("x1^3", 1, &[-2.0]).unwrap(), -8.0);
    }

    #[test]
    fn point_dimension_is_checked() {
        let e = parse("x2", 2).unwrap();
        assert!(matches!(
            e.eval(&[1.0]),
            Err(ExprError::PointDimension { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn printing_round_trips() {
        for src in [
            "1 + x1^2",
            "-x1^2",
            "(-x1)^2",
            "2^3^2",
            "(2^3)^2",
            "x1 - (x2 - 3)",
            "x1/(x2*3)",
            "-(x1 + 1)",
            "exp(-x1^2/2)*cos(pi*x2)",
            "x1^-2",
            "1e-3*x1",
        ] {
            let e = parse(src, 2).unwrap();
            let printed = e.to_string();
            let again = parse(&printed, 2).unwrap();
            assert_eq!(again.to_string(), printed, "{src}");
            let x = [0.7, -1.3];
            assert_eq!(
                e.eval(&x).unwrap().to_bits(),
                again.eval(&x).unwrap().to_bits(),
                "{src}"
            );
        }
    }

    #[test]
    fn constants() {
        assert_eq!(ev("pi", 1, &[0.0]).unwrap(), std::f64::consts::PI);
        assert_eq!(ev("e", 1, &[0.0]).unwrap(), std::f64::consts::E);
        assert!(parse("e", 1).unwrap().is_constant());
    }
}
