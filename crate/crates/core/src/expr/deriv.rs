use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{BinOp, Expr, Func, Node, Span};

// Constructors below fold numeric constants and drop additive/multiplicative
// identities. Folding is skipped when it would produce a non-finite literal.

fn finite_num(v: f64, span: Span) -> Option<Expr> {
    v.is_finite().then(|| Expr::with_span(Node::Num(v), span))
}

fn join(a: &Expr, b: &Expr) -> Span {
    let (sa, sb) = (a.span(), b.span());
    if sa == Span::default() {
        return sb;
    }
    if sb == Span::default() {
        return sa;
    }
    Span {
        start: sa.start.min(sb.start),
        end: sa.end.max(sb.end),
    }
}

impl Expr {
    fn bin(op: BinOp, a: &Expr, b: &Expr, span: Span) -> Expr {
        Expr::with_span(Node::Bin(op, a.clone(), b.clone()), span)
    }

    pub fn add_at(a: &Expr, b: &Expr, span: Span) -> Expr {
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
            if let Some(e) = finite_num(x + y, span) {
                return e;
            }
        }
        if let Node::Neg(inner) = b.node() {
            return Expr::sub_at(a, inner, span);
        }
        Expr::bin(BinOp::Add, a, b, span)
    }

    pub fn sub_at(a: &Expr, b: &Expr, span: Span) -> Expr {
        if b.is_zero() {
            return a.clone();
        }
        if a.is_zero() {
            return Expr::neg_at(b, span);
        }
        if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
            if let Some(e) = finite_num(x - y, span) {
                return e;
            }
        }
        Expr::bin(BinOp::Sub, a, b, span)
    }

    pub fn mul_at(a: &Expr, b: &Expr, span: Span) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::with_span(Node::Num(0.0), span);
        }
        if a.is_one() {
            return b.clone();
        }
        if b.is_one() {
            return a.clone();
        }
        if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
            if let Some(e) = finite_num(x * y, span) {
                return e;
            }
        }
        if a.as_num() == Some(-1.0) {
            return Expr::neg_at(b, span);
        }
        if b.as_num() == Some(-1.0) {
            return Expr::neg_at(a, span);
        }
        Expr::bin(BinOp::Mul, a, b, span)
    }

    pub fn div_at(a: &Expr, b: &Expr, span: Span) -> Expr {
        if b.is_one() || (a.is_zero() && !b.is_zero()) {
            return a.clone();
        }
        if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
            if y != 0.0 {
                if let Some(e) = finite_num(x / y, span) {
                    return e;
                }
            }
        }
        Expr::bin(BinOp::Div, a, b, span)
    }

    pub fn pow_at(a: &Expr, b: &Expr, span: Span) -> Expr {
        if b.is_one() {
            return a.clone();
        }
        if b.is_zero() {
            return Expr::with_span(Node::Num(1.0), span);
        }
        Expr::bin(BinOp::Pow, a, b, span)
    }

    pub fn neg_at(a: &Expr, span: Span) -> Expr {
        match a.node() {
            Node::Num(v) => Expr::with_span(Node::Num(-v), span),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::with_span(Node::Neg(a.clone()), span),
        }
    }

    pub fn call_at(f: Func, a: &Expr, span: Span) -> Expr {
        let folded = Expr::with_span(Node::Call(f, a.clone()), span);
        if a.as_num().is_some() {
            if let Some(e) = folded.eval(&[]).ok().and_then(|v| finite_num(v, span)) {
                return e;
            }
        }
        folded
    }

    pub fn call(f: Func, a: &Expr) -> Expr {
        Expr::call_at(f, a, a.span())
    }

    pub fn pow(&self, exponent: &Expr) -> Expr {
        Expr::pow_at(self, exponent, join(self, exponent))
    }

    pub fn sqrt(&self) -> Expr {
        Expr::call(Func::Sqrt, self)
    }

    /// Symbolic partial derivative with respect to the zero-based `axis`.
    ///
    /// Derived nodes keep the span of the node they came from, so a domain
    /// error in the derivative points back into the original source.
    pub fn deriv(&self, axis: usize) -> Expr {
        let s = self.span();
        let zero = || Expr::with_span(Node::Num(0.0), s);
        if !self.depends_on(axis) {
            return zero();
        }
        match self.node() {
            Node::Num(_) | Node::Const(_) => zero(),
            Node::Var(i) => Expr::with_span(Node::Num(if *i == axis { 1.0 } else { 0.0 }), s),
            Node::Neg(a) => Expr::neg_at(&a.deriv(axis), s),
            Node::Bin(op, u, v) => {
                let du = u.deriv(axis);
                let dv = v.deriv(axis);
                match op {
                    BinOp::Add => Expr::add_at(&du, &dv, s),
                    BinOp::Sub => Expr::sub_at(&du, &dv, s),
                    BinOp::Mul => {
                        Expr::add_at(&Expr::mul_at(&du, v, s), &Expr::mul_at(u, &dv, s), s)
                    }
                    BinOp::Div => {
                        // u'/v - u v' / v^2
                        let first = Expr::div_at(&du, v, s);
                        if dv.is_zero() {
                            return first;
                        }
                        let v2 = Expr::mul_at(v, v, s);
                        let second = Expr::div_at(&Expr::mul_at(u, &dv, s), &v2, s);
                        Expr::sub_at(&first, &second, s)
                    }
                    BinOp::Pow => {
                        if !v.depends_on(axis) {
                            // v u^(v-1) u'
                            let one = Expr::with_span(Node::Num(1.0), s);
                            let reduced = Expr::pow_at(u, &Expr::sub_at(v, &one, s), s);
                            Expr::mul_at(&Expr::mul_at(v, &reduced, s), &du, s)
                        } else if !u.depends_on(axis) {
                            // u^v log(u) v'
                            let ln = Expr::call_at(Func::Log, u, s);
                            Expr::mul_at(&Expr::mul_at(self, &ln, s), &dv, s)
                        } else {
                            // u^v (v' log(u) + v u'/u)
                            let ln = Expr::call_at(Func::Log, u, s);
                            let a = Expr::mul_at(&dv, &ln, s);
                            let b = Expr::div_at(&Expr::mul_at(v, &du, s), u, s);
                            Expr::mul_at(self, &Expr::add_at(&a, &b, s), s)
                        }
                    }
                }
            }
            Node::Call(f, u) => {
                let du = u.deriv(axis);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Log => {
                        return Expr::div_at(&du, u, s);
                    }
                    Func::Sqrt => {
                        let two = Expr::with_span(Node::Num(2.0), s);
                        return Expr::div_at(&du, &Expr::mul_at(&two, self, s), s);
                    }
                    Func::Sin => Expr::call_at(Func::Cos, u, s),
                    Func::Cos => Expr::neg_at(&Expr::call_at(Func::Sin, u, s), s),
                    Func::Tanh => {
                        let one = Expr::with_span(Node::Num(1.0), s);
                        let sq = Expr::mul_at(self, self, s);
                        Expr::sub_at(&one, &sq, s)
                    }
                };
                Expr::mul_at(&outer, &du, s)
            }
        }
    }
}

impl Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add_at(self, rhs, join(self, rhs))
    }
}

impl Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub_at(self, rhs, join(self, rhs))
    }
}

impl Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul_at(self, rhs, join(self, rhs))
    }
}

impl Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::div_at(self, rhs, join(self, rhs))
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg_at(self, self.span())
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                (&self).$m(&rhs)
            }
        }
    )*};
}

forward_owned!(Add add, Sub sub, Mul mul, Div div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}
