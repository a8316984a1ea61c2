use super::{BinOp, Constant, Expr, ExprError, Func, Node, Span};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(u8),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // Exponent only when digits follow, so `2e` is not swallowed.
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
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            Tok::Num(v)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else {
            i += 1;
            match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b',' => Tok::Comma,
                _ => {
                    let ch = src[start..].chars().next().unwrap_or('?');
                    return Err(ExprError::Syntax {
                        offset: start,
                        message: format!("unexpected character `{ch}`"),
                    });
                }
            }
        };
        out.push(Token {
            tok,
            span: Span { start, end: i },
        });
    }
    out.push(Token {
        tok: Tok::End,
        span: Span {
            start: src.len(),
            end: src.len(),
        },
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    dim: usize,
}

fn join(a: Span, b: Span) -> Span {
    Span {
        start: a.start.min(b.start),
        end: a.end.max(b.end),
    }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.peek().span.start,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ (b'+' | b'-')) = self.peek().tok {
            self.bump();
            let rhs = self.term()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            let span = join(lhs.span(), rhs.span());
            lhs = Expr::with_span(Node::Bin(op, lhs, rhs), span);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ (b'*' | b'/')) = self.peek().tok {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            let span = join(lhs.span(), rhs.span());
            lhs = Expr::with_span(Node::Bin(op, lhs, rhs), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if let Tok::Op(b'-') = self.peek().tok {
            let minus = self.bump().span;
            let inner = self.unary()?;
            let span = join(minus, inner.span());
            return Ok(Expr::with_span(Node::Neg(inner), span));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if let Tok::Op(b'^') = self.peek().tok {
            self.bump();
            let exponent = self.unary()?;
            let span = join(base.span(), exponent.span());
            return Ok(Expr::with_span(Node::Bin(BinOp::Pow, base, exponent), span));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::with_span(Node::Num(v), t.span)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, t.span),
            Tok::End => Err(ExprError::Syntax {
                offset: t.span.start,
                message: "unexpected end of expression".into(),
            }),
            other => Err(ExprError::Syntax {
                offset: t.span.start,
                message: format!("unexpected token {}", describe(&other)),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<Span, ExprError> {
        match self.peek().tok {
            Tok::RParen => Ok(self.bump().span),
            _ => self.syntax("expected `)`"),
        }
    }

    fn identifier(&mut self, name: String, span: Span) -> Result<Expr, ExprError> {
        if let Some(func) = Func::from_name(&name) {
            if self.peek().tok != Tok::LParen {
                return self.syntax(format!("expected `(` after `{name}`"));
            }
            self.bump();
            if self.peek().tok == Tok::RParen {
                return Err(ExprError::Arity {
                    function: name,
                    found: 0,
                    offset: span.start,
                });
            }
            let arg = self.expr()?;
            let mut found = 1;
            while self.peek().tok == Tok::Comma {
                self.bump();
                self.expr()?;
                found += 1;
            }
            if found != 1 {
                return Err(ExprError::Arity {
                    function: name,
                    found,
                    offset: span.start,
                });
            }
            let close = self.expect_rparen()?;
            return Ok(Expr::with_span(Node::Call(func, arg), join(span, close)));
        }
        match name.as_str() {
            "pi" => return Ok(Expr::with_span(Node::Const(Constant::Pi), span)),
            "e" => return Ok(Expr::with_span(Node::Const(Constant::E), span)),
            _ => {}
        }
        if let Some(index) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
            if (1..=self.dim).contains(&index) && !name[1..].starts_with('0') {
                return Ok(Expr::with_span(Node::Var(index - 1), span));
            }
        }
        Err(ExprError::UnknownIdentifier {
            name,
            offset: span.start,
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{}`", *c as char),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parses `src` as an expression over variables `x1..x{dim}`.
pub fn parse(src: &str, dim: usize) -> Result<Expr, ExprError> {
    if dim == 0 {
        return Err(ExprError::Syntax {
            offset: 0,
            message: "dimension must be at least 1".into(),
        });
    }
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, dim };
    let e = p.expr()?;
    match &p.peek().tok {
        Tok::End => Ok(e),
        other => {
            let msg = format!("unexpected trailing {}", describe(other));
            p.syntax(msg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_variable_beyond_dimension() {
        assert_eq!(
            parse("x2", 1).unwrap_err(),
            ExprError::UnknownIdentifier {
                name: "x2".into(),
                offset: 0
            }
        );
        assert!(matches!(
            parse("x0", 3),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("x01", 3),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("foo + 1", 3),
            Err(ExprError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(
            parse("1 + * 2", 1).unwrap_err(),
            ExprError::Syntax {
                offset: 4,
                message: "unexpected token `*`".into()
            }
        );
        assert!(matches!(
            parse("(1 + 2", 1),
            Err(ExprError::Syntax { offset: 6, .. })
        ));
        assert!(matches!(
            parse("1 2", 1),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse("2 $ 3", 1),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse("", 1),
            Err(ExprError::Syntax { offset: 0, .. })
        ));
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(
            parse("sin(1, 2)", 1),
            Err(ExprError::Arity { found: 2, .. })
        ));
        assert!(matches!(
            parse("exp()", 1),
            Err(ExprError::Arity { found: 0, .. })
        ));
        assert!(matches!(parse("sin 1", 1), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn scientific_notation_and_constant_e() {
        assert_eq!(parse("1.5e-3", 1).unwrap().eval(&[0.0]).unwrap(), 1.5e-3);
        assert_eq!(
            parse("2*e", 1).unwrap().eval(&[0.0]).unwrap(),
            2.0 * std::f64::consts::E
        );
        assert!(parse("2e", 1).is_err());
    }

    #[test]
    fn spans_cover_source() {
        let e = parse("  sin(x1) ", 1).unwrap();
        assert_eq!(e.span(), Span { start: 2, end: 9 });
    }
}
