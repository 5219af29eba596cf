use super::ast::{BinOp, Expr, Func};
use super::lexer::{tokenize_at, Token, TokenKind};
use super::DslError;

/// Parses a whole expression. Variables are accepted only if `allowed`
/// returns true for them.
pub fn parse_expr_at(
    src: &str,
    line: usize,
    col: usize,
    allowed: &dyn Fn(&str) -> bool,
) -> Result<Expr, DslError> {
    let tokens = tokenize_at(src, line, col)?;
    let end = end_position(src, line, col);
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        end,
        allowed,
    };
    if tokens.is_empty() {
        return Err(p.error("an expression"));
    }
    let e = p.expr()?;
    if p.pos < tokens.len() {
        return Err(p.error("an operator or end of input"));
    }
    Ok(e)
}

/// Parses an expression over any identifiers.
pub fn parse_expr(src: &str) -> Result<Expr, DslError> {
    parse_expr_at(src, 1, 1, &|_| true)
}

fn end_position(src: &str, line: usize, col: usize) -> (usize, usize) {
    let (mut l, mut c) = (line, col);
    for ch in src.chars() {
        if ch == '\n' {
            l += 1;
            c = 1;
        } else {
            c += 1;
        }
    }
    (l, c)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    end: (usize, usize),
    allowed: &'a dyn Fn(&str) -> bool,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn error(&self, expected: &str) -> DslError {
        match self.tokens.get(self.pos) {
            Some(t) => DslError::Syntax {
                line: t.line,
                col: t.col,
                expected: expected.into(),
                found: t.kind.describe(),
            },
            None => DslError::Syntax {
                line: self.end.0,
                col: self.end.1,
                expected: expected.into(),
                found: "end of input".into(),
            },
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.peek() == Some(&TokenKind::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.primary()?;
        if self.peek() != Some(&TokenKind::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let exponent = self.unary()?;
        Ok(match rational_exponent(&exponent) {
            Some((p, q)) => Expr::PowRational(Box::new(base), p, q),
            None => Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)),
        })
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let Some(tok) = self.tokens.get(self.pos) else {
            return Err(self.error("a number, variable, function or '('"));
        };
        match &tok.kind {
            TokenKind::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(*v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if self.peek() == Some(&TokenKind::LParen) {
                    let func = Func::from_name(name).ok_or_else(|| DslError::UnknownFunction {
                        line: tok.line,
                        col: tok.col,
                        name: name.clone(),
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Func(func, Box::new(arg)));
                }
                if Func::from_name(name).is_some() {
                    return Err(self.error("'(' after function name"));
                }
                if !(self.allowed)(name) {
                    return Err(DslError::UndeclaredVariable {
                        line: tok.line,
                        col: tok.col,
                        name: name.clone(),
                    });
                }
                Ok(Expr::Var(name.clone()))
            }
            _ => Err(self.error("a number, variable, function or '('")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), DslError> {
        if self.peek() == Some(&TokenKind::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error("')'"))
        }
    }
}

fn small_integer(v: f64) -> Option<i64> {
    (v.fract() == 0.0 && v.abs() <= 1e6).then_some(v as i64)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

// Integer or integer-ratio constant exponents, reduced with q > 0.
fn rational_exponent(e: &Expr) -> Option<(i64, i64)> {
    let (p, q) = match e {
        Expr::Const(c) => (small_integer(*c)?, 1),
        Expr::Binary(BinOp::Div, a, b) => match (a.as_ref(), b.as_ref()) {
            (Expr::Const(a), Expr::Const(b)) => (small_integer(*a)?, small_integer(*b)?),
            _ => return None,
        },
        _ => return None,
    };
    if q == 0 {
        return None;
    }
    let g = gcd(p, q).max(1);
    let s = q.signum();
    Some((s * p / g, s * q / g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, vars: &[(&str, f64)]) -> f64 {
        let e = parse_expr(src).unwrap();
        e.eval_with(&|n| vars.iter().find(|(k, _)| *k == n).map(|(_, v)| *v).unwrap())
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(eval("x1*z1^3", &[("x1", 1.0), ("z1", 0.5)]), 0.125);
        assert_eq!(
            eval("-6.39*x1 + 6.39*z1^2", &[("x1", 1.0), ("z1", 1.0)]),
            0.0
        );
        assert_eq!(eval("2^3^2", &[]), 512.0);
        assert_eq!(eval("-2^2", &[]), -4.0);
        assert_eq!(eval("2^-1", &[]), 0.5);
        assert_eq!(eval("8 - 2 - 1", &[]), 5.0);
        assert_eq!(eval("8 / 2 / 2", &[]), 2.0);
        assert_eq!(eval("x1^(4/3)", &[("x1", -8.0)]), 16.0);
    }

    #[test]
    fn folding() {
        assert_eq!(
            parse_expr("x^(4/3)").unwrap(),
            Expr::PowRational(Box::new(Expr::var("x")), 4, 3)
        );
        assert_eq!(
            parse_expr("x^(2/-4)").unwrap(),
            Expr::PowRational(Box::new(Expr::var("x")), -1, 2)
        );
        assert!(matches!(
            parse_expr("x^0.5").unwrap(),
            Expr::Binary(BinOp::Pow, ..)
        ));
        assert_eq!(parse_expr("-3").unwrap(), Expr::Const(-3.0));
    }

    #[test]
    fn print_roundtrip() {
        for src in [
            "x1*z1^3",
            "-6.39*x1 + 6.39*z1^2",
            "2^3^2",
            "(2^3)^2",
            "-x^2",
            "(-2)^2",
            "a - (b - c)",
            "a/(b*c)",
            "-(a + b)*c",
            "atan(-2*x1) - x1 - z1",
            "x^(-4/3) + x^(-2) + x^-y + x^0.25",
            "--x",
            "a - -2",
            "sin(x)^2 + cos(x)^2",
        ] {
            let e = parse_expr(src).unwrap();
            let printed = e.to_string();
            assert_eq!(parse_expr(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn errors() {
        let e = parse_expr("(x + 1").unwrap_err();
        assert_eq!(e.position(), Some((1, 7)));
        let e = parse_expr("x + * y").unwrap_err();
        assert_eq!(e.position(), Some((1, 5)));
        let e = parse_expr("x y").unwrap_err();
        assert_eq!(e.position(), Some((1, 3)));
        let e = parse_expr("foo(x)").unwrap_err();
        assert!(matches!(e, DslError::UnknownFunction { col: 1, .. }));
        let e = parse_expr_at("x1 + z2", 3, 6, &|n| n != "z2").unwrap_err();
        assert_eq!(
            e,
            DslError::UndeclaredVariable {
                line: 3,
                col: 11,
                name: "z2".into()
            }
        );
        assert!(parse_expr("").is_err());
        assert!(parse_expr("sin + 1").is_err());
    }
}
