//! Symbolic differentiation of [`Expr`] trees with light constant folding.

use crate::sysdsl::{rational_pow, BinOp, Expr, Func};

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        _ => Expr::Binary(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        _ => Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => Expr::Const(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ => Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => Expr::Const(x / y),
        _ if is_const(&a, 0.0) => Expr::Const(0.0),
        _ if is_const(&b, 1.0) => a,
        _ => Expr::Binary(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// `a^(p/q)`, reduced.
pub fn powr(a: Expr, p: i64, q: i64) -> Expr {
    let g = gcd(p, q).max(1);
    let (p, q) = (p / g, q / g);
    if p == 0 {
        return Expr::Const(1.0);
    }
    if p == 1 && q == 1 {
        return a;
    }
    match a {
        Expr::Const(c) => Expr::Const(rational_pow(c, p, q)),
        other => Expr::PowRational(Box::new(other), p, q),
    }
}

fn func(f: Func, a: Expr) -> Expr {
    Expr::Func(f, Box::new(a))
}

/// `∂e/∂var`. Fails only for a general `^` whose exponent depends on `var`.
pub fn derivative(e: &Expr, var: &str) -> Result<Expr, String> {
    Ok(match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(n) => Expr::Const(if n == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(derivative(a, var)?),
        Expr::Func(f, a) => {
            let da = derivative(a, var)?;
            if is_const(&da, 0.0) {
                return Ok(Expr::Const(0.0));
            }
            let a = (**a).clone();
            match f {
                Func::Sin => mul(func(Func::Cos, a), da),
                Func::Cos => neg(mul(func(Func::Sin, a), da)),
                Func::Tan => div(da, powr(func(Func::Cos, a), 2, 1)),
                Func::Atan => div(da, add(Expr::Const(1.0), powr(a, 2, 1))),
                Func::Exp => mul(func(Func::Exp, a), da),
                // sign(a), undefined at 0
                Func::Abs => mul(div(a.clone(), func(Func::Abs, a)), da),
                Func::Sqrt => div(da, mul(Expr::Const(2.0), func(Func::Sqrt, a))),
            }
        }
        Expr::Binary(op, a, b) => {
            let da = derivative(a, var)?;
            let db = derivative(b, var)?;
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b), mul(a, db)),
                BinOp::Div => div(sub(mul(da, b.clone()), mul(a, db)), powr(b, 2, 1)),
                BinOp::Pow => {
                    if b.uses(var) {
                        return Err(format!("exponent of `{a}^{b}` depends on {var}"));
                    }
                    let reduced = Expr::Binary(
                        BinOp::Pow,
                        Box::new(a),
                        Box::new(sub(b.clone(), Expr::Const(1.0))),
                    );
                    mul(mul(b, reduced), da)
                }
            }
        }
        Expr::PowRational(a, p, q) => {
            let da = derivative(a, var)?;
            let coeff = Expr::Const(*p as f64 / *q as f64);
            mul(mul(coeff, powr((**a).clone(), p - q, *q)), da)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysdsl::parse_expr;

    fn eval(e: &Expr, x: f64, y: f64) -> f64 {
        e.eval_with(&|n| if n == "x" { x } else { y })
    }

    #[test]
    fn matches_central_differences() {
        let cases = [
            "x^2*y + sin(x*y)",
            "tan(x) - atan(2*y*x)",
            "exp(-x)/(1 + y^2)",
            "sqrt(1 + x^2) * cos(y)",
            "x^(4/3) + y^(1/3)*x",
            "x^y",
            "abs(x - 2)*y",
        ];
        for src in cases {
            let e = parse_expr(src).unwrap();
            for &(x, y) in &[(0.7, 0.3), (1.3, -0.4), (0.2, 1.1)] {
                let h = 1e-6;
                let fd = (eval(&e, x + h, y) - eval(&e, x - h, y)) / (2.0 * h);
                match derivative(&e, "x") {
                    Ok(d) => assert!(
                        (eval(&d, x, y) - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                        "{src}: {d}"
                    ),
                    Err(_) => assert_eq!(src, "x^y"),
                }
            }
        }
    }

    #[test]
    fn folding() {
        let e = parse_expr("3*x + y").unwrap();
        assert_eq!(derivative(&e, "x").unwrap(), Expr::Const(3.0));
        assert_eq!(derivative(&e, "z").unwrap(), Expr::Const(0.0));
        let e = parse_expr("x^2").unwrap();
        assert_eq!(derivative(&e, "x").unwrap().to_string(), "2*x");
        assert_eq!(powr(Expr::var("x"), 2, 2), Expr::var("x"));
        assert_eq!(neg(neg(Expr::var("x"))), Expr::var("x"));
    }
}
