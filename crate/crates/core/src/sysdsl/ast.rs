use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan" => Func::Atan,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Atan => v.atan(),
            Func::Exp => v.exp(),
            Func::Abs => v.abs(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        }
    }
}

/// Expression tree. Constant integer and integer-ratio exponents are held
/// as `PowRational` with `q > 0` and `gcd(p, q) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    PowRational(Box<Expr>, i64, i64),
}

/// `x^(p/q)` with real roots: for odd `q` the real `q`-th root of a negative
/// number is taken before raising to `p`, so `(-8)^(2/3) = 4`. Even `q` on
/// negative input gives NaN.
pub fn rational_pow(x: f64, p: i64, q: i64) -> f64 {
    let root = match q {
        1 => x,
        2 => x.sqrt(),
        3 => x.cbrt(),
        _ if q % 2 == 1 => x.signum() * x.abs().powf(1.0 / q as f64),
        _ => {
            if x >= 0.0 {
                x.powf(1.0 / q as f64)
            } else {
                f64::NAN
            }
        }
    };
    root.powi(p as i32)
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    /// Evaluates with variables looked up by name.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(name) => lookup(name),
            Expr::Neg(a) => -a.eval_with(lookup),
            Expr::Func(f, a) => f.apply(a.eval_with(lookup)),
            Expr::Binary(op, a, b) => op.apply(a.eval_with(lookup), b.eval_with(lookup)),
            Expr::PowRational(a, p, q) => rational_pow(a.eval_with(lookup), *p, *q),
        }
    }

    /// Variable names in first-occurrence order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(n) => {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
            Expr::Neg(a) | Expr::Func(_, a) | Expr::PowRational(a, _, _) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn uses(&self, name: &str) -> bool {
        self.variables().iter().any(|v| v == name)
    }

    /// Compiles against an ordered symbol list; variable `k` reads slot `k`.
    pub fn compile(&self, symbols: &[String]) -> Result<Compiled, String> {
        Ok(Compiled(self.lower(symbols)?))
    }

    fn lower(&self, symbols: &[String]) -> Result<Node, String> {
        Ok(match self {
            Expr::Const(c) => Node::Const(*c),
            Expr::Var(n) => Node::Slot(
                symbols
                    .iter()
                    .position(|s| s == n)
                    .ok_or_else(|| n.clone())?,
            ),
            Expr::Neg(a) => Node::Neg(Box::new(a.lower(symbols)?)),
            Expr::Func(f, a) => Node::Func(*f, Box::new(a.lower(symbols)?)),
            Expr::Binary(op, a, b) => Node::Binary(
                *op,
                Box::new(a.lower(symbols)?),
                Box::new(b.lower(symbols)?),
            ),
            Expr::PowRational(a, p, q) => Node::PowRational(Box::new(a.lower(symbols)?), *p, *q),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Binary(BinOp::Pow, ..) | Expr::PowRational(..) => 4,
            _ => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let wrap = self.precedence() < min;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Expr::Const(c) => write!(f, "{c}")?,
            Expr::Var(n) => f.write_str(n)?,
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_prec(f, 3)?;
            }
            Expr::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_prec(f, 0)?;
                f.write_str(")")?;
            }
            Expr::Binary(op, a, b) => {
                let (lp, rp) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                a.write_prec(f, lp)?;
                f.write_str(op.symbol())?;
                b.write_prec(f, rp)?;
            }
            Expr::PowRational(a, p, q) => {
                a.write_prec(f, 5)?;
                if *q == 1 && *p >= 0 {
                    write!(f, "^{p}")?;
                } else if *q == 1 {
                    write!(f, "^({p})")?;
                } else {
                    write!(f, "^({p}/{q})")?;
                }
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Const(f64),
    Slot(usize),
    Neg(Box<Node>),
    Func(Func, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    PowRational(Box<Node>, i64, i64),
}

impl Node {
    fn eval(&self, env: &[f64]) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Slot(k) => env[*k],
            Node::Neg(a) => -a.eval(env),
            Node::Func(f, a) => f.apply(a.eval(env)),
            Node::Binary(op, a, b) => op.apply(a.eval(env), b.eval(env)),
            Node::PowRational(a, p, q) => rational_pow(a.eval(env), *p, *q),
        }
    }
}

/// Expression with variables resolved to slot indices. Immutable and
/// shareable across threads.
#[derive(Clone, Debug)]
pub struct Compiled(Node);

impl Compiled {
    pub fn eval(&self, env: &[f64]) -> f64 {
        self.0.eval(env)
    }
}
