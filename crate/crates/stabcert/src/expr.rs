//! Scalar expression trees over state variables `x1..xn` and disturbance
//! variables `d1..dl`, with a small parser and symbolic differentiation.
//!
//! Expressions are the declaration format for user-supplied vector fields and
//! for the scalar functions of a certificate (V, the auxiliary chain, phi).
//! The grammar is deliberately closed under differentiation so declared
//! polynomial/rational functions get exact gradients; closure-backed fields
//! fall back to central differences at relative step 1e-7.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable index out of range: `{0}`")]
    IndexOutOfRange(String),
}

/// A variable reference inside an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// State coordinate, zero-based (`x1` is `State(0)`).
    State(usize),
    /// Disturbance coordinate, zero-based (`d1` is `Dist(0)`).
    Dist(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn state(i: usize) -> Expr {
        Expr::Var(Var::State(i))
    }

    pub fn eval(&self, x: &[f64], d: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::State(i)) => x[*i],
            Expr::Var(Var::Dist(i)) => d[*i],
            Expr::Add(a, b) => a.eval(x, d) + b.eval(x, d),
            Expr::Sub(a, b) => a.eval(x, d) - b.eval(x, d),
            Expr::Mul(a, b) => a.eval(x, d) * b.eval(x, d),
            Expr::Div(a, b) => a.eval(x, d) / b.eval(x, d),
            Expr::Neg(a) => -a.eval(x, d),
            Expr::Pow(a, n) => a.eval(x, d).powi(*n),
        }
    }

    /// Symbolic partial derivative with respect to `var`.
    pub fn diff(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => {
                if *v == var {
                    Expr::Const(1.0)
                } else {
                    Expr::Const(0.0)
                }
            }
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = sub(
                    mul(a.diff(var), (**b).clone()),
                    mul((**a).clone(), b.diff(var)),
                );
                Expr::Div(Box::new(num), Box::new(pow((**b).clone(), 2)))
            }
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Pow(a, n) => {
                if *n == 0 {
                    Expr::Const(0.0)
                } else {
                    // n * a^(n-1) * a'
                    mul(
                        mul(Expr::Const(f64::from(*n)), pow((**a).clone(), n - 1)),
                        a.diff(var),
                    )
                }
            }
        }
    }

    /// True when the expression references no disturbance variable.
    pub fn is_disturbance_free(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(Var::Dist(_)) => false,
            Expr::Var(Var::State(_)) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_disturbance_free() && b.is_disturbance_free()
            }
            Expr::Neg(a) => a.is_disturbance_free(),
            Expr::Pow(a, _) => a.is_disturbance_free(),
        }
    }

    /// True when every disturbance variable appears at most linearly
    /// (no products of disturbances, no disturbance under a power or divisor).
    pub fn is_affine_in_disturbance(&self) -> bool {
        self.disturbance_degree().map(|deg| deg <= 1).unwrap_or(false)
    }

    /// Total degree in disturbance variables, or None when non-polynomial in d.
    fn disturbance_degree(&self) -> Option<u32> {
        match self {
            Expr::Const(_) | Expr::Var(Var::State(_)) => Some(0),
            Expr::Var(Var::Dist(_)) => Some(1),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                Some(a.disturbance_degree()?.max(b.disturbance_degree()?))
            }
            Expr::Mul(a, b) => Some(a.disturbance_degree()? + b.disturbance_degree()?),
            Expr::Div(a, b) => {
                if b.is_disturbance_free() {
                    a.disturbance_degree()
                } else {
                    None
                }
            }
            Expr::Neg(a) => a.disturbance_degree(),
            Expr::Pow(a, n) => {
                let da = a.disturbance_degree()?;
                if da == 0 {
                    Some(0)
                } else if *n >= 0 {
                    Some(da * (*n as u32))
                } else {
                    None
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::State(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Dist(i)) => write!(f, "d{}", i + 1),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, n) => write!(f, "{a}^{n}"),
        }
    }
}

// Constant-folding constructors keep derivative trees small.

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (Expr::Const(x), _) if *x == 0.0 => b,
        (_, Expr::Const(y)) if *y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (_, Expr::Const(y)) if *y == 0.0 => a,
        (Expr::Const(x), _) if *x == 0.0 => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (Expr::Const(x), _) if *x == 0.0 => Expr::Const(0.0),
        (_, Expr::Const(y)) if *y == 0.0 => Expr::Const(0.0),
        (Expr::Const(x), _) if *x == 1.0 => b,
        (_, Expr::Const(y)) if *y == 1.0 => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match &a {
        Expr::Const(x) => Expr::Const(-x),
        _ => Expr::Neg(Box::new(a)),
    }
}

fn pow(a: Expr, n: i32) -> Expr {
    match n {
        0 => Expr::Const(1.0),
        1 => a,
        _ => Expr::Pow(Box::new(a), n),
    }
}

/// Parse an expression over `x1..x{n_state}` and `d1..d{n_dist}`.
///
/// Grammar:
/// ```text
/// expr    := term { ("+" | "-") term }
/// term    := unary { ("*" | "/") unary }
/// unary   := "-" unary | factor
/// factor  := primary [ "^" integer ]
/// primary := number | ident | "(" expr ")"
/// ident   := ("x" | "d") digits
/// ```
pub fn parse(src: &str, n_state: usize, n_dist: usize) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        n_state,
        n_dist,
    };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(ExprError::Parse {
            pos: p.pos,
            msg: format!("unexpected trailing input `{}`", &src[p.pos..]),
        });
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n_state: usize,
    n_dist: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let mut sign = 1i32;
            if self.peek() == Some(b'-') {
                sign = -1;
                self.pos += 1;
            }
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(ExprError::Parse {
                    pos: self.pos,
                    msg: "expected integer exponent after `^`".to_string(),
                });
            }
            let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let n: i32 = digits.parse().map_err(|_| ExprError::Parse {
                pos: start,
                msg: "exponent too large".to_string(),
            })?;
            return Ok(Expr::Pow(Box::new(base), sign * n));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(ExprError::Parse {
                        pos: self.pos,
                        msg: "expected `)`".to_string(),
                    });
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c == b'x' || c == b'd' => {
                let start = self.pos;
                self.pos += 1;
                let idx_start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if idx_start == self.pos {
                    return Err(ExprError::Parse {
                        pos: start,
                        msg: format!("expected index digits after `{}`", c as char),
                    });
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let idx: usize = name[1..]
                    .parse()
                    .map_err(|_| ExprError::UnknownVariable(name.to_string()))?;
                if idx == 0 {
                    return Err(ExprError::IndexOutOfRange(name.to_string()));
                }
                let var = if c == b'x' {
                    if idx > self.n_state {
                        return Err(ExprError::IndexOutOfRange(name.to_string()));
                    }
                    Var::State(idx - 1)
                } else {
                    if idx > self.n_dist {
                        return Err(ExprError::IndexOutOfRange(name.to_string()));
                    }
                    Var::Dist(idx - 1)
                };
                Ok(Expr::Var(var))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() {
                    let b = self.src[self.pos];
                    if b.is_ascii_digit() || b == b'.' {
                        self.pos += 1;
                    } else if (b == b'e' || b == b'E')
                        && self.pos + 1 < self.src.len()
                        && (self.src[self.pos + 1].is_ascii_digit()
                            || self.src[self.pos + 1] == b'-'
                            || self.src[self.pos + 1] == b'+')
                    {
                        self.pos += 2;
                    } else {
                        break;
                    }
                }
                let lit = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = lit.parse().map_err(|_| ExprError::Parse {
                    pos: start,
                    msg: format!("bad numeric literal `{lit}`"),
                })?;
                Ok(Expr::Const(v))
            }
            _ => Err(ExprError::Parse {
                pos: self.pos,
                msg: "expected number, variable or `(`".to_string(),
            }),
        }
    }
}

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A scalar function of the state with an evaluable gradient.
///
/// Expression-backed fields carry exact symbolic gradients; closure-backed
/// fields use central differences at relative step 1e-7 unless an explicit
/// gradient closure is supplied.
#[derive(Clone)]
pub struct ScalarField {
    n: usize,
    eval: FieldRepr,
    grad: GradRepr,
}

#[derive(Clone)]
enum FieldRepr {
    Expr(Arc<Expr>),
    Closure(EvalFn),
}

#[derive(Clone)]
enum GradRepr {
    Symbolic(Arc<Vec<Expr>>),
    Closure(GradFn),
    FiniteDifference,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.eval {
            FieldRepr::Expr(e) => write!(f, "ScalarField({e})"),
            FieldRepr::Closure(_) => write!(f, "ScalarField(<closure>, n={})", self.n),
        }
    }
}

pub const FD_RELATIVE_STEP: f64 = 1e-7;

impl ScalarField {
    pub fn from_expr(expr: Expr, n: usize) -> ScalarField {
        let grads: Vec<Expr> = (0..n).map(|i| expr.diff(Var::State(i))).collect();
        ScalarField {
            n,
            eval: FieldRepr::Expr(Arc::new(expr)),
            grad: GradRepr::Symbolic(Arc::new(grads)),
        }
    }

    pub fn parse(src: &str, n: usize) -> Result<ScalarField, ExprError> {
        let expr = parse(src, n, 0)?;
        Ok(ScalarField::from_expr(expr, n))
    }

    pub fn from_closure<F>(f: F, n: usize) -> ScalarField
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            n,
            eval: FieldRepr::Closure(Arc::new(f)),
            grad: GradRepr::FiniteDifference,
        }
    }

    pub fn from_closure_with_grad<F, G>(f: F, g: G, n: usize) -> ScalarField
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        ScalarField {
            n,
            eval: FieldRepr::Closure(Arc::new(f)),
            grad: GradRepr::Closure(Arc::new(g)),
        }
    }

    /// Sum of squared coordinates, the default Lyapunov candidate.
    pub fn norm_squared(n: usize) -> ScalarField {
        let mut expr = Expr::Const(0.0);
        for i in 0..n {
            expr = add(expr, Expr::Pow(Box::new(Expr::state(i)), 2));
        }
        ScalarField::from_expr(expr, n)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.eval {
            FieldRepr::Expr(e) => e.eval(x, &[]),
            FieldRepr::Closure(f) => f(x),
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match &self.grad {
            GradRepr::Symbolic(gs) => {
                for (o, g) in out.iter_mut().zip(gs.iter()) {
                    *o = g.eval(x, &[]);
                }
            }
            GradRepr::Closure(g) => g(x, out),
            GradRepr::FiniteDifference => {
                let mut xp = x.to_vec();
                for i in 0..self.n {
                    let h = FD_RELATIVE_STEP * (1.0 + x[i].abs());
                    xp[i] = x[i] + h;
                    let fp = self.value(&xp);
                    xp[i] = x[i] - h;
                    let fm = self.value(&xp);
                    xp[i] = x[i];
                    out[i] = (fp - fm) / (2.0 * h);
                }
            }
        }
    }

    pub fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.gradient(x, &mut out);
        out
    }

    /// Expression source when this field is expression-backed.
    pub fn expr(&self) -> Option<&Expr> {
        match &self.eval {
            FieldRepr::Expr(e) => Some(e),
            FieldRepr::Closure(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: &ScalarField, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            xp[i] = x[i] + h;
            let fp = f.value(&xp);
            xp[i] = x[i] - h;
            let fm = f.value(&xp);
            xp[i] = x[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
        out
    }

    #[test]
    fn parses_and_evaluates() {
        let e = parse("-(1+d1)*x1 - 2*x2", 2, 1).unwrap();
        assert_eq!(e.eval(&[1.0, 0.5], &[0.25]), -(1.25) - 1.0);

        let e = parse("x1^2 + x2^2", 2, 0).unwrap();
        assert_eq!(e.eval(&[3.0, 4.0], &[]), 25.0);

        let e = parse("2.5e-1 * x1", 1, 0).unwrap();
        assert_eq!(e.eval(&[4.0], &[]), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("x3", 2, 0).is_err());
        assert!(parse("x1 +", 1, 0).is_err());
        assert!(parse("foo", 1, 0).is_err());
        assert!(parse("d1", 1, 0).is_err());
        assert!(parse("x0", 1, 0).is_err());
    }

    #[test]
    fn symbolic_gradient_matches_finite_differences() {
        let cases = [
            ("x1^2 + x2^2", vec![0.7, -1.3]),
            ("x1*x2 - 3*x1^3 + x2/(1+x1^2)", vec![0.4, 2.0]),
            ("(x1 - x2)^4 / (1 + x2^2)", vec![-1.1, 0.6]),
        ];
        for (src, x) in cases {
            let f = ScalarField::parse(src, 2).unwrap();
            let sym = f.gradient_vec(&x);
            let num = fd_grad(&f, &x);
            for (s, n) in sym.iter().zip(num.iter()) {
                assert!(
                    (s - n).abs() <= 1e-5 * (1.0 + n.abs()),
                    "{src}: {s} vs {n}"
                );
            }
        }
    }

    #[test]
    fn affine_in_disturbance_detection() {
        assert!(parse("d1*x1 - x2", 2, 1).unwrap().is_affine_in_disturbance());
        assert!(parse("-(1+d1)*x1", 1, 1).unwrap().is_affine_in_disturbance());
        assert!(!parse("d1^2*x1", 1, 1).unwrap().is_affine_in_disturbance());
        assert!(!parse("d1*d2", 1, 2).unwrap().is_affine_in_disturbance());
        assert!(!parse("x1/d1", 1, 1).unwrap().is_affine_in_disturbance());
    }

    #[test]
    fn finite_difference_fallback() {
        let f = ScalarField::from_closure(|x: &[f64]| x[0].powi(2) * x[1], 2);
        let g = f.gradient_vec(&[2.0, 3.0]);
        assert!((g[0] - 12.0).abs() < 1e-5);
        assert!((g[1] - 4.0).abs() < 1e-5);
    }
}
