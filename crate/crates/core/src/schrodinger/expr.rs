//! A small arithmetic language for potentials.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' '-'? INTEGER)*
//! atom   := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'
//! VAR    := 'x' INTEGER          (x1, x2, ...)
//! FUNC   := 'exp' | 'cos' | 'sin'
//! ```
//!
//! Exponents are integer literals, so `x1^2^3` is `(x1^2)^3` and `-x1^2` is
//! `-(x1^2)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The potential grammar, as printed by the command-line tool.
pub const GRAMMAR: &str = "\
expr   := term (('+' | '-') term)*
term   := unary (('*' | '/') unary)*
unary  := '-' unary | power
power  := atom ('^' '-'? INTEGER)*
atom   := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'
VAR    := 'x' INTEGER          (x1, x2, ...)
FUNC   := 'exp' | 'cos' | 'sin'
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Cos,
    Sin,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Cos => "cos",
            Func::Sin => "sin",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Cos => v.cos(),
            Func::Sin => v.sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Pi,
    /// Zero-based coordinate index; `x1` is `Var(0)`.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k),
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Number of coordinates referenced (highest variable index + 1).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Pi => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    /// Symbolic partial derivative with respect to coordinate `var`.
    pub fn derivative(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) | Expr::Pi => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(var)),
            Expr::Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                ),
                pow((**b).clone(), 2),
            ),
            Expr::Pow(a, k) => {
                if *k == 0 {
                    Expr::Const(0.0)
                } else {
                    mul(
                        mul(Expr::Const(*k as f64), pow((**a).clone(), k - 1)),
                        a.derivative(var),
                    )
                }
            }
            Expr::Call(f, a) => {
                let inner = a.derivative(var);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Cos => neg(Expr::Call(Func::Sin, a.clone())),
                    Func::Sin => Expr::Call(Func::Cos, a.clone()),
                };
                mul(outer, inner)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(0.0) => Expr::Const(0.0),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_const(&a, 0.0) {
        b
    } else if is_const(&b, 0.0) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_const(&b, 0.0) {
        a
    } else if is_const(&a, 0.0) {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_const(&a, 0.0) || is_const(&b, 0.0) {
        return Expr::Const(0.0);
    }
    if is_const(&a, 1.0) {
        return b;
    }
    if is_const(&b, 1.0) {
        return a;
    }
    if let (Expr::Const(p), Expr::Const(q)) = (&a, &b) {
        return Expr::Const(p * q);
    }
    Expr::Mul(Box::new(a), Box::new(b))
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_const(&a, 0.0) {
        Expr::Const(0.0)
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match k {
        0 => Expr::Const(1.0),
        1 => a,
        _ => Expr::Pow(Box::new(a), k),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        fn binary(
            f: &mut fmt::Formatter<'_>,
            a: &Expr,
            op: &str,
            b: &Expr,
            level: u8,
        ) -> fmt::Result {
            child(f, a, level)?;
            write!(f, " {op} ")?;
            child(f, b, level + 1)
        }
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(f, a, 3)
            }
            Expr::Add(a, b) => binary(f, a, "+", b, 1),
            Expr::Sub(a, b) => binary(f, a, "-", b, 1),
            Expr::Mul(a, b) => binary(f, a, "*", b, 2),
            Expr::Div(a, b) => binary(f, a, "/", b, 2),
            Expr::Pow(a, k) => {
                child(f, a, 4)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A parsed potential V(x) together with its symbolic gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialExpr {
    ast: Expr,
    gradient: Vec<Expr>,
}

impl PotentialExpr {
    pub fn new(ast: Expr) -> Self {
        let gradient = (0..ast.arity()).map(|i| ast.derivative(i)).collect();
        Self { ast, gradient }
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Highest coordinate index used.
    pub fn arity(&self) -> usize {
        self.ast.arity()
    }

    /// Checks that the expression can be evaluated on `n`-dimensional points.
    pub fn check_dimension(&self, n: usize) -> Result<()> {
        if self.arity() > n {
            return Err(Error::invalid(format!(
                "potential uses x{} but the dimension is {n}",
                self.arity()
            )));
        }
        Ok(())
    }

    /// Evaluates V at `x`. Coordinates beyond `x.len()` must not be referenced
    /// (see [`check_dimension`](Self::check_dimension)).
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.ast.eval(x)
    }

    /// The `i`-th partial derivative as an expression.
    pub fn partial(&self, i: usize) -> Expr {
        self.gradient
            .get(i)
            .cloned()
            .unwrap_or(Expr::Const(0.0))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| self.gradient.get(i).map_or(0.0, |g| g.eval(x)))
            .collect()
    }
}

impl fmt::Display for PotentialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

impl FromStr for PotentialExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_potential(s)
    }
}

pub fn parse_potential(text: &str) -> Result<PotentialExpr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let ast = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(PotentialExpr::new(ast))
}

/// ∇V(x) by symbolic differentiation.
pub fn grad_potential(v: &PotentialExpr, x: &[f64]) -> Result<Vec<f64>> {
    v.check_dimension(x.len())?;
    Ok(v.gradient(x))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while self.eat(b'^') {
            let negative = self.eat(b'-');
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("expected an integer exponent"));
            }
            let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
            let k: i32 = digits.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: "exponent out of range".into(),
            })?;
            base = Expr::Pow(Box::new(base), if negative { -k } else { k });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of input"));
        };
        if c == b'(' {
            self.pos += 1;
            let inner = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            return self.identifier();
        }
        Err(self.error(&format!("unexpected character `{}`", c as char)))
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(Error::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // `2exp(x1)` style juxtaposition is not allowed; treat as an error.
                self.pos = save;
                return Err(self.error("malformed exponent in number"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| Error::Syntax {
                offset: start,
                message: "malformed number".into(),
            })
    }

    fn identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let func = match name {
            "exp" => Some(Func::Exp),
            "cos" => Some(Func::Cos),
            "sin" => Some(Func::Sin),
            _ => None,
        };
        if let Some(func) = func {
            if !self.eat(b'(') {
                return Err(self.error(&format!("expected `(` after `{name}`")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        if name == "pi" {
            return Ok(Expr::Pi);
        }
        if let Some(index) = name.strip_prefix('x') {
            if let Ok(k) = index.parse::<usize>() {
                if k >= 1 && !index.starts_with('0') {
                    return Ok(Expr::Var(k - 1));
                }
            }
        }
        Err(Error::UnknownIdentifier {
            name: name.to_string(),
            offset: start,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(s: &str, x: &[f64]) -> f64 {
        parse_potential(s).unwrap().eval(x)
    }

    #[test]
    fn basic_examples() {
        assert_eq!(
            parse_potential("x1^2").unwrap().ast(),
            &Expr::Pow(Box::new(Expr::Var(0)), 2)
        );
        assert_eq!(eval("x1^2", &[2.0]), 4.0);
        assert_eq!(eval("x1^2 + x2^2", &[1.0, 1.0]), 2.0);
        assert_eq!(eval("(1 - x1^2)^2", &[0.0]), 1.0);
    }

    #[test]
    fn precedence_and_association() {
        assert_eq!(eval("-x1^2", &[3.0]), -9.0);
        assert_eq!(eval("2^3^2", &[]), 64.0);
        assert_eq!(eval("8 / 4 / 2", &[]), 1.0);
        assert_eq!(eval("8 - 4 - 2", &[]), 2.0);
        assert_eq!(eval("1 + 2 * 3", &[]), 7.0);
        assert_eq!(eval("x1^-2", &[2.0]), 0.25);
        assert!((eval("cos(pi)", &[]) + 1.0).abs() < 1e-15);
        assert_eq!(eval("1.5e2", &[]), 150.0);
    }

    #[test]
    fn errors_carry_offsets() {
        match parse_potential("x1 + ") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        match parse_potential("x1 + y") {
            Err(Error::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "y");
                assert_eq!(offset, 5);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_potential("x0"),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(parse_potential("x1^1.5"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_potential("(x1"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_potential("x1 x2"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_potential("exp x1"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn gradient_examples() {
        let v = parse_potential("x1^2").unwrap();
        assert_eq!(grad_potential(&v, &[1.0]).unwrap(), vec![2.0]);
        let v = parse_potential("x1^2 + x2^2").unwrap();
        assert_eq!(grad_potential(&v, &[0.0, 3.0]).unwrap(), vec![0.0, 6.0]);
        assert!(grad_potential(&v, &[1.0]).is_err());
    }

    #[test]
    fn printer_is_canonical() {
        for s in ["x1^2", "-(x1 + 1)", "(-x1)^2", "x1 - (x2 - 1)", "x1 / (x2 * 3)", "exp(-x1^2 / 2)"] {
            assert_eq!(parse_potential(s).unwrap().to_string(), s);
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|k| Expr::Const(k as f64 / 8.0)),
            Just(Expr::Pi),
            (0usize..3).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                (inner.clone(), -3i32..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
                inner.clone().prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
                inner.prop_map(|a| Expr::Call(Func::Exp, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(e in arb_expr()) {
            let text = e.to_string();
            let back = parse_potential(&text).unwrap();
            prop_assert_eq!(back.ast(), &e);
        }

        #[test]
        fn symbolic_gradient_matches_differences(
            e in arb_expr(),
            x in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let v = PotentialExpr::new(e);
            let g = v.gradient(&x);
            for i in 0..3 {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (v.eval(&xp) - v.eval(&xm)) / (2.0 * h);
                xp[i] += h;
                xm[i] -= h;
                let fd2 = (v.eval(&xp) - v.eval(&xm)) / (4.0 * h);
                let scale = 1.0 + g[i].abs() + v.eval(&x).abs();
                // Skip points near singularities, where the two steps disagree.
                let smooth = (fd - fd2).abs() <= 1e-6 * scale;
                if g[i].is_finite() && fd.is_finite() && scale < 1e4 && smooth {
                    prop_assert!((fd - g[i]).abs() <= 1e-4 * scale, "{} vs {}", fd, g[i]);
                }
            }
        }
    }
}
