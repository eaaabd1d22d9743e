//! A small analytic expression language.
//!
//! Expressions are used for boundary data, forcing terms, analytic solutions
//! and differential-equation residuals. The grammar is
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | tan | sinh | cosh | tanh | exp | ln | sqrt | abs | sign
//! ```
//!
//! `pi` and `e` are constants. Any other name is a variable; names such as
//! `u_xx` are ordinary variables at this level and are interpreted as
//! partial derivatives of a dependent variable by the solver layer.
//! `sign` is the derivative of `abs` and is undefined at zero.
//!
//! Exponentiation is right associative and binds tighter than unary minus,
//! so `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`.

mod diff;
mod eval;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

pub use eval::{Bindings, CompiledExpr, EvalError};
pub use parse::{parse, parse_bytes, parse_with_vars, ParseError};

/// Binary operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Built-in unary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    pub const ALL: [Func; 11] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
        Func::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Named mathematical constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
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

    pub fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }
}

/// Expression tree. Immutable once built; cloning is a deep copy.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    /// Numeric value if the expression is a literal or a constant.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Const(c) => Some(c.value()),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 1.0)
    }

    /// Sum with constant folding and zero elimination.
    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            return fold(x + y).unwrap_or_else(|| Expr::Bin(BinOp::Add, Box::new(a), Box::new(b)));
        }
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            return fold(x - y).unwrap_or_else(|| Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b)));
        }
        Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::Num(0.0);
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            return fold(x * y).unwrap_or_else(|| Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b)));
        }
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if a.is_zero() && !b.is_zero() {
            return Expr::Num(0.0);
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            if *y != 0.0 {
                if let Some(f) = fold(x / y) {
                    return f;
                }
            }
        }
        Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return Expr::Num(1.0);
        }
        if b.is_one() {
            return a;
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            if *x > 0.0 || y.fract() == 0.0 {
                if let Some(f) = fold(x.powf(*y)) {
                    return f;
                }
            }
        }
        Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Num(v) => Expr::Num(-v),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Names of all variables occurring in the expression, sorted.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Num(_) | Expr::Const(_) => {}
        }
    }

    /// True when any variable accepted by `pred` occurs in the expression.
    pub fn depends_on(&self, pred: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Expr::Var(v) => pred(v),
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(pred),
            Expr::Bin(_, a, b) => a.depends_on(pred) || b.depends_on(pred),
            Expr::Num(_) | Expr::Const(_) => false,
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        self.depends_on(&|v| v == name)
    }

    /// Structural test that the expression is affine in the variables
    /// accepted by `pred`: no products, quotients, powers or function calls
    /// involve them except multiplication or division by factors free of them.
    pub fn is_affine_in(&self, pred: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => true,
            Expr::Neg(a) => a.is_affine_in(pred),
            Expr::Call(_, a) => !a.depends_on(pred),
            Expr::Bin(op, a, b) => match op {
                BinOp::Add | BinOp::Sub => a.is_affine_in(pred) && b.is_affine_in(pred),
                BinOp::Mul => {
                    let da = a.depends_on(pred);
                    let db = b.depends_on(pred);
                    match (da, db) {
                        (true, true) => false,
                        (true, false) => a.is_affine_in(pred),
                        (false, true) => b.is_affine_in(pred),
                        (false, false) => true,
                    }
                }
                BinOp::Div => !b.depends_on(pred) && a.is_affine_in(pred),
                BinOp::Pow => {
                    if b.depends_on(pred) {
                        return false;
                    }
                    if !a.depends_on(pred) {
                        return true;
                    }
                    matches!(b.as_ref(), Expr::Num(v) if *v == 1.0) && a.is_affine_in(pred)
                }
            },
        }
    }

    /// Replace every occurrence of variable `name` with `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v == name => with.clone(),
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::neg(a.substitute(name, with)),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(name, with)),
            Expr::Bin(op, a, b) => {
                let a = a.substitute(name, with);
                let b = b.substitute(name, with);
                match op {
                    BinOp::Add => Expr::add(a, b),
                    BinOp::Sub => Expr::sub(a, b),
                    BinOp::Mul => Expr::mul(a, b),
                    BinOp::Div => Expr::div(a, b),
                    BinOp::Pow => Expr::pow(a, b),
                }
            }
        }
    }

    /// Replace variables by numbers where `lookup` has a value and fold constants.
    pub fn bind_partial(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Expr {
        match self {
            Expr::Var(v) => match lookup(v) {
                Some(x) => Expr::Num(x),
                None => self.clone(),
            },
            Expr::Num(_) | Expr::Const(_) => self.clone(),
            Expr::Neg(a) => Expr::neg(a.bind_partial(lookup)),
            Expr::Call(f, a) => Expr::call(*f, a.bind_partial(lookup)),
            Expr::Bin(op, a, b) => {
                let a = a.bind_partial(lookup);
                let b = b.bind_partial(lookup);
                match op {
                    BinOp::Add => Expr::add(a, b),
                    BinOp::Sub => Expr::sub(a, b),
                    BinOp::Mul => Expr::mul(a, b),
                    BinOp::Div => Expr::div(a, b),
                    BinOp::Pow => Expr::pow(a, b),
                }
            }
        }
    }

    /// Tree depth; leaves have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Bin(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, _, _) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, _, _) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            Expr::Bin(BinOp::Pow, _, _) => 4,
            _ => 5,
        }
    }
}

fn fold(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Num(v))
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Const(c) => write!(f, "{}", c.name()),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => {
                let (sym, left, right) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                    BinOp::Pow => ("^", 5, 3),
                };
                write_child(f, a, left)?;
                write!(f, "{sym}")?;
                write_child(f, b, right)
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
