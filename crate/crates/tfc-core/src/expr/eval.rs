use super::{BinOp, Expr, Func};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{0} is not differentiable at {1}")]
    NonDifferentiable(&'static str, f64),
}

/// Source of variable values during evaluation.
pub trait Bindings {
    fn value(&self, name: &str) -> Option<f64>;
}

impl Bindings for HashMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for HashMap<&str, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for BTreeMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for [(&str, f64)] {
    fn value(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Bindings for [(&str, f64); N] {
    fn value(&self, name: &str) -> Option<f64> {
        self.as_slice().value(name)
    }
}

impl<F: Fn(&str) -> Option<f64>> Bindings for F {
    fn value(&self, name: &str) -> Option<f64> {
        self(name)
    }
}

fn checked(v: f64, what: &str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain(format!("{what} produced a non-finite value")))
    }
}

pub(crate) fn apply_bin(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    match op {
        BinOp::Add => checked(a + b, "addition"),
        BinOp::Sub => checked(a - b, "subtraction"),
        BinOp::Mul => checked(a * b, "multiplication"),
        BinOp::Div => {
            if b == 0.0 {
                return Err(EvalError::Domain(format!("division of {a} by zero")));
            }
            checked(a / b, "division")
        }
        BinOp::Pow => {
            if a < 0.0 && b.fract() != 0.0 {
                return Err(EvalError::Domain(format!(
                    "negative base {a} raised to non-integer power {b}"
                )));
            }
            if a == 0.0 && b < 0.0 {
                return Err(EvalError::Domain(format!("zero raised to negative power {b}")));
            }
            let v = if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                a.powi(b as i32)
            } else {
                a.powf(b)
            };
            checked(v, "power")
        }
    }
}

pub(crate) fn apply_func(f: Func, a: f64) -> Result<f64, EvalError> {
    let v = match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Tan => {
            if a.cos() == 0.0 {
                return Err(EvalError::Domain(format!("tan pole at {a}")));
            }
            a.tan()
        }
        Func::Sinh => a.sinh(),
        Func::Cosh => a.cosh(),
        Func::Tanh => a.tanh(),
        Func::Exp => a.exp(),
        Func::Ln => {
            if a <= 0.0 {
                return Err(EvalError::Domain(format!("ln of non-positive value {a}")));
            }
            a.ln()
        }
        Func::Sqrt => {
            if a < 0.0 {
                return Err(EvalError::Domain(format!("sqrt of negative value {a}")));
            }
            a.sqrt()
        }
        Func::Abs => a.abs(),
        Func::Sign => {
            if a == 0.0 {
                return Err(EvalError::NonDifferentiable("abs", a));
            }
            a.signum()
        }
    };
    checked(v, f.name())
}

impl Expr {
    /// Evaluate with the given variable bindings.
    pub fn eval<B: Bindings + ?Sized>(&self, b: &B) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Const(c) => Ok(c.value()),
            Expr::Var(name) => b.value(name).ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Neg(a) => Ok(-a.eval(b)?),
            Expr::Bin(op, l, r) => apply_bin(*op, l.eval(b)?, r.eval(b)?),
            Expr::Call(f, a) => apply_func(*f, a.eval(b)?),
        }
    }

    /// Resolve variable names to slot indices for repeated evaluation.
    pub fn compile(&self, slots: &[&str]) -> Result<CompiledExpr, EvalError> {
        let mut code = Vec::new();
        self.emit(slots, &mut code)?;
        Ok(CompiledExpr { code })
    }

    fn emit(&self, slots: &[&str], code: &mut Vec<Op>) -> Result<(), EvalError> {
        match self {
            Expr::Num(v) => code.push(Op::Push(*v)),
            Expr::Const(c) => code.push(Op::Push(c.value())),
            Expr::Var(name) => {
                let i = slots
                    .iter()
                    .position(|s| s == name)
                    .ok_or_else(|| EvalError::Unbound(name.clone()))?;
                code.push(Op::Load(i));
            }
            Expr::Neg(a) => {
                a.emit(slots, code)?;
                code.push(Op::Neg);
            }
            Expr::Bin(op, l, r) => {
                l.emit(slots, code)?;
                r.emit(slots, code)?;
                code.push(Op::Bin(*op));
            }
            Expr::Call(f, a) => {
                a.emit(slots, code)?;
                code.push(Op::Call(*f));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Push(f64),
    Load(usize),
    Neg,
    Bin(BinOp),
    Call(Func),
}

/// Postfix form of an expression with variables bound to slot positions.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledExpr {
    code: Vec<Op>,
}

impl CompiledExpr {
    /// Evaluate with `values[i]` bound to the i-th slot name given to `compile`.
    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        let mut stack: Vec<f64> = Vec::with_capacity(16);
        for op in &self.code {
            match *op {
                Op::Push(v) => stack.push(v),
                Op::Load(i) => stack.push(values[i]),
                Op::Neg => {
                    let a = stack.pop().expect("compiled stack underflow");
                    stack.push(-a);
                }
                Op::Bin(b) => {
                    let r = stack.pop().expect("compiled stack underflow");
                    let l = stack.pop().expect("compiled stack underflow");
                    stack.push(apply_bin(b, l, r)?);
                }
                Op::Call(f) => {
                    let a = stack.pop().expect("compiled stack underflow");
                    stack.push(apply_func(f, a)?);
                }
            }
        }
        Ok(stack.pop().expect("compiled stack underflow"))
    }

    /// True when the expression is a literal zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.code.as_slice(), [Op::Push(v)] if *v == 0.0)
    }
}
