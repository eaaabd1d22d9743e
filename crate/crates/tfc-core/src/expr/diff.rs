use super::{BinOp, Expr, Func};

impl Expr {
    /// Exact symbolic derivative of order `order` with respect to `var`.
    pub fn differentiate(&self, var: &str, order: usize) -> Expr {
        let mut e = self.clone();
        for _ in 0..order {
            e = e.d(var);
        }
        e
    }

    /// Mixed partial derivative: one entry per differentiation, applied left to right.
    pub fn differentiate_many(&self, vars: &[&str]) -> Expr {
        vars.iter().fold(self.clone(), |e, v| e.d(v))
    }

    fn d(&self, x: &str) -> Expr {
        if !self.contains_var(x) {
            return Expr::Num(0.0);
        }
        match self {
            Expr::Num(_) | Expr::Const(_) => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if v == x { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.d(x)),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.as_ref(), b.as_ref());
                match op {
                    BinOp::Add => Expr::add(a.d(x), b.d(x)),
                    BinOp::Sub => Expr::sub(a.d(x), b.d(x)),
                    BinOp::Mul => Expr::add(
                        Expr::mul(a.d(x), b.clone()),
                        Expr::mul(a.clone(), b.d(x)),
                    ),
                    BinOp::Div => {
                        if !b.contains_var(x) {
                            return Expr::div(a.d(x), b.clone());
                        }
                        Expr::div(
                            Expr::sub(
                                Expr::mul(a.d(x), b.clone()),
                                Expr::mul(a.clone(), b.d(x)),
                            ),
                            Expr::pow(b.clone(), Expr::Num(2.0)),
                        )
                    }
                    BinOp::Pow => {
                        if !b.contains_var(x) {
                            // n a^(n-1) a'
                            let n1 = Expr::sub(b.clone(), Expr::Num(1.0));
                            Expr::mul(
                                Expr::mul(b.clone(), Expr::pow(a.clone(), n1)),
                                a.d(x),
                            )
                        } else if !a.contains_var(x) {
                            // a^b ln(a) b'
                            Expr::mul(
                                Expr::mul(self.clone(), Expr::call(Func::Ln, a.clone())),
                                b.d(x),
                            )
                        } else {
                            // a^b (b' ln a + b a'/a)
                            Expr::mul(
                                self.clone(),
                                Expr::add(
                                    Expr::mul(b.d(x), Expr::call(Func::Ln, a.clone())),
                                    Expr::div(Expr::mul(b.clone(), a.d(x)), a.clone()),
                                ),
                            )
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let inner = a.as_ref().clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, inner),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, inner)),
                    Func::Tan => Expr::div(
                        Expr::Num(1.0),
                        Expr::pow(Expr::call(Func::Cos, inner), Expr::Num(2.0)),
                    ),
                    Func::Sinh => Expr::call(Func::Cosh, inner),
                    Func::Cosh => Expr::call(Func::Sinh, inner),
                    Func::Tanh => Expr::sub(
                        Expr::Num(1.0),
                        Expr::pow(Expr::call(Func::Tanh, inner), Expr::Num(2.0)),
                    ),
                    Func::Exp => Expr::call(Func::Exp, inner),
                    Func::Ln => Expr::div(Expr::Num(1.0), inner),
                    Func::Sqrt => Expr::div(
                        Expr::Num(1.0),
                        Expr::mul(Expr::Num(2.0), Expr::call(Func::Sqrt, inner)),
                    ),
                    Func::Abs => Expr::call(Func::Sign, inner),
                    // Zero away from the origin; at the origin `sign` itself already errors.
                    Func::Sign => return Expr::Num(0.0),
                };
                Expr::mul(outer, a.d(x))
            }
        }
    }
}
