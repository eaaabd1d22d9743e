use super::Univariate;
use crate::expr::{EvalError, Expr};

/// One support function.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    /// `x^p`, with exact derivatives and integrals.
    Monomial(u32),
    /// Arbitrary expression in `var`; `derivs[d]` is the `d`-th derivative.
    Expr { var: String, derivs: Vec<Expr> },
}

/// Derivative orders precomputed for expression supports.
const PRECOMPUTED_ORDERS: usize = 8;

impl Support {
    pub fn expr(e: Expr, var: &str) -> Self {
        let mut derivs = vec![e];
        for _ in 0..PRECOMPUTED_ORDERS {
            let next = derivs.last().expect("non-empty").differentiate(var, 1);
            derivs.push(next);
        }
        Support::Expr { var: var.to_string(), derivs }
    }
}

fn falling(p: u32, d: usize) -> f64 {
    (0..d as u32).map(|k| (p - k) as f64).product()
}

impl Univariate for Support {
    fn deriv(&self, x: f64, d: usize) -> Result<f64, EvalError> {
        match self {
            Support::Monomial(p) => {
                if d as u32 > *p {
                    Ok(0.0)
                } else {
                    Ok(falling(*p, d) * x.powi((*p - d as u32) as i32))
                }
            }
            Support::Expr { var, derivs } => {
                if d < derivs.len() {
                    derivs[d].eval(&[(var.as_str(), x)])
                } else {
                    let extra = derivs.last().expect("non-empty").differentiate(var, d + 1 - derivs.len());
                    extra.eval(&[(var.as_str(), x)])
                }
            }
        }
    }

    fn exact_integral(&self, a: f64, b: f64) -> Option<Result<f64, EvalError>> {
        match self {
            Support::Monomial(p) => {
                let q = (*p + 1) as i32;
                Some(Ok((b.powi(q) - a.powi(q)) / q as f64))
            }
            Support::Expr { .. } => None,
        }
    }
}

/// Ordered list of support functions.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportBasis {
    functions: Vec<Support>,
}

impl SupportBasis {
    pub fn new(functions: Vec<Support>) -> Self {
        SupportBasis { functions }
    }

    /// `1, x, ..., x^(n-1)`.
    pub fn monomials(n: usize) -> Self {
        SupportBasis::from_powers(&(0..n as u32).collect::<Vec<_>>())
    }

    pub fn from_powers(powers: &[u32]) -> Self {
        SupportBasis::new(powers.iter().map(|&p| Support::Monomial(p)).collect())
    }

    pub fn functions(&self) -> &[Support] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Monomial powers when every support is a monomial.
    pub fn powers(&self) -> Option<Vec<u32>> {
        self.functions
            .iter()
            .map(|f| match f {
                Support::Monomial(p) => Some(*p),
                Support::Expr { .. } => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn monomial_rules() {
        let s = Support::Monomial(3);
        assert_eq!(s.deriv(2.0, 0).unwrap(), 8.0);
        assert_eq!(s.deriv(2.0, 1).unwrap(), 12.0);
        assert_eq!(s.deriv(2.0, 3).unwrap(), 6.0);
        assert_eq!(s.deriv(2.0, 4).unwrap(), 0.0);
        assert_eq!(s.exact_integral(0.0, 2.0).unwrap().unwrap(), 4.0);
    }

    #[test]
    fn expression_support_matches_monomial() {
        let e = Support::expr(parse("t^4").unwrap(), "t");
        let m = Support::Monomial(4);
        for d in 0..11 {
            assert!((e.deriv(0.7, d).unwrap() - m.deriv(0.7, d).unwrap()).abs() < 1e-12);
        }
    }
}
