//! Inequality bounds imposed by clamping a function between two others.

use crate::constraint::{ExprUnivariate, Univariate};
use crate::expr::{EvalError, Expr};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClampError {
    #[error("lower bound {lower} exceeds upper bound {upper} at {x}")]
    InconsistentBounds { x: f64, lower: f64, upper: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Which branch of a clamp is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClampBranch {
    Lower,
    Inner,
    Upper,
}

/// Picks the active branch for an inner value between two bounds.
/// Ties go to the inner function.
pub fn clamp_branch(inner: f64, lower: f64, upper: f64) -> ClampBranch {
    if inner < lower {
        ClampBranch::Lower
    } else if inner > upper {
        ClampBranch::Upper
    } else {
        ClampBranch::Inner
    }
}

/// Clamped scalar with its slope with respect to the inner value: one
/// inside the bounds, zero where a constant bound is active.
pub fn clamp_scalar(inner: f64, lower: f64, upper: f64) -> Result<(f64, f64), ClampError> {
    if lower > upper {
        return Err(ClampError::InconsistentBounds { x: inner, lower, upper });
    }
    Ok(match clamp_branch(inner, lower, upper) {
        ClampBranch::Lower => (lower, 0.0),
        ClampBranch::Inner => (inner, 1.0),
        ClampBranch::Upper => (upper, 0.0),
    })
}

/// `inner` held between `lower(x)` and `upper(x)`.
///
/// Every derivative is taken from whichever function is active at `x`, so
/// the step function hidden in the switch contributes nothing.
pub struct InequalityClamp<F> {
    inner: F,
    lower: ExprUnivariate,
    upper: ExprUnivariate,
}

/// Clamps `inner` between bound expressions in the variable `var`.
pub fn clamp<F: Univariate>(inner: F, lower: Expr, upper: Expr, var: &str) -> InequalityClamp<F> {
    InequalityClamp { inner, lower: ExprUnivariate::new(lower, var), upper: ExprUnivariate::new(upper, var) }
}

impl<F: Univariate> InequalityClamp<F> {
    pub fn branch(&self, x: f64) -> Result<ClampBranch, ClampError> {
        let lo = self.lower.deriv(x, 0)?;
        let hi = self.upper.deriv(x, 0)?;
        if lo > hi {
            return Err(ClampError::InconsistentBounds { x, lower: lo, upper: hi });
        }
        Ok(clamp_branch(self.inner.deriv(x, 0)?, lo, hi))
    }

    /// `d`-th derivative of the clamped function.
    pub fn eval(&self, x: f64, d: usize) -> Result<f64, ClampError> {
        Ok(match self.branch(x)? {
            ClampBranch::Lower => self.lower.deriv(x, d)?,
            ClampBranch::Inner => self.inner.deriv(x, d)?,
            ClampBranch::Upper => self.upper.deriv(x, d)?,
        })
    }
}

impl<F: Univariate> Univariate for InequalityClamp<F> {
    fn deriv(&self, x: f64, d: usize) -> Result<f64, EvalError> {
        self.eval(x, d).map_err(|e| match e {
            ClampError::Eval(e) => e,
            other => EvalError::Domain(other.to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{Constraint, ConstraintOperator, FnUnivariate, UnivariateCE};
    use crate::expr::parse;
    use proptest::prelude::*;

    #[test]
    fn below_lower_takes_lower() {
        let c = clamp(FnUnivariate(|_, d| if d == 0 { -10.0 } else { 0.0 }), Expr::num(0.0), Expr::num(1.0), "x");
        assert_eq!(c.eval(0.3, 0).unwrap(), 0.0);
        assert_eq!(c.eval(0.3, 1).unwrap(), 0.0);
    }

    #[test]
    fn inside_bounds_is_identity() {
        let c = clamp(
            FnUnivariate(|x: f64, d| if d == 0 { x.sin() } else { x.cos() }),
            Expr::num(-2.0),
            Expr::num(2.0),
            "x",
        );
        for i in 0..10 {
            let x = i as f64 * 0.7;
            assert_eq!(c.eval(x, 0).unwrap(), x.sin());
            assert_eq!(c.eval(x, 1).unwrap(), x.cos());
        }
    }

    #[test]
    fn upper_branch_uses_bound_derivative() {
        let c = clamp(FnUnivariate(|_, _| 5.0), parse("-1").unwrap(), parse("x^2").unwrap(), "x");
        assert_eq!(c.eval(1.5, 0).unwrap(), 2.25);
        assert_eq!(c.eval(1.5, 1).unwrap(), 3.0);
        assert_eq!(c.eval(1.5, 2).unwrap(), 2.0);
    }

    #[test]
    fn crossed_bounds_are_rejected() {
        let c = clamp(FnUnivariate(|_, _| 0.0), Expr::num(1.0), Expr::num(0.0), "x");
        assert!(matches!(c.eval(0.0, 0), Err(ClampError::InconsistentBounds { .. })));
        assert!(clamp_scalar(0.5, 1.0, 0.0).is_err());
        assert_eq!(clamp_scalar(2.0, 0.0, 1.0).unwrap(), (1.0, 0.0));
        assert_eq!(clamp_scalar(0.5, 0.0, 1.0).unwrap(), (0.5, 1.0));
    }

    #[test]
    fn clamped_expression_keeps_point_constraints() {
        // y(0) = 0.2, y(1) = 0.5 inside bounds -0.5 + x/4 <= y <= 0.6
        let ce = UnivariateCE::build(
            vec![
                Constraint::new(ConstraintOperator::point(0.0), 0.2),
                Constraint::new(ConstraintOperator::point(1.0), 0.5),
            ],
            None,
        )
        .unwrap();
        let g = FnUnivariate(|x: f64, d| match d {
            0 => 3.0 * (5.0 * x).sin(),
            1 => 15.0 * (5.0 * x).cos(),
            _ => -75.0 * (5.0 * x).sin(),
        });
        let y = FnUnivariate(|x: f64, d| ce.evaluate(&g, x, d, None).unwrap());
        let c = clamp(y, parse("-0.5 + x/4").unwrap(), parse("0.6").unwrap(), "x");
        assert!((c.eval(0.0, 0).unwrap() - 0.2).abs() < 1e-14);
        assert!((c.eval(1.0, 0).unwrap() - 0.5).abs() < 1e-14);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let v = c.eval(x, 0).unwrap();
            assert!(v >= -0.5 + x / 4.0 && v <= 0.6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn output_never_leaves_bounds(
            a in -3.0f64..3.0, b in -3.0f64..3.0, w in 0.1f64..10.0,
            lo0 in -2.0f64..0.0, lo1 in -1.0f64..1.0, gap in 0.0f64..2.0, x in -1.0f64..1.0,
        ) {
            let inner = FnUnivariate(move |x: f64, d| match d {
                0 => a + b * (w * x).sin(),
                _ => b * w * (w * x).cos(),
            });
            let lower = Expr::add(Expr::num(lo0), Expr::mul(Expr::num(lo1), Expr::var("x")));
            let upper = Expr::add(lower.clone(), Expr::num(gap));
            let c = clamp(inner, lower, upper, "x");
            let v = c.eval(x, 0).unwrap();
            let lo = lo0 + lo1 * x;
            prop_assert!(v >= lo && v <= lo + gap + 1e-15);
            let slope = c.eval(x, 1).unwrap();
            match c.branch(x).unwrap() {
                ClampBranch::Inner => prop_assert_eq!(slope, b * w * (w * x).cos()),
                _ => prop_assert!((slope - lo1).abs() < 1e-15),
            }
        }
    }
}
