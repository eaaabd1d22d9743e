use super::{lstsq, LsqError, LsqMethod};
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Hook that projects an iterate back into its admissible set.
pub type Clamp = Arc<dyn Fn(&mut DVector<f64>) + Send + Sync>;

#[derive(Clone)]
pub struct NllsConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub method: LsqMethod,
    pub clamp: Option<Clamp>,
    /// Compare the Jacobian with central differences at the initial guess.
    pub check_jacobian: bool,
}

impl Default for NllsConfig {
    fn default() -> Self {
        NllsConfig {
            tol: 1e-13,
            max_iter: 50,
            method: LsqMethod::default(),
            clamp: None,
            check_jacobian: cfg!(debug_assertions),
        }
    }
}

impl fmt::Debug for NllsConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NllsConfig")
            .field("tol", &self.tol)
            .field("max_iter", &self.max_iter)
            .field("method", &self.method)
            .field("clamp", &self.clamp.is_some())
            .field("check_jacobian", &self.check_jacobian)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ResidualInfNorm,
    StepInfNorm,
    MaxIterations,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::ResidualInfNorm => "residual-inf-norm",
            Termination::StepInfNorm => "step-inf-norm",
            Termination::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NllsResult {
    pub xi: DVector<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Infinity norm of the residual at each iterate, starting with the guess.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NllsError<E: std::error::Error + 'static> {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("least squares failed at iteration {iteration}: {source}")]
    Lsq { iteration: usize, source: LsqError },
    #[error("residual evaluation failed at iteration {iteration}: {source}")]
    Residual { iteration: usize, source: E },
    #[error("Jacobian disagrees with finite differences by {mismatch:e}")]
    JacobianMismatch { mismatch: f64 },
}

/// Gauss-Newton iteration `xi += dxi` with `J dxi = -L` solved in the
/// least-squares sense. Stops when the residual infinity norm is below
/// `tol`, then when the step infinity norm is, then after `max_iter` steps.
pub fn nlls<E, R, J>(
    mut residual: R,
    mut jacobian: J,
    xi0: DVector<f64>,
    config: &NllsConfig,
) -> Result<NllsResult, NllsError<E>>
where
    E: std::error::Error + 'static,
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
    J: FnMut(&DVector<f64>) -> Result<DMatrix<f64>, E>,
{
    if !(config.tol > 0.0) {
        return Err(NllsError::Config("tol must be positive"));
    }
    if config.max_iter == 0 {
        return Err(NllsError::Config("max_iter must be at least 1"));
    }
    let mut xi = xi0;
    if let Some(c) = &config.clamp {
        c(&mut xi);
    }
    if config.check_jacobian {
        check_jacobian(&mut residual, &mut jacobian, &xi)?;
    }
    let mut history = Vec::new();
    let mut step_norm = f64::INFINITY;
    let mut it = 0;
    loop {
        let l = residual(&xi).map_err(|source| NllsError::Residual { iteration: it, source })?;
        let lnorm = l.amax();
        history.push(lnorm);
        let termination = if lnorm < config.tol {
            Some(Termination::ResidualInfNorm)
        } else if step_norm < config.tol {
            Some(Termination::StepInfNorm)
        } else if it >= config.max_iter {
            Some(Termination::MaxIterations)
        } else {
            None
        };
        if let Some(termination) = termination {
            return Ok(NllsResult { xi, iterations: it, termination, residual_history: history });
        }
        let j = jacobian(&xi).map_err(|source| NllsError::Residual { iteration: it, source })?;
        let dxi = lstsq(&j, &(-l), config.method).map_err(|source| NllsError::Lsq { iteration: it, source })?;
        let before = xi.clone();
        xi += &dxi;
        if let Some(c) = &config.clamp {
            c(&mut xi);
        }
        step_norm = (&xi - before).amax();
        it += 1;
    }
}

/// Directional derivatives along a few fixed directions.
fn check_jacobian<E, R, J>(residual: &mut R, jacobian: &mut J, xi: &DVector<f64>) -> Result<(), NllsError<E>>
where
    E: std::error::Error + 'static,
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
    J: FnMut(&DVector<f64>) -> Result<DMatrix<f64>, E>,
{
    let n = xi.len();
    if n == 0 {
        return Ok(());
    }
    let wrap = |source| NllsError::Residual { iteration: 0, source };
    let j = jacobian(xi).map_err(wrap)?;
    let h = 1e-6 * (1.0 + xi.amax());
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        let v = DVector::from_fn(n, |i, _| ((i * (2 * k + 3) + k) % 7) as f64 / 7.0 - 0.4);
        let plus = residual(&(xi + &v * h)).map_err(wrap)?;
        let minus = residual(&(xi - &v * h)).map_err(wrap)?;
        let fd = (plus - minus) / (2.0 * h);
        let jv = &j * &v;
        worst = worst.max((&jv - fd).amax() / (1.0 + jv.amax()));
    }
    if worst > 1e-4 {
        return Err(NllsError::JacobianMismatch { mismatch: worst });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn scalar(f: fn(f64) -> f64, df: fn(f64) -> f64, x0: f64) -> NllsResult {
        nlls::<Infallible, _, _>(
            |x| Ok(DVector::from_element(1, f(x[0]))),
            |x| Ok(DMatrix::from_element(1, 1, df(x[0]))),
            DVector::from_element(1, x0),
            &NllsConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn square_root_of_four() {
        let r = scalar(|x| x * x - 4.0, |x| 2.0 * x, 1.0);
        assert!((r.xi[0] - 2.0).abs() < 1e-13);
        assert!(r.iterations <= 8);
        assert_eq!(r.termination, Termination::ResidualInfNorm);
    }

    #[test]
    fn affine_converges_in_one_step() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 1.0, 0.0]);
        let x = DVector::from_vec(vec![0.5, -1.5]);
        let b = &a * &x;
        let r = nlls::<Infallible, _, _>(
            |xi| Ok(&a * xi - &b),
            |_| Ok(a.clone()),
            DVector::zeros(2),
            &NllsConfig::default(),
        )
        .unwrap();
        assert_eq!(r.iterations, 1);
        assert!((r.xi - x).amax() < 1e-14);
    }

    #[test]
    fn no_real_root_hits_iteration_cap() {
        let r = scalar(|x| x * x + 1.0, |x| 2.0 * x, 0.5);
        assert_eq!(r.termination, Termination::MaxIterations);
        assert_eq!(r.iterations, 50);
        // from 1 the first step lands on the stationary point, where the
        // minimum-norm step is zero
        let r = scalar(|x| x * x + 1.0, |x| 2.0 * x, 1.0);
        assert_eq!(r.xi[0], 0.0);
        assert_eq!(r.termination, Termination::StepInfNorm);
    }

    #[test]
    fn small_step_stops_even_with_large_residual() {
        // inconsistent overdetermined system: the minimizer has a non-zero residual
        let r = nlls::<Infallible, _, _>(
            |x| Ok(DVector::from_vec(vec![x[0] - 1.0, x[0] + 1.0])),
            |_| Ok(DMatrix::from_element(2, 1, 1.0)),
            DVector::from_element(1, 3.0),
            &NllsConfig::default(),
        )
        .unwrap();
        assert_eq!(r.termination, Termination::StepInfNorm);
        assert!(r.residual_history.last().unwrap() > &0.5);
    }

    #[test]
    fn wrong_jacobian_is_caught() {
        let cfg = NllsConfig { check_jacobian: true, ..Default::default() };
        let err = nlls::<Infallible, _, _>(
            |x| Ok(DVector::from_element(1, x[0] * x[0])),
            |_| Ok(DMatrix::from_element(1, 1, 7.0)),
            DVector::from_element(1, 1.0),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, NllsError::JacobianMismatch { .. }));
    }

    #[test]
    fn clamp_is_applied() {
        let cfg = NllsConfig {
            clamp: Some(Arc::new(|x: &mut DVector<f64>| x[0] = x[0].clamp(0.0, 1.5))),
            max_iter: 5,
            ..Default::default()
        };
        let r = nlls::<Infallible, _, _>(
            |x| Ok(DVector::from_element(1, x[0] - 2.0)),
            |_| Ok(DMatrix::from_element(1, 1, 1.0)),
            DVector::from_element(1, 0.0),
            &cfg,
        )
        .unwrap();
        assert_eq!(r.xi[0], 1.5);
        assert_eq!(r.termination, Termination::StepInfNorm);
    }
}
