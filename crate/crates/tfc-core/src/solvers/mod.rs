//! Linear least squares and the Gauss-Newton loop built on it.

mod nlls;

pub use nlls::{nlls, NllsConfig, NllsError, NllsResult, Termination};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LsqError {
    #[error("{method:?} needs at least as many rows as columns, got {rows}x{cols}")]
    Underdetermined { method: LsqMethod, rows: usize, cols: usize },
    #[error("{method:?} failed: matrix is rank deficient")]
    RankDeficient { method: LsqMethod },
    #[error("right-hand side has {got} entries, matrix has {rows} rows")]
    DimensionMismatch { rows: usize, got: usize },
    #[error("non-finite entry in the system")]
    NonFinite,
}

/// How to compute the least-squares solution of `A xi = b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum LsqMethod {
    /// Solve `A^T A xi = A^T b` by LU.
    NormalEquations,
    /// Householder QR of `A`.
    Qr,
    /// QR of `A` with columns scaled to unit 2-norm.
    ScaledQr,
    /// Pseudo-inverse with a machine-precision cutoff.
    SvdPinv,
    /// Cholesky factorization of `A^T A`.
    Cholesky,
    /// SVD with singular values below `max(s) * 1e-14 * max(rows, cols)` dropped.
    #[default]
    IllConditioned,
}

impl LsqMethod {
    pub const ALL: [LsqMethod; 6] = [
        LsqMethod::NormalEquations,
        LsqMethod::Qr,
        LsqMethod::ScaledQr,
        LsqMethod::SvdPinv,
        LsqMethod::Cholesky,
        LsqMethod::IllConditioned,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LsqMethod::NormalEquations => "normal",
            LsqMethod::Qr => "qr",
            LsqMethod::ScaledQr => "scaled-qr",
            LsqMethod::SvdPinv => "svd-pinv",
            LsqMethod::Cholesky => "cholesky",
            LsqMethod::IllConditioned => "lstsq",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        LsqMethod::ALL.into_iter().find(|m| m.name() == name)
    }
}

/// Relative cutoff on singular values for [`LsqMethod::IllConditioned`].
pub const ILL_CONDITIONED_RCOND: f64 = 1e-14;

/// Least-squares solution of `a xi = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, method: LsqMethod) -> Result<DVector<f64>, LsqError> {
    let (rows, cols) = a.shape();
    if b.len() != rows {
        return Err(LsqError::DimensionMismatch { rows, got: b.len() });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(LsqError::NonFinite);
    }
    if cols == 0 {
        return Ok(DVector::zeros(0));
    }
    let needs_tall = matches!(method, LsqMethod::Qr | LsqMethod::ScaledQr | LsqMethod::Cholesky);
    if needs_tall && rows < cols {
        return Err(LsqError::Underdetermined { method, rows, cols });
    }
    let rank = LsqError::RankDeficient { method };
    match method {
        LsqMethod::NormalEquations => {
            let ata = a.tr_mul(a);
            ata.lu().solve(&a.tr_mul(b)).filter(|x| x.iter().all(|v| v.is_finite())).ok_or(rank)
        }
        LsqMethod::Cholesky => {
            let chol = a.tr_mul(a).cholesky().ok_or(rank)?;
            Ok(chol.solve(&a.tr_mul(b)))
        }
        LsqMethod::Qr => qr_solve(a.clone(), b).ok_or(rank),
        LsqMethod::ScaledQr => {
            let scale: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
            if scale.iter().any(|&s| s == 0.0) {
                return Err(rank);
            }
            let mut scaled = a.clone();
            for (j, s) in scale.iter().enumerate() {
                scaled.column_mut(j).scale_mut(1.0 / s);
            }
            let mut x = qr_solve(scaled, b).ok_or(rank)?;
            for (v, s) in x.iter_mut().zip(&scale) {
                *v /= s;
            }
            Ok(x)
        }
        LsqMethod::SvdPinv | LsqMethod::IllConditioned => {
            let rcond = if method == LsqMethod::SvdPinv {
                f64::EPSILON * rows.max(cols) as f64
            } else {
                ILL_CONDITIONED_RCOND * rows.max(cols) as f64
            };
            Ok(svd_solve(a, b, rcond))
        }
    }
}

/// Truncated pseudo-inverse solve. Tall matrices are reduced by QR first so
/// the SVD runs on the square triangular factor, then one refinement step
/// with the same factors recovers digits lost in the decomposition.
fn svd_solve(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let (rows, cols) = a.shape();
    let (q, r) = if rows > cols {
        let qr = a.clone().qr();
        (Some(qr.q()), qr.r())
    } else {
        (None, a.clone())
    };
    let svd = r.svd(true, true);
    let cutoff = svd.singular_values.max() * rcond;
    let u = svd.u.as_ref().expect("computed");
    let vt = svd.v_t.as_ref().expect("computed");
    let apply = |rhs: &DVector<f64>| {
        let reduced = match &q {
            Some(q) => q.tr_mul(rhs),
            None => rhs.clone(),
        };
        let mut utb = u.tr_mul(&reduced);
        for (k, s) in svd.singular_values.iter().enumerate() {
            utb[k] = if *s > cutoff { utb[k] / s } else { 0.0 };
        }
        vt.tr_mul(&utb)
    };
    let mut x = apply(b);
    let correction = apply(&(b - a * &x));
    x += correction;
    x
}

fn qr_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let cols = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    let dmax = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= dmax * f64::EPSILON * cols as f64) {
        return None;
    }
    let qtb = qr.q().tr_mul(b);
    r.solve_upper_triangular(&qtb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_returns_rhs() {
        let b = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        for m in LsqMethod::ALL {
            let x = lstsq(&DMatrix::identity(3, 3), &b, m).unwrap();
            assert!((x - &b).amax() < 1e-15, "{m:?}");
        }
    }

    #[test]
    fn methods_agree_on_well_conditioned_system() {
        let a = random(40, 10, 3);
        let b = DVector::from_iterator(40, random(40, 1, 4).iter().copied());
        let reference = lstsq(&a, &b, LsqMethod::NormalEquations).unwrap();
        for m in LsqMethod::ALL {
            let x = lstsq(&a, &b, m).unwrap();
            assert!((&x - &reference).amax() < 1e-10 * reference.amax(), "{m:?}");
        }
    }

    #[test]
    fn svd_beats_cholesky_on_hilbert_matrix() {
        let a = DMatrix::from_fn(8, 8, |i, j| 1.0 / (i + j + 1) as f64);
        let b = DVector::from_fn(8, |i, _| 1.0 + i as f64);
        let resid = |x: &DVector<f64>| (&a * x - &b).norm();
        let svd = lstsq(&a, &b, LsqMethod::SvdPinv).unwrap();
        match lstsq(&a, &b, LsqMethod::Cholesky) {
            Ok(chol) => assert!(resid(&svd) <= resid(&chol)),
            Err(e) => assert_eq!(e, LsqError::RankDeficient { method: LsqMethod::Cholesky }),
        }
    }

    #[test]
    fn rank_deficiency_is_reported_or_min_norm() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(lstsq(&a, &b, LsqMethod::Qr).is_err());
        assert!(lstsq(&a, &b, LsqMethod::Cholesky).is_err());
        let x = lstsq(&a, &b, LsqMethod::IllConditioned).unwrap();
        // minimum-norm solution lies along (1, 2)
        assert!((x[0] - 0.2).abs() < 1e-12 && (x[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let a = DMatrix::zeros(2, 3);
        assert!(matches!(lstsq(&a, &DVector::zeros(2), LsqMethod::Qr), Err(LsqError::Underdetermined { .. })));
        assert!(matches!(lstsq(&a, &DVector::zeros(3), LsqMethod::Qr), Err(LsqError::DimensionMismatch { .. })));
        assert_eq!(LsqMethod::from_name("scaled-qr"), Some(LsqMethod::ScaledQr));
    }
}
