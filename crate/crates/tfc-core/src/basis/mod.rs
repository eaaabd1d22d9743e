//! Free-function building blocks: orthogonal polynomial and Fourier families,
//! random-feature layers, collocation nodes and linear domain maps.

mod elm;
mod family;
mod tensor;

pub use elm::{elm_init, Activation};
pub use family::{eval_family, FamilyKind};
pub use tensor::{ElmBasis, FreeBasis, FreeFunction, TensorBasis, TensorDim};

use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("point {x} lies outside the problem interval [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },
    #[error("removal of {requested} functions exceeds the {available} available")]
    RemovalTooLarge { requested: usize, available: usize },
    #[error("at least 2 nodes are required, got {0}")]
    TooFewNodes(usize),
    #[error("invalid sampling range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("the {0} family has no finite native domain; supply a collocation window")]
    MissingWindow(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Affine map between a problem interval and a basis interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainMap {
    pub x0: f64,
    pub xf: f64,
    pub z0: f64,
    pub zf: f64,
}

impl DomainMap {
    pub fn new(problem: (f64, f64), basis: (f64, f64)) -> Result<Self, BasisError> {
        for (lo, hi) in [problem, basis] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(BasisError::InvalidInterval { lo, hi });
            }
        }
        Ok(DomainMap { x0: problem.0, xf: problem.1, z0: basis.0, zf: basis.1 })
    }

    /// Map onto the family's native interval. Laguerre and Hermite have none.
    pub fn native(kind: FamilyKind, problem: (f64, f64)) -> Result<Self, BasisError> {
        let basis = kind.native_domain().ok_or(BasisError::MissingWindow(kind.name()))?;
        DomainMap::new(problem, basis)
    }

    /// dz/dx.
    pub fn slope(&self) -> f64 {
        (self.zf - self.z0) / (self.xf - self.x0)
    }

    pub fn to_basis(&self, x: f64) -> f64 {
        self.z0 + self.slope() * (x - self.x0)
    }

    pub fn to_problem(&self, z: f64) -> f64 {
        self.x0 + (z - self.z0) / self.slope()
    }

    pub fn contains(&self, x: f64) -> bool {
        let tol = 1e-12 * (self.xf - self.x0).abs().max(1.0);
        x >= self.x0 - tol && x <= self.xf + tol
    }

    fn check(&self, x: f64) -> Result<(), BasisError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(BasisError::OutsideDomain { x, lo: self.x0, hi: self.xf })
        }
    }
}

/// Chebyshev–Gauss–Lobatto nodes on [-1, 1], increasing, with exact endpoints.
pub fn cgl_nodes(n: usize) -> Result<Vec<f64>, BasisError> {
    if n < 2 {
        return Err(BasisError::TooFewNodes(n));
    }
    let last = (n - 1) as f64;
    let mut z: Vec<f64> = (0..n)
        .map(|j| -(std::f64::consts::PI * j as f64 / last).cos())
        .collect();
    z[0] = -1.0;
    z[n - 1] = 1.0;
    // Symmetrize so the middle node is exactly zero and pairs mirror exactly.
    for j in 0..n / 2 {
        let v = 0.5 * (z[n - 1 - j] - z[j]);
        z[j] = -v;
        z[n - 1 - j] = v;
    }
    if n % 2 == 1 {
        z[n / 2] = 0.0;
    }
    Ok(z)
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn uniform_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Which basis functions to drop because they are already spanned by the
/// switching functions.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Removal {
    #[default]
    None,
    First(usize),
    Indices(BTreeSet<usize>),
}

impl Removal {
    pub fn indices(&self, available: usize) -> Result<BTreeSet<usize>, BasisError> {
        match self {
            Removal::None => Ok(BTreeSet::new()),
            Removal::First(k) => {
                if *k > available {
                    return Err(BasisError::RemovalTooLarge { requested: *k, available });
                }
                Ok((0..*k).collect())
            }
            Removal::Indices(set) => {
                if set.len() > available || set.iter().any(|&i| i >= available) {
                    return Err(BasisError::RemovalTooLarge { requested: set.len(), available });
                }
                Ok(set.clone())
            }
        }
    }
}

/// A univariate family of `degree + 1` functions with a removal rule.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisFamily {
    pub kind: FamilyKind,
    pub degree: usize,
    pub removal: Removal,
    elm: Option<(DVector<f64>, DVector<f64>)>,
}

impl BasisFamily {
    pub fn new(kind: FamilyKind, degree: usize, removal: Removal) -> Self {
        assert!(!matches!(kind, FamilyKind::Elm(_)), "use BasisFamily::elm for random features");
        BasisFamily { kind, degree, removal, elm: None }
    }

    /// Random-feature family with `neurons` hidden units drawn from `range`.
    pub fn elm(
        activation: Activation,
        neurons: usize,
        seed: u64,
        range: (f64, f64),
    ) -> Result<Self, BasisError> {
        let (w, b) = elm_init(seed, neurons, 1, range)?;
        Ok(BasisFamily {
            kind: FamilyKind::Elm(activation),
            degree: neurons.saturating_sub(1),
            removal: Removal::None,
            elm: Some((w.column(0).into_owned(), b)),
        })
    }

    /// Hidden weights and biases of a random-feature family.
    pub fn elm_parameters(&self) -> Option<(&DVector<f64>, &DVector<f64>)> {
        self.elm.as_ref().map(|(w, b)| (w, b))
    }

    pub fn count(&self) -> usize {
        self.degree + 1
    }

    /// Indices kept after removal, increasing.
    pub fn retained(&self) -> Result<Vec<usize>, BasisError> {
        let removed = self.removal.indices(self.count())?;
        Ok((0..self.count()).filter(|i| !removed.contains(i)).collect())
    }

    /// `d`-th derivative with respect to the basis variable `z` of every function.
    pub fn eval_native(&self, z: f64, d: usize, out: &mut [f64]) {
        match (&self.kind, &self.elm) {
            (FamilyKind::Elm(act), Some((w, b))) => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = w[j].powi(d as i32) * act.derivative(w[j] * z + b[j], d);
                }
            }
            _ => eval_family(self.kind, z, d, out),
        }
    }
}

/// Matrix of `d`-th derivatives with respect to the problem variable,
/// one row per point and one column per retained function (all columns when `full`).
pub fn eval_basis(
    family: &BasisFamily,
    map: &DomainMap,
    x: &[f64],
    d: usize,
    full: bool,
) -> Result<DMatrix<f64>, BasisError> {
    let cols = if full { (0..family.count()).collect() } else { family.retained()? };
    let scale = map.slope().powi(d as i32);
    let mut buf = vec![0.0; family.count()];
    let mut h = DMatrix::zeros(x.len(), cols.len());
    for (i, &xi) in x.iter().enumerate() {
        map.check(xi)?;
        family.eval_native(map.to_basis(xi), d, &mut buf);
        for (j, &c) in cols.iter().enumerate() {
            h[(i, j)] = scale * buf[c];
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cgl_examples() {
        assert_eq!(cgl_nodes(3).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(cgl_nodes(2).unwrap(), vec![-1.0, 1.0]);
        let z = cgl_nodes(5).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in z.iter().zip([-1.0, -r, 0.0, r, 1.0]) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert!(matches!(cgl_nodes(1), Err(BasisError::TooFewNodes(1))));
        let z = cgl_nodes(40).unwrap();
        assert!(z.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn domain_map_round_trip() {
        let m = DomainMap::new((1.0, 4.0), (-1.0, 1.0)).unwrap();
        assert!((m.slope() - 2.0 / 3.0).abs() < 1e-15);
        for x in [1.0, 2.3, 4.0] {
            assert!((m.to_problem(m.to_basis(x)) - x).abs() < 1e-14);
        }
        assert!(DomainMap::new((1.0, 1.0), (-1.0, 1.0)).is_err());
        assert!(matches!(
            DomainMap::native(FamilyKind::Laguerre, (0.0, 1.0)),
            Err(BasisError::MissingWindow(_))
        ));
    }

    #[test]
    fn eval_basis_examples() {
        let cheb = BasisFamily::new(FamilyKind::Chebyshev, 4, Removal::None);
        let id = DomainMap::new((-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let h = eval_basis(&cheb, &id, &[1.0], 0, true).unwrap();
        assert_eq!(h.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0; 5]);
        let h = eval_basis(&cheb, &id, &[0.5], 1, true).unwrap();
        assert!((h[(0, 2)] - 2.0).abs() < 1e-15);
        let leg = BasisFamily::new(FamilyKind::Legendre, 2, Removal::None);
        assert_eq!(eval_basis(&leg, &id, &[1.0], 0, true).unwrap()[(0, 2)], 1.0);
    }

    #[test]
    fn removal_and_errors() {
        let id = DomainMap::new((-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let cheb = BasisFamily::new(FamilyKind::Chebyshev, 4, Removal::First(2));
        let h = eval_basis(&cheb, &id, &[0.3], 0, false).unwrap();
        assert_eq!(h.ncols(), 3);
        assert!((h[(0, 0)] - (2.0 * 0.09 - 1.0)).abs() < 1e-15);
        assert_eq!(eval_basis(&cheb, &id, &[0.3], 0, true).unwrap().ncols(), 5);
        let too_many = BasisFamily::new(FamilyKind::Chebyshev, 4, Removal::First(6));
        assert!(matches!(
            eval_basis(&too_many, &id, &[0.3], 0, false),
            Err(BasisError::RemovalTooLarge { .. })
        ));
        assert!(matches!(
            eval_basis(&cheb, &id, &[1.5], 0, false),
            Err(BasisError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn chain_rule_scaling() {
        let fam = BasisFamily::new(FamilyKind::Legendre, 6, Removal::None);
        let native = DomainMap::new((-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let problem = DomainMap::new((2.0, 2.5), (-1.0, 1.0)).unwrap();
        for d in 0..4 {
            let xs = [2.0, 2.1, 2.37, 2.5];
            let zs: Vec<f64> = xs.iter().map(|&x| problem.to_basis(x)).collect();
            let hp = eval_basis(&fam, &problem, &xs, d, true).unwrap();
            let hn = eval_basis(&fam, &native, &zs, d, true).unwrap();
            let c = problem.slope().powi(d as i32);
            assert!((hp - hn * c).amax() < 1e-9);
        }
    }

    #[test]
    fn elm_family_derivative_scaling() {
        let fam = BasisFamily::elm(Activation::Tanh, 5, 3, (-1.0, 1.0)).unwrap();
        let map = DomainMap::native(fam.kind, (0.0, 2.0)).unwrap();
        let (w, b) = fam.elm_parameters().unwrap();
        let h = eval_basis(&fam, &map, &[1.0], 1, true).unwrap();
        for j in 0..5 {
            let t = w[j] * 0.5 + b[j];
            let expect = 0.5 * w[j] * (1.0 - t.tanh().powi(2));
            assert!((h[(0, j)] - expect).abs() < 1e-15);
        }
    }
}
