//! Multivariate free functions that are linear in their coefficients.

use super::{elm_init, eval_family, Activation, BasisError, DomainMap, FamilyKind};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;

/// A free function `g(x) = h(x) . xi` with exact partial derivatives of `h`.
pub trait FreeFunction: Send + Sync {
    /// Number of independent variables.
    fn dim(&self) -> usize;

    /// Number of coefficients.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds `scale` times the partial derivative `alpha` of `h` at `x` to `out`.
    fn add_row(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut [f64]);

    /// Partial derivative `alpha` of `g` at `x` for coefficients `xi`.
    fn eval(&self, x: &[f64], alpha: &[usize], xi: &[f64]) -> f64 {
        let mut row = vec![0.0; self.len()];
        self.add_row(x, alpha, 1.0, &mut row);
        row.iter().zip(xi).map(|(a, b)| a * b).sum()
    }
}

/// One factor of a tensor-product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorDim {
    pub kind: FamilyKind,
    pub map: DomainMap,
    /// Highest index used in this dimension.
    pub max_degree: usize,
    /// Indices already spanned by this dimension's switching functions.
    pub removed: BTreeSet<usize>,
}

impl TensorDim {
    pub fn new(kind: FamilyKind, map: DomainMap, max_degree: usize) -> Self {
        TensorDim { kind, map, max_degree, removed: BTreeSet::new() }
    }

    pub fn with_removed(mut self, removed: impl IntoIterator<Item = usize>) -> Self {
        self.removed = removed.into_iter().collect();
        self
    }
}

/// Tensor-product polynomial or Fourier basis with an optional total-degree cap.
///
/// A product term is dropped only when every one of its factors is a removed
/// index of its dimension, i.e. when the whole product lies in the span the
/// constrained expression already cancels.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorBasis {
    dims: Vec<TensorDim>,
    total_degree: Option<usize>,
    terms: Vec<usize>,
}

impl TensorBasis {
    /// Retained terms after removal.
    pub fn new(dims: Vec<TensorDim>, total_degree: Option<usize>) -> Result<Self, BasisError> {
        Self::build(dims, total_degree, false)
    }

    /// All terms up to the degree caps, ignoring removal.
    pub fn full(dims: Vec<TensorDim>, total_degree: Option<usize>) -> Result<Self, BasisError> {
        Self::build(dims, total_degree, true)
    }

    fn build(dims: Vec<TensorDim>, total_degree: Option<usize>, full: bool) -> Result<Self, BasisError> {
        for d in &dims {
            if matches!(d.kind, FamilyKind::Elm(_)) {
                return Err(BasisError::InvalidRange { lo: f64::NAN, hi: f64::NAN });
            }
            if d.removed.iter().any(|&i| i > d.max_degree) || d.removed.len() > d.max_degree + 1 {
                return Err(BasisError::RemovalTooLarge {
                    requested: d.removed.len(),
                    available: d.max_degree + 1,
                });
            }
        }
        let n = dims.len();
        let mut terms = Vec::new();
        let mut idx = vec![0usize; n];
        // Enumerate in graded order: total degree, then lexicographic.
        let cap: usize = dims.iter().map(|d| d.max_degree).sum();
        let top = total_degree.map_or(cap, |t| t.min(cap));
        for deg in 0..=top {
            enumerate_with_sum(&dims, deg, 0, &mut idx, &mut |i: &[usize]| {
                let all_removed = i.iter().zip(&dims).all(|(k, d)| d.removed.contains(k));
                if full || !all_removed {
                    terms.extend_from_slice(i);
                }
            });
        }
        Ok(TensorBasis { dims, total_degree, terms })
    }

    pub fn dims(&self) -> &[TensorDim] {
        &self.dims
    }

    pub fn total_degree(&self) -> Option<usize> {
        self.total_degree
    }

    /// Multi-index of term `t`.
    pub fn term(&self, t: usize) -> &[usize] {
        let n = self.dims.len();
        &self.terms[t * n..(t + 1) * n]
    }
}

fn enumerate_with_sum(
    dims: &[TensorDim],
    remaining: usize,
    k: usize,
    idx: &mut [usize],
    f: &mut dyn FnMut(&[usize]),
) {
    if k + 1 == dims.len() {
        if remaining <= dims[k].max_degree {
            idx[k] = remaining;
            f(idx);
        }
        return;
    }
    for i in 0..=remaining.min(dims[k].max_degree) {
        idx[k] = i;
        enumerate_with_sum(dims, remaining - i, k + 1, idx, f);
    }
}

impl FreeFunction for TensorBasis {
    fn dim(&self) -> usize {
        self.dims.len()
    }

    fn len(&self) -> usize {
        self.terms.len() / self.dims.len().max(1)
    }

    fn add_row(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut [f64]) {
        let n = self.dims.len();
        let mut tables: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (k, d) in self.dims.iter().enumerate() {
            let mut t = vec![0.0; d.max_degree + 1];
            eval_family(d.kind, d.map.to_basis(x[k]), alpha[k], &mut t);
            let c = d.map.slope().powi(alpha[k] as i32);
            if c != 1.0 {
                t.iter_mut().for_each(|v| *v *= c);
            }
            tables.push(t);
        }
        for (o, term) in out.iter_mut().zip(self.terms.chunks_exact(n)) {
            let mut p = scale;
            for (tab, &i) in tables.iter().zip(term) {
                p *= tab[i];
            }
            *o += p;
        }
    }
}

/// Random-feature layer `act(W z + b)` with `z` the per-dimension mapped input.
#[derive(Clone, Debug, PartialEq)]
pub struct ElmBasis {
    pub activation: Activation,
    pub maps: Vec<DomainMap>,
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
    pub seed: u64,
}

impl ElmBasis {
    pub fn new(
        activation: Activation,
        problem: &[(f64, f64)],
        neurons: usize,
        seed: u64,
        range: (f64, f64),
    ) -> Result<Self, BasisError> {
        let maps = problem
            .iter()
            .map(|&p| DomainMap::native(FamilyKind::Elm(activation), p))
            .collect::<Result<Vec<_>, _>>()?;
        let (weights, biases) = elm_init(seed, neurons, problem.len(), range)?;
        Ok(ElmBasis { activation, maps, weights, biases, seed })
    }
}

impl FreeFunction for ElmBasis {
    fn dim(&self) -> usize {
        self.maps.len()
    }

    fn len(&self) -> usize {
        self.biases.len()
    }

    fn add_row(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut [f64]) {
        let order: usize = alpha.iter().sum();
        let z: Vec<f64> = self.maps.iter().zip(x).map(|(m, &x)| m.to_basis(x)).collect();
        let c: Vec<f64> = self.maps.iter().map(|m| m.slope()).collect();
        for (j, o) in out.iter_mut().enumerate() {
            let mut t = self.biases[j];
            let mut factor = scale;
            for k in 0..z.len() {
                let w = self.weights[(j, k)];
                t += w * z[k];
                if alpha[k] > 0 {
                    factor *= (w * c[k]).powi(alpha[k] as i32);
                }
            }
            if factor != 0.0 {
                *o += factor * self.activation.derivative(t, order);
            }
        }
    }
}

/// Either kind of linear free function.
#[derive(Clone, Debug, PartialEq)]
pub enum FreeBasis {
    Tensor(TensorBasis),
    Elm(ElmBasis),
}

impl FreeFunction for FreeBasis {
    fn dim(&self) -> usize {
        match self {
            FreeBasis::Tensor(t) => t.dim(),
            FreeBasis::Elm(e) => e.dim(),
        }
    }

    fn len(&self) -> usize {
        match self {
            FreeBasis::Tensor(t) => t.len(),
            FreeBasis::Elm(e) => e.len(),
        }
    }

    fn add_row(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut [f64]) {
        match self {
            FreeBasis::Tensor(t) => t.add_row(x, alpha, scale, out),
            FreeBasis::Elm(e) => e.add_row(x, alpha, scale, out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cheb_dim(lo: f64, hi: f64, m: usize, removed: &[usize]) -> TensorDim {
        TensorDim::new(FamilyKind::Chebyshev, DomainMap::native(FamilyKind::Chebyshev, (lo, hi)).unwrap(), m)
            .with_removed(removed.iter().copied())
    }

    #[test]
    fn two_dimensional_retained_counts() {
        for (m, expect) in [(5, 17), (10, 62), (15, 132), (20, 227), (25, 347)] {
            let b = TensorBasis::new(
                vec![cheb_dim(0.0, 1.0, m, &[0, 1]), cheb_dim(0.0, 1.0, m, &[0, 1])],
                Some(m),
            )
            .unwrap();
            assert_eq!(b.len(), expect, "m={m}");
        }
    }

    #[test]
    fn full_keeps_everything() {
        let dims = vec![cheb_dim(0.0, 1.0, 5, &[0, 1]), cheb_dim(0.0, 1.0, 5, &[0, 1])];
        assert_eq!(TensorBasis::full(dims, Some(5)).unwrap().len(), 21);
    }

    #[test]
    fn tensor_row_is_product_of_factors() {
        let b = TensorBasis::new(vec![cheb_dim(0.0, 2.0, 3, &[]), cheb_dim(-1.0, 1.0, 3, &[])], None).unwrap();
        assert_eq!(b.len(), 16);
        let x = [0.7, -0.2];
        let mut row = vec![0.0; b.len()];
        b.add_row(&x, &[1, 2], 1.0, &mut row);
        let zx = x[0] - 1.0;
        for t in 0..b.len() {
            let term = b.term(t);
            let mut fx = vec![0.0; 4];
            let mut fy = vec![0.0; 4];
            eval_family(FamilyKind::Chebyshev, zx, 1, &mut fx);
            eval_family(FamilyKind::Chebyshev, x[1], 2, &mut fy);
            assert!((row[t] - fx[term[0]] * fy[term[1]]).abs() < 1e-14);
        }
    }

    #[test]
    fn elm_partial_matches_finite_difference() {
        let e = ElmBasis::new(Activation::Tanh, &[(0.0, 1.0), (0.0, 2.0)], 6, 1, (-1.0, 1.0)).unwrap();
        let xi: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 0.7).collect();
        let x = [0.4, 1.1];
        let h = 1e-5;
        let fd = (e.eval(&[x[0], x[1] + h], &[1, 0], &xi) - e.eval(&[x[0], x[1] - h], &[1, 0], &xi)) / (2.0 * h);
        let exact = e.eval(&x, &[1, 1], &xi);
        assert!((fd - exact).abs() < 1e-8);
    }
}
