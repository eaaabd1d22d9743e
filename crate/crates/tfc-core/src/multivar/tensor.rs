//! Expanded form `u = g + M_{i1..in} Phi_{i1}(x1) .. Phi_{in}(xn)`.
//!
//! Index 0 of every dimension stands for the constant 1 in `Phi` and index
//! `j + 1` for switching function `j`. An entry of `M` with non-zero indices
//! on the dimensions `t1, .., tm` (in processing order) is
//! `(-1)^(m+1) C_tm[ .. C_t2[rho_t1] .. ]`, with `rho = kappa - C[g]`.
//! Entries are evaluated on demand as chains of constraint operators.

use super::{apply_terms, Affine, EvalCtx, Field, MultivariateCE, MvError};

/// Tensor view of a [`MultivariateCE`].
pub struct TensorForm<'a> {
    ce: &'a MultivariateCE,
}

impl<'a> TensorForm<'a> {
    pub fn new(ce: &'a MultivariateCE) -> Self {
        TensorForm { ce }
    }

    /// Length of `Phi` per dimension: one plus the number of constraints.
    pub fn shape(&self) -> Vec<usize> {
        (0..self.ce.n_dims()).map(|d| 1 + self.ce.dim(d).map_or(0, |c| c.constraints.len())).collect()
    }

    /// `d`-th derivative of `Phi` for dimension `dim` at `x`.
    pub fn phi_vector(&self, dim: usize, x: f64, d: usize) -> Result<Vec<f64>, MvError> {
        let mut v = vec![if d == 0 { 1.0 } else { 0.0 }];
        if let Some(c) = self.ce.dim(dim) {
            v.extend(c.switching.phi(x, d)?);
        }
        Ok(v)
    }

    /// Adds `scale` times the partial `alpha` of entry `index` of `M` to `out`.
    pub fn entry_into(
        &self,
        index: &[usize],
        leaf: &dyn Field,
        x: &[f64],
        alpha: &[usize],
        scale: f64,
        out: &mut Affine,
        ctx: &EvalCtx,
    ) -> Result<(), MvError> {
        // chosen dimensions in processing order
        let chosen: Vec<(usize, usize)> = self
            .ce
            .order()
            .order
            .iter()
            .filter(|&&d| index[d] > 0)
            .map(|&d| (d, index[d] - 1))
            .collect();
        let Some((&(d1, j1), rest)) = chosen.split_first() else {
            return Ok(());
        };
        // the entry does not depend on the chosen variables
        if chosen.iter().any(|&(d, _)| alpha[d] > 0) {
            return Ok(());
        }
        let sign = if chosen.len() % 2 == 1 { 1.0 } else { -1.0 };
        let rho = Rho { ce: self.ce, dim: d1, j: j1, leaf };
        chain(self.ce, rest, &rho, x, alpha, sign * scale, out, ctx)
    }

    /// Partial `alpha` of `u` assembled from the entries of `M` and `Phi`.
    pub fn eval_into(
        &self,
        leaf: &dyn Field,
        x: &[f64],
        alpha: &[usize],
        scale: f64,
        out: &mut Affine,
        ctx: &EvalCtx,
    ) -> Result<(), MvError> {
        leaf.eval_into(x, alpha, scale, out, ctx)?;
        let shape = self.shape();
        let phis: Vec<Vec<f64>> =
            (0..shape.len()).map(|d| self.phi_vector(d, x[d], alpha[d])).collect::<Result<_, _>>()?;
        let mut index = vec![0usize; shape.len()];
        loop {
            // advance the odometer; the all-zero entry is always zero
            let mut k = 0;
            while k < shape.len() {
                index[k] += 1;
                if index[k] < shape[k] {
                    break;
                }
                index[k] = 0;
                k += 1;
            }
            if k == shape.len() {
                return Ok(());
            }
            let mut weight = scale;
            let mut entry_alpha = alpha.to_vec();
            for d in 0..shape.len() {
                if index[d] > 0 {
                    weight *= phis[d][index[d]];
                    entry_alpha[d] = 0;
                }
            }
            if weight != 0.0 {
                self.entry_into(&index, leaf, x, &entry_alpha, weight, out, ctx)?;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn chain(
    ce: &MultivariateCE,
    rest: &[(usize, usize)],
    inner: &dyn Field,
    x: &[f64],
    alpha: &[usize],
    scale: f64,
    out: &mut Affine,
    ctx: &EvalCtx,
) -> Result<(), MvError> {
    match rest.split_first() {
        None => inner.eval_into(x, alpha, scale, out, ctx),
        Some((&(d, j), tail)) => {
            let op = Apply { ce, dim: d, j, inner };
            chain(ce, tail, &op, x, alpha, scale, out, ctx)
        }
    }
}

/// `kappa_j - C_j[g]` on dimension `dim`.
struct Rho<'a> {
    ce: &'a MultivariateCE,
    dim: usize,
    j: usize,
    leaf: &'a dyn Field,
}

impl Field for Rho<'_> {
    fn eval_into(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut Affine, ctx: &EvalCtx) -> Result<(), MvError> {
        if alpha[self.dim] > 0 {
            return Ok(());
        }
        let dce = self.ce.dim(self.dim).expect("chosen dimension has constraints");
        dce.kappas[self.j].eval_into(x, alpha, scale, out, ctx)?;
        apply_terms(self.leaf, self.dim, &dce.constraints[self.j].terms, x, alpha, -scale, out, ctx)
    }
}

/// `C_j[inner]` on dimension `dim`.
struct Apply<'a> {
    ce: &'a MultivariateCE,
    dim: usize,
    j: usize,
    inner: &'a dyn Field,
}

impl Field for Apply<'_> {
    fn eval_into(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut Affine, ctx: &EvalCtx) -> Result<(), MvError> {
        if alpha[self.dim] > 0 {
            return Ok(());
        }
        let dce = self.ce.dim(self.dim).expect("chosen dimension has constraints");
        apply_terms(self.inner, self.dim, &dce.constraints[self.j].terms, x, alpha, scale, out, ctx)
    }
}
