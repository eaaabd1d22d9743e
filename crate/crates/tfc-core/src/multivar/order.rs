use super::{MvConstraint, MvError};

/// Order in which the univariate expressions are nested, innermost first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessingOrder {
    pub order: Vec<usize>,
    /// `(before, after, constraint)`: the constraint on `before` integrates over `after`.
    pub forced: Vec<(usize, usize, usize)>,
}

/// Topological order of the dimensions.
///
/// A constraint on dimension `l` that integrates over dimension `k` forces
/// `l` to be processed before `k`: the switching functions of `k` are then
/// built to vanish under that integral, so the outer expression for `k`
/// cannot disturb the constraint on `l`. Ties go to the lowest index.
pub fn order_dimensions(n: usize, constraints: &[MvConstraint]) -> Result<ProcessingOrder, MvError> {
    let mut forced = Vec::new();
    let mut adj = vec![vec![false; n]; n];
    for (i, c) in constraints.iter().enumerate() {
        if c.dim >= n {
            return Err(MvError::BadDimension(c.dim));
        }
        for k in c.foreign_dims() {
            if k >= n {
                return Err(MvError::BadDimension(k));
            }
            forced.push((c.dim, k, i));
            adj[c.dim][k] = true;
        }
    }
    let mut indeg: Vec<usize> = (0..n).map(|j| (0..n).filter(|&i| adj[i][j]).count()).collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while let Some(next) = (0..n).find(|&d| !done[d] && indeg[d] == 0) {
        done[next] = true;
        order.push(next);
        for j in 0..n {
            if adj[next][j] {
                indeg[j] -= 1;
            }
        }
    }
    if order.len() < n {
        return Err(MvError::CyclicIntegralDependency((0..n).filter(|&d| !done[d]).collect()));
    }
    Ok(ProcessingOrder { order, forced })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::EvalSpec;
    use crate::expr::Expr;
    use crate::multivar::MvTerm;

    fn integrating(dim: usize, over: usize) -> MvConstraint {
        MvConstraint::new(dim, vec![MvTerm::new(EvalSpec::point(0.0)).integrating(over, 0.0, 1.0)], Expr::num(1.0))
    }

    #[test]
    fn integral_forces_order() {
        let o = order_dimensions(2, &[integrating(1, 0)]).unwrap();
        assert_eq!(o.order, vec![1, 0]);
        assert_eq!(o.forced, vec![(1, 0, 0)]);
        let o = order_dimensions(2, &[integrating(0, 1)]).unwrap();
        assert_eq!(o.order, vec![0, 1]);
        let free = order_dimensions(3, &[]).unwrap();
        assert_eq!(free.order, vec![0, 1, 2]);
    }

    #[test]
    fn mutual_integrals_are_cyclic() {
        let err = order_dimensions(3, &[integrating(0, 1), integrating(1, 0)]).unwrap_err();
        assert_eq!(err, MvError::CyclicIntegralDependency(vec![0, 1]));
    }
}
