//! Univariate constrained expressions.
//!
//! A constraint is a linear functional `C` (a weighted sum of point
//! derivatives and definite integrals) together with the value `kappa` it must
//! take. Given support functions `s_j` the switching functions are
//! `phi_i = s_j alpha_ji` with `alpha = S^-1`, `S_ij = C_i[s_j]`, and
//!
//! ```text
//! y(x) = g(x) + phi_i(x) (kappa_i - C_i[g])
//! ```
//!
//! satisfies every constraint for any `g`.

mod support;

pub use support::{Support, SupportBasis};

use crate::basis::FreeFunction;
use crate::expr::{EvalError, Expr};
use crate::quad;
use nalgebra::DMatrix;
use thiserror::Error;

/// Condition number above which a support matrix is treated as singular.
pub const SINGULAR_COND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("support matrix is singular (condition estimate {cond:e}); choose different support functions")]
    SingularSupport { cond: f64 },
    #[error("support matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("constraint value depends on the constrained variable `{0}`")]
    KappaDependsOnOwnVariable(String),
    #[error("component value for `{0}` requested without a resolver")]
    UnresolvedComponent(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One weighted evaluation inside a constraint operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvalSpec {
    /// `coeff * f^(order)(at)`
    Point { order: usize, at: f64, coeff: f64 },
    /// `coeff * integral of f from lower to upper`
    Integral { lower: f64, upper: f64, coeff: f64 },
}

impl EvalSpec {
    pub fn point(at: f64) -> Self {
        EvalSpec::Point { order: 0, at, coeff: 1.0 }
    }

    pub fn deriv(order: usize, at: f64) -> Self {
        EvalSpec::Point { order, at, coeff: 1.0 }
    }

    pub fn integral(lower: f64, upper: f64) -> Self {
        EvalSpec::Integral { lower, upper, coeff: 1.0 }
    }

    pub fn coeff(&self) -> f64 {
        match *self {
            EvalSpec::Point { coeff, .. } | EvalSpec::Integral { coeff, .. } => coeff,
        }
    }

    pub fn scaled(self, s: f64) -> Self {
        match self {
            EvalSpec::Point { order, at, coeff } => EvalSpec::Point { order, at, coeff: coeff * s },
            EvalSpec::Integral { lower, upper, coeff } => {
                EvalSpec::Integral { lower, upper, coeff: coeff * s }
            }
        }
    }

    pub fn max_order(&self) -> usize {
        match *self {
            EvalSpec::Point { order, .. } => order,
            EvalSpec::Integral { .. } => 0,
        }
    }
}

/// Linear functional on univariate functions: the sum of its terms.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ConstraintOperator {
    pub terms: Vec<EvalSpec>,
}

impl ConstraintOperator {
    pub fn new(terms: Vec<EvalSpec>) -> Self {
        ConstraintOperator { terms }
    }

    pub fn point(at: f64) -> Self {
        ConstraintOperator::new(vec![EvalSpec::point(at)])
    }

    pub fn deriv(order: usize, at: f64) -> Self {
        ConstraintOperator::new(vec![EvalSpec::deriv(order, at)])
    }

    pub fn integral(lower: f64, upper: f64) -> Self {
        ConstraintOperator::new(vec![EvalSpec::integral(lower, upper)])
    }

    /// `f(a) - f(b)`, the usual encoding of a relative constraint `f(a) = f(b)`.
    pub fn relative(order: usize, a: f64, b: f64) -> Self {
        ConstraintOperator::new(vec![
            EvalSpec::Point { order, at: a, coeff: 1.0 },
            EvalSpec::Point { order, at: b, coeff: -1.0 },
        ])
    }

    pub fn with(mut self, spec: EvalSpec) -> Self {
        self.terms.push(spec);
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        ConstraintOperator::new(self.terms.iter().map(|t| t.scaled(s)).collect())
    }

    pub fn has_integral(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, EvalSpec::Integral { .. }))
    }

    pub fn max_order(&self) -> usize {
        self.terms.iter().map(EvalSpec::max_order).max().unwrap_or(0)
    }
}

/// A univariate function with derivatives of any order.
pub trait Univariate {
    fn deriv(&self, x: f64, d: usize) -> Result<f64, EvalError>;

    /// Closed-form definite integral, when one is available.
    fn exact_integral(&self, _a: f64, _b: f64) -> Option<Result<f64, EvalError>> {
        None
    }
}

/// Wraps a closure `(x, order) -> value` as a [`Univariate`].
pub struct FnUnivariate<F>(pub F);

impl<F: Fn(f64, usize) -> f64> Univariate for FnUnivariate<F> {
    fn deriv(&self, x: f64, d: usize) -> Result<f64, EvalError> {
        Ok((self.0)(x, d))
    }
}

/// An expression in one variable, differentiated symbolically.
pub struct ExprUnivariate {
    var: String,
    derivs: std::sync::Mutex<Vec<Expr>>,
}

impl ExprUnivariate {
    pub fn new(expr: Expr, var: &str) -> Self {
        ExprUnivariate { var: var.to_string(), derivs: std::sync::Mutex::new(vec![expr]) }
    }
}

impl Univariate for ExprUnivariate {
    fn deriv(&self, x: f64, d: usize) -> Result<f64, EvalError> {
        let mut cache = self.derivs.lock().unwrap_or_else(|p| p.into_inner());
        while cache.len() <= d {
            let next = cache.last().expect("non-empty").differentiate(&self.var, 1);
            cache.push(next);
        }
        cache[d].eval(&[(self.var.as_str(), x)])
    }
}

/// Weighted sum of the operator's evaluations of `f`.
///
/// Integrals use `f`'s closed form when it has one and 64-point
/// Gauss–Legendre quadrature otherwise.
pub fn apply_operator(op: &ConstraintOperator, f: &dyn Univariate) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for t in &op.terms {
        total += match *t {
            EvalSpec::Point { order, at, coeff } => coeff * f.deriv(at, order)?,
            EvalSpec::Integral { lower, upper, coeff } => {
                let v = match f.exact_integral(lower, upper) {
                    Some(v) => v?,
                    None => {
                        let mut s = 0.0;
                        for (x, w) in quad::mapped_rule(lower, upper) {
                            s += w * f.deriv(x, 0)?;
                        }
                        s
                    }
                };
                coeff * v
            }
        };
    }
    Ok(total)
}

/// Applies the operator to every function of a one-dimensional linear basis,
/// giving the row `C[h]` with `C[h . xi] = row . xi`.
pub fn apply_operator_row(op: &ConstraintOperator, basis: &dyn FreeFunction) -> Vec<f64> {
    let mut row = vec![0.0; basis.len()];
    for t in &op.terms {
        match *t {
            EvalSpec::Point { order, at, coeff } => basis.add_row(&[at], &[order], coeff, &mut row),
            EvalSpec::Integral { lower, upper, coeff } => {
                for (x, w) in quad::mapped_rule(lower, upper) {
                    basis.add_row(&[x], &[0], coeff * w, &mut row);
                }
            }
        }
    }
    row
}

/// Reference from a component constraint to another dependent variable.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentTerm {
    /// Name of the other dependent variable.
    pub variable: String,
    /// Operator applied to that variable.
    pub op: ConstraintOperator,
}

/// Value a constraint operator must produce.
#[derive(Clone, Debug, PartialEq)]
pub enum Kappa {
    Const(f64),
    /// Expression over the other independent variables (none in one dimension).
    Expr(Expr),
    /// `rhs - sum of op_v[v]` over the other dependent variables of a component constraint.
    Component { rhs: Expr, others: Vec<ComponentTerm> },
}

impl Kappa {
    pub fn expr(e: Expr) -> Kappa {
        match e.as_number() {
            Some(v) => Kappa::Const(v),
            None => Kappa::Expr(e),
        }
    }
}

/// Resolves `op[v]` for another dependent variable `v`.
pub trait ComponentResolver {
    fn apply(&self, variable: &str, op: &ConstraintOperator) -> Result<f64, EvalError>;
}

/// A linear constraint `op[y] = kappa`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub op: ConstraintOperator,
    pub kappa: Kappa,
}

impl Constraint {
    pub fn new(op: ConstraintOperator, kappa: f64) -> Self {
        Constraint { op, kappa: Kappa::Const(kappa) }
    }

    /// Numeric value of kappa in one dimension.
    pub fn kappa_value(&self, resolver: Option<&dyn ComponentResolver>) -> Result<f64, ConstraintError> {
        match &self.kappa {
            Kappa::Const(v) => Ok(*v),
            Kappa::Expr(e) => Ok(e.eval(&|_: &str| None)?),
            Kappa::Component { rhs, others } => {
                let mut v = rhs.eval(&|_: &str| None)?;
                for t in others {
                    let r = resolver.ok_or_else(|| ConstraintError::UnresolvedComponent(t.variable.clone()))?;
                    v -= r.apply(&t.variable, &t.op)?;
                }
                Ok(v)
            }
        }
    }
}

/// `S_ij = C_i[s_j]`.
pub fn support_matrix(ops: &[&ConstraintOperator], supports: &SupportBasis) -> Result<DMatrix<f64>, EvalError> {
    let mut s = DMatrix::zeros(ops.len(), supports.len());
    for (i, op) in ops.iter().enumerate() {
        for (j, sup) in supports.functions().iter().enumerate() {
            s[(i, j)] = apply_operator(op, sup)?;
        }
    }
    Ok(s)
}

/// Ratio of extreme singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `alpha = S^-1`.
pub fn solve_switching(s: &DMatrix<f64>) -> Result<DMatrix<f64>, ConstraintError> {
    solve_switching_augmented(s, s.nrows())
}

/// Solves `S alpha = [I; 0]` where the first `native` rows of `S` are the
/// constraints being switched and the remaining rows are extra conditions the
/// switching functions must annihilate.
pub fn solve_switching_augmented(s: &DMatrix<f64>, native: usize) -> Result<DMatrix<f64>, ConstraintError> {
    if s.nrows() != s.ncols() {
        return Err(ConstraintError::NotSquare { rows: s.nrows(), cols: s.ncols() });
    }
    let cond = condition_number(s);
    if !(cond <= SINGULAR_COND) {
        return Err(ConstraintError::SingularSupport { cond });
    }
    let n = s.nrows();
    let rhs = DMatrix::from_fn(n, native, |i, j| if i == j { 1.0 } else { 0.0 });
    let lu = s.clone().lu();
    let mut alpha = lu.solve(&rhs).ok_or(ConstraintError::SingularSupport { cond })?;
    // One step of iterative refinement keeps exact rational answers exact.
    let r = &rhs - s * &alpha;
    if let Some(delta) = lu.solve(&r) {
        alpha += delta;
    }
    Ok(alpha)
}

/// Support functions with the coefficient matrix giving the switching functions.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingSet {
    pub supports: SupportBasis,
    /// supports x constraints
    pub alpha: DMatrix<f64>,
    /// Extra annihilation conditions appended below the native constraints.
    pub extra: Vec<ConstraintOperator>,
}

impl SwitchingSet {
    /// Switching functions for `ops` that also vanish under every operator in `extra`.
    pub fn build(
        ops: &[&ConstraintOperator],
        extra: &[ConstraintOperator],
        supports: SupportBasis,
    ) -> Result<Self, ConstraintError> {
        let rows: Vec<&ConstraintOperator> = ops.iter().copied().chain(extra.iter()).collect();
        let s = support_matrix(&rows, &supports)?;
        let alpha = solve_switching_augmented(&s, ops.len())?;
        Ok(SwitchingSet { supports, alpha, extra: extra.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.ncols() == 0
    }

    /// `d`-th derivative of every switching function at `x`.
    pub fn phi(&self, x: f64, d: usize) -> Result<Vec<f64>, EvalError> {
        let mut s = Vec::with_capacity(self.supports.len());
        for f in self.supports.functions() {
            s.push(f.deriv(x, d)?);
        }
        Ok((0..self.alpha.ncols())
            .map(|i| s.iter().enumerate().map(|(j, sj)| sj * self.alpha[(j, i)]).sum())
            .collect())
    }

    /// Switching function `i` as a [`Univariate`].
    pub fn function(&self, i: usize) -> SwitchingFunction<'_> {
        SwitchingFunction { set: self, index: i }
    }
}

/// One switching function borrowed from its set.
pub struct SwitchingFunction<'a> {
    set: &'a SwitchingSet,
    index: usize,
}

impl Univariate for SwitchingFunction<'_> {
    fn deriv(&self, x: f64, d: usize) -> Result<f64, EvalError> {
        let mut v = 0.0;
        for (j, f) in self.set.supports.functions().iter().enumerate() {
            let a = self.set.alpha[(j, self.index)];
            if a != 0.0 {
                v += a * f.deriv(x, d)?;
            }
        }
        Ok(v)
    }

    fn exact_integral(&self, a: f64, b: f64) -> Option<Result<f64, EvalError>> {
        let mut v = 0.0;
        for (j, f) in self.set.supports.functions().iter().enumerate() {
            match f.exact_integral(a, b)? {
                Ok(i) => v += self.set.alpha[(j, self.index)] * i,
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(v))
    }
}

/// `y(x) = g(x) + phi_i(x) (kappa_i - C_i[g])` for one independent variable.
#[derive(Clone, Debug, PartialEq)]
pub struct UnivariateCE {
    pub constraints: Vec<Constraint>,
    pub switching: SwitchingSet,
    /// Index of the independent variable this expression governs.
    pub dim: usize,
}

impl UnivariateCE {
    /// Builds with the given supports, or monomials `1, x, ...` when `None`.
    pub fn build(constraints: Vec<Constraint>, supports: Option<SupportBasis>) -> Result<Self, ConstraintError> {
        let supports = supports.unwrap_or_else(|| SupportBasis::monomials(constraints.len()));
        let ops: Vec<&ConstraintOperator> = constraints.iter().map(|c| &c.op).collect();
        let switching = SwitchingSet::build(&ops, &[], supports)?;
        Ok(UnivariateCE { constraints, switching, dim: 0 })
    }

    pub fn kappas(&self, resolver: Option<&dyn ComponentResolver>) -> Result<Vec<f64>, ConstraintError> {
        self.constraints.iter().map(|c| c.kappa_value(resolver)).collect()
    }

    /// `d`-th derivative of `y(x, g)`.
    pub fn evaluate(
        &self,
        g: &dyn Univariate,
        x: f64,
        d: usize,
        resolver: Option<&dyn ComponentResolver>,
    ) -> Result<f64, ConstraintError> {
        let kappas = self.kappas(resolver)?;
        let phi = self.switching.phi(x, d)?;
        let mut y = g.deriv(x, d)?;
        for (i, c) in self.constraints.iter().enumerate() {
            y += phi[i] * projection_value(&c.op, kappas[i], g)?;
        }
        Ok(y)
    }

    /// Affine form `y^(d)(x) = row . xi + offset` for `g = h . xi`.
    pub fn affine(
        &self,
        basis: &dyn FreeFunction,
        x: f64,
        d: usize,
        resolver: Option<&dyn ComponentResolver>,
    ) -> Result<(Vec<f64>, f64), ConstraintError> {
        let kappas = self.kappas(resolver)?;
        let phi = self.switching.phi(x, d)?;
        let mut row = vec![0.0; basis.len()];
        basis.add_row(&[x], &[d], 1.0, &mut row);
        let mut offset = 0.0;
        for (i, c) in self.constraints.iter().enumerate() {
            offset += phi[i] * kappas[i];
            let ci = apply_operator_row(&c.op, basis);
            for (r, v) in row.iter_mut().zip(ci) {
                *r -= phi[i] * v;
            }
        }
        Ok((row, offset))
    }
}

/// `rho = kappa - C[g]`.
pub fn projection_value(op: &ConstraintOperator, kappa: f64, g: &dyn Univariate) -> Result<f64, EvalError> {
    Ok(kappa - apply_operator(op, g)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    fn poly(c: Vec<f64>) -> FnUnivariate<impl Fn(f64, usize) -> f64> {
        FnUnivariate(move |x: f64, d: usize| {
            let mut v = 0.0;
            for (p, &a) in c.iter().enumerate() {
                if p >= d {
                    let fall: f64 = (p - d + 1..=p).map(|k| k as f64).product();
                    v += a * fall * x.powi((p - d) as i32);
                }
            }
            v
        })
    }

    fn point_example() -> Vec<Constraint> {
        vec![
            Constraint::new(ConstraintOperator::point(0.0), 1.0),
            Constraint::new(ConstraintOperator::deriv(1, 1.0), 2.0),
            Constraint::new(ConstraintOperator::point(2.0), 3.0),
        ]
    }

    fn assert_mat(a: &DMatrix<f64>, b: &[&[f64]], tol: f64) {
        for (i, row) in b.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((a[(i, j)] - v).abs() <= tol, "({i},{j}): {} vs {v}", a[(i, j)]);
            }
        }
    }

    #[test]
    fn operator_examples() {
        let op = ConstraintOperator::new(vec![
            EvalSpec::Point { order: 0, at: 2.0, coeff: 2.0 },
            EvalSpec::Point { order: 2, at: 0.0, coeff: PI },
        ]);
        let sq = poly(vec![0.0, 0.0, 1.0]);
        assert!((apply_operator(&op, &sq).unwrap() - (8.0 + 2.0 * PI)).abs() < 1e-14);
        assert!((projection_value(&op, 3.0, &sq).unwrap() - (3.0 - 8.0 - 2.0 * PI)).abs() < 1e-14);
        let one = poly(vec![1.0]);
        assert!((apply_operator(&ConstraintOperator::integral(-2.0, 3.0), &one).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn point_example_support_matrix_and_alpha() {
        let cs = point_example();
        let ops: Vec<_> = cs.iter().map(|c| &c.op).collect();
        let sup = SupportBasis::from_powers(&[0, 2, 3]);
        let s = support_matrix(&ops, &sup).unwrap();
        assert_mat(&s, &[&[1.0, 0.0, 0.0], &[0.0, 2.0, 3.0], &[1.0, 4.0, 8.0]], 0.0);
        let a = solve_switching(&s).unwrap();
        assert_mat(&a, &[&[1.0, 0.0, 0.0], &[0.75, 2.0, -0.75], &[-0.5, -1.0, 0.5]], 1e-14);

        let bad = support_matrix(&ops, &SupportBasis::monomials(3)).unwrap();
        assert_mat(&bad, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 2.0], &[1.0, 2.0, 4.0]], 0.0);
        assert!(matches!(solve_switching(&bad), Err(ConstraintError::SingularSupport { .. })));
    }

    #[test]
    fn point_example_switching_functions() {
        let ce = UnivariateCE::build(point_example(), Some(SupportBasis::from_powers(&[0, 2, 3]))).unwrap();
        for &x in &[-0.7, 0.0, 0.4, 1.3, 2.5] {
            let phi = ce.switching.phi(x, 0).unwrap();
            let expect = [
                (-2.0 * x * x * x + 3.0 * x * x + 4.0) / 4.0,
                -x * x * x + 2.0 * x * x,
                (2.0 * x * x * x - 3.0 * x * x) / 4.0,
            ];
            for i in 0..3 {
                assert!((phi[i] - expect[i]).abs() < 1e-13);
            }
        }
        let zero = poly(vec![0.0]);
        assert!((ce.evaluate(&zero, 0.0, 0, None).unwrap() - 1.0).abs() < 1e-14);
        assert!((ce.evaluate(&zero, 1.0, 1, None).unwrap() - 2.0).abs() < 1e-14);
        assert!((ce.evaluate(&zero, 2.0, 0, None).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn integral_example() {
        let cs = vec![
            Constraint::new(ConstraintOperator::integral(-2.0, 3.0), 5.0),
            Constraint::new(ConstraintOperator::integral(0.0, 2.0).scaled(3.0), 2.0),
        ];
        let ops: Vec<_> = cs.iter().map(|c| &c.op).collect();
        let s = support_matrix(&ops, &SupportBasis::monomials(2)).unwrap();
        assert_mat(&s, &[&[5.0, 2.5], &[6.0, 6.0]], 1e-14);
        let a = solve_switching(&s).unwrap();
        // Columns are the coefficients of phi_1 = (2 - 2x)/5 and phi_2 = (2x - 1)/6.
        assert_mat(&a, &[&[0.4, -1.0 / 6.0], &[-0.4, 1.0 / 3.0]], 1e-14);
        assert!((&s * &a - DMatrix::identity(2, 2)).amax() < 1e-15);
        let ce = UnivariateCE::build(cs, None).unwrap();
        let phi = ce.switching.phi(0.8, 0).unwrap();
        assert!((phi[0] - (2.0 - 1.6) / 5.0).abs() < 1e-14);
        assert!((phi[1] - (1.6 - 1.0) / 6.0).abs() < 1e-14);
    }

    #[test]
    fn single_constraint_shifts_free_function() {
        let ce = UnivariateCE::build(vec![Constraint::new(ConstraintOperator::point(0.0), 4.0)], None).unwrap();
        let g = poly(vec![1.0, 2.0, 3.0]);
        for &x in &[0.0, 0.5, -1.2] {
            let y = ce.evaluate(&g, x, 0, None).unwrap();
            assert!((y - (g.deriv(x, 0).unwrap() + 4.0 - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_support_matrix() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(solve_switching(&id).unwrap(), id);
    }

    #[test]
    fn projection_idempotence_and_null_space() {
        let ce = UnivariateCE::build(point_example(), Some(SupportBasis::from_powers(&[0, 2, 3]))).unwrap();
        let g0 = poly(vec![0.3, -1.0, 0.5, 2.0, -0.25]);
        let y1 = FnUnivariate(|x: f64, d: usize| ce.evaluate(&g0, x, d, None).unwrap());
        for i in 0..20 {
            let x = -1.0 + 0.17 * i as f64;
            let a = ce.evaluate(&y1, x, 0, None).unwrap();
            let b = ce.evaluate(&g0, x, 0, None).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        // adding span of the supports to g leaves y unchanged
        let shifted = poly(vec![0.3 + 1.7, -1.0, 0.5 - 0.4, 2.0 + 2.2, -0.25]);
        for i in 0..20 {
            let x = -1.0 + 0.17 * i as f64;
            let a = ce.evaluate(&shifted, x, 0, None).unwrap();
            let b = ce.evaluate(&g0, x, 0, None).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    struct OtherIsTwo;
    impl ComponentResolver for OtherIsTwo {
        fn apply(&self, variable: &str, op: &ConstraintOperator) -> Result<f64, EvalError> {
            assert_eq!(variable, "v");
            Ok(2.0 * op.terms.iter().map(EvalSpec::coeff).sum::<f64>())
        }
    }

    #[test]
    fn component_kappa() {
        let c = Constraint {
            op: ConstraintOperator::point(0.0),
            kappa: Kappa::Component {
                rhs: parse("5").unwrap(),
                others: vec![ComponentTerm { variable: "v".into(), op: ConstraintOperator::point(0.0) }],
            },
        };
        assert_eq!(c.kappa_value(Some(&OtherIsTwo)).unwrap(), 3.0);
        assert!(matches!(c.kappa_value(None), Err(ConstraintError::UnresolvedComponent(_))));
        let g = poly(vec![0.5, 1.0]);
        let ce = UnivariateCE::build(vec![c], None).unwrap();
        let y = ce.evaluate(&g, 0.0, 0, Some(&OtherIsTwo)).unwrap();
        assert!((y - 3.0).abs() < 1e-15);
        let rho = projection_value(&ce.constraints[0].op, 3.0, &g).unwrap();
        assert!((rho - 2.5).abs() < 1e-15);
    }

    #[test]
    fn affine_form_matches_direct_evaluation() {
        use crate::basis::{DomainMap, FamilyKind, TensorBasis, TensorDim};
        let ce = UnivariateCE::build(point_example(), Some(SupportBasis::from_powers(&[0, 2, 3]))).unwrap();
        let map = DomainMap::native(FamilyKind::Legendre, (-1.0, 3.0)).unwrap();
        let basis = TensorBasis::new(vec![TensorDim::new(FamilyKind::Legendre, map, 7)], None).unwrap();
        let xi: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let g = FnUnivariate(|x: f64, d: usize| basis.eval(&[x], &[d], &xi));
        for d in 0..3 {
            for &x in &[-0.5, 0.9, 2.2] {
                let (row, off) = ce.affine(&basis, x, d, None).unwrap();
                let via_affine: f64 = row.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>() + off;
                let direct = ce.evaluate(&g, x, d, None).unwrap();
                assert!((via_affine - direct).abs() < 1e-11, "d={d} x={x}");
            }
        }
    }

    #[test]
    fn expression_operand() {
        let f = ExprUnivariate::new(parse("x^3").unwrap(), "x");
        let op = ConstraintOperator::deriv(2, 2.0).with(EvalSpec::integral(0.0, 1.0));
        assert!((apply_operator(&op, &f).unwrap() - (12.0 + 0.25)).abs() < 1e-14);
    }
}
