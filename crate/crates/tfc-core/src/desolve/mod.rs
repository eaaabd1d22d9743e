//! Differential equations solved by least squares over constrained expressions.
//!
//! Every dependent variable is a constrained expression over a linear free
//! function, so each partial derivative at a collocation point is an affine
//! function of the coefficients. Residuals are expressions in the
//! independent variables, the extra unknowns, and partial derivatives
//! written as `u`, `u_x`, `u_xxy`: the dependent name, an underscore, and one
//! independent-variable letter per differentiation.

mod balloon;
mod clamp;
pub mod problems;
mod split;

pub use balloon::{
    balloon_problem, shoot_balloon, BalloonAtmosphere, BalloonConstants, ShootingShape, BALLOON_ATMOSPHERE,
};
pub use clamp::{clamp, clamp_branch, clamp_scalar, ClampBranch, ClampError, InequalityClamp};
pub use split::{solve_split, split_problem, SplitDomain, SplitProblem};

use crate::basis::{
    cgl_nodes, uniform_nodes, Activation, BasisError, DomainMap, ElmBasis, FamilyKind, FreeBasis, FreeFunction,
    TensorBasis, TensorDim,
};
use crate::constraint::SupportBasis;
use crate::expr::{CompiledExpr, EvalError, Expr};
use crate::multivar::{
    Affine, BasisLeaf, CeOptions, DependentVar, EvalCtx, Field, MultivariateCE, MvConstraint, MvError, System,
};
use crate::solvers::{lstsq, nlls, LsqError, LsqMethod, NllsConfig, NllsError, Termination};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeError {
    #[error("residual {index} is not affine in the dependent variables: {expr}")]
    NonAffineResidual { index: usize, expr: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("independent variable names must be single letters, got `{0}`")]
    BadVariableName(String),
    #[error("dependent variable name `{0}` must be non-empty and free of '_'")]
    BadDependentName(String),
    #[error("name `{0}` is declared twice")]
    DuplicateName(String),
    #[error("{what} has {got} entries, expected {expected}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Multivar(#[from] MvError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lsq(#[from] LsqError),
    #[error(transparent)]
    Clamp(#[from] ClampError),
    #[error(transparent)]
    Nlls(Box<NllsError<DeError>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndependentVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl IndependentVar {
    pub fn new(name: &str, lower: f64, upper: f64) -> Self {
        IndependentVar { name: name.to_string(), lower, upper }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GridKind {
    /// Chebyshev–Gauss–Lobatto nodes mapped onto each interval.
    #[default]
    Cgl,
    Uniform,
}

/// Tensor-product collocation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub points: Vec<usize>,
    pub kind: GridKind,
}

/// Which tensor-basis indices to drop per dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum RemovalRule {
    /// Drop the leading polynomials spanning the monomial supports of each
    /// constrained dimension.
    #[default]
    Auto,
    None,
    PerDim(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum FreeSpec {
    Tensor { family: FamilyKind, degree: usize, total_degree: Option<usize>, removal: RemovalRule },
    Elm { activation: Activation, neurons: usize, seed: u64, range: (f64, f64) },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependentSpec {
    pub name: String,
    pub constraints: Vec<MvConstraint>,
    /// Support functions per dimension; monomials where absent.
    pub supports: HashMap<usize, SupportBasis>,
    pub order: Option<Vec<usize>>,
    pub free: FreeSpec,
    /// Analytic solution in the independent variables and extras.
    pub exact: Option<Expr>,
}

impl DependentSpec {
    pub fn new(name: &str, constraints: Vec<MvConstraint>, free: FreeSpec) -> Self {
        DependentSpec {
            name: name.to_string(),
            constraints,
            supports: HashMap::new(),
            order: None,
            free,
            exact: None,
        }
    }

    pub fn with_exact(mut self, exact: Expr) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn with_supports(mut self, dim: usize, supports: SupportBasis) -> Self {
        self.supports.insert(dim, supports);
        self
    }
}

/// One residual expression, collocated on the training grid with some
/// dimensions optionally pinned to fixed values.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub expr: Expr,
    pub fixed: Vec<(usize, f64)>,
}

impl Residual {
    pub fn new(expr: Expr) -> Self {
        Residual { expr, fixed: vec![] }
    }

    pub fn pinned(expr: Expr, fixed: Vec<(usize, f64)>) -> Self {
        Residual { expr, fixed }
    }
}

/// Scalar unknown solved alongside the coefficients, optionally held
/// between constant bounds by a clamp.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtraUnknown {
    pub name: String,
    pub initial: f64,
    pub bounds: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: LsqMethod,
    pub tol: f64,
    pub max_iter: usize,
    /// Use Gauss–Newton even when the problem is linear.
    pub force_nonlinear: bool,
    pub check_jacobian: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let n = NllsConfig::default();
        SolverConfig { method: n.method, tol: n.tol, max_iter: n.max_iter, force_nonlinear: false, check_jacobian: false }
    }
}

/// A differential equation with its constraints, discretization and solver settings.
#[derive(Clone, Debug, PartialEq)]
pub struct DeProblem {
    pub id: String,
    pub vars: Vec<IndependentVar>,
    pub deps: Vec<DependentSpec>,
    pub residuals: Vec<Residual>,
    pub grid: GridSpec,
    /// Uniform test points per dimension, endpoints included.
    pub test_points: Vec<usize>,
    pub extras: Vec<ExtraUnknown>,
    pub solver: SolverConfig,
    /// Starting coefficients followed by raw extra values; zeros and the
    /// declared initial extras when absent.
    pub initial: Option<Vec<f64>>,
}

/// Samples of the solution on the test grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub problem: String,
    /// Coefficients per dependent variable.
    pub xi: Vec<(String, Vec<f64>)>,
    /// Extra unknowns after clamping.
    pub extras: Vec<(String, f64)>,
    /// Coefficients followed by raw extras, as iterated.
    pub unknowns: Vec<f64>,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub max_error: Option<f64>,
    pub mean_error: Option<f64>,
    pub wall_seconds: f64,
    pub iterations: usize,
    /// `linear` for a direct solve, otherwise the Gauss–Newton stop reason.
    pub termination: String,
    pub converged: bool,
    pub n_rows: usize,
    pub n_coefficients: usize,
    pub samples: SampleTable,
}

/// A partial derivative of a dependent variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Partial {
    dep: usize,
    alpha: Vec<usize>,
}

struct CompiledResidual {
    value: CompiledExpr,
    /// (partial index, derivative of the residual with respect to it)
    d_partials: Vec<(usize, CompiledExpr)>,
    d_extras: Vec<(usize, CompiledExpr)>,
    partials: Vec<usize>,
    affine: bool,
}

/// Residual rows on the grid, with exact Jacobians.
pub struct Discretization {
    problem: DeProblem,
    system: System,
    offsets: Vec<usize>,
    n_coef: usize,
    partials: Vec<Partial>,
    residuals: Vec<CompiledResidual>,
    /// (residual index, point)
    rows: Vec<(usize, Vec<f64>)>,
    exact: Vec<Option<CompiledExpr>>,
}

/// Nodes of one dimension.
fn nodes(kind: GridKind, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>, DeError> {
    Ok(match kind {
        GridKind::Uniform => uniform_nodes(lo, hi, n),
        GridKind::Cgl => {
            let z = cgl_nodes(n)?;
            let map = DomainMap::new((lo, hi), (-1.0, 1.0))?;
            let mut x: Vec<f64> = z.iter().map(|&z| map.to_problem(z)).collect();
            x[0] = lo;
            x[n - 1] = hi;
            x
        }
    })
}

/// Cartesian product, last dimension fastest.
fn tensor_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn build_free(spec: &DependentSpec, ce: &MultivariateCE, vars: &[IndependentVar]) -> Result<FreeBasis, DeError> {
    let intervals: Vec<(f64, f64)> = vars.iter().map(|v| (v.lower, v.upper)).collect();
    match &spec.free {
        FreeSpec::Elm { activation, neurons, seed, range } => {
            Ok(FreeBasis::Elm(ElmBasis::new(*activation, &intervals, *neurons, *seed, *range)?))
        }
        FreeSpec::Tensor { family, degree, total_degree, removal } => {
            let mut dims = Vec::with_capacity(vars.len());
            for (k, &(lo, hi)) in intervals.iter().enumerate() {
                let removed: Vec<usize> = match removal {
                    RemovalRule::None => vec![],
                    RemovalRule::PerDim(r) => r.get(k).cloned().unwrap_or_default(),
                    RemovalRule::Auto => auto_removal(*family, ce, k),
                };
                let removed: Vec<usize> = removed.into_iter().filter(|&i| i <= *degree).collect();
                // families without a finite native interval use the problem interval as is
                let map = match family.native_domain() {
                    Some(_) => DomainMap::native(*family, (lo, hi))?,
                    None => DomainMap::new((lo, hi), (lo, hi))?,
                };
                dims.push(TensorDim::new(*family, map, *degree).with_removed(removed));
            }
            Ok(FreeBasis::Tensor(TensorBasis::new(dims, *total_degree)?))
        }
    }
}

/// Leading indices spanned by monomial supports `1, x, ..., x^(k-1)`.
fn auto_removal(family: FamilyKind, ce: &MultivariateCE, dim: usize) -> Vec<usize> {
    if !family.is_polynomial() {
        return vec![];
    }
    let Some(d) = ce.dim(dim) else {
        return vec![];
    };
    match d.switching.supports.powers() {
        Some(p) if p.iter().enumerate().all(|(i, &v)| v as usize == i) => (0..p.len()).collect(),
        _ => vec![],
    }
}

fn parse_partial(name: &str, deps: &[DependentSpec], vars: &[IndependentVar]) -> Option<Partial> {
    let (dep_name, suffix) = match name.split_once('_') {
        Some((d, s)) => (d, s),
        None => (name, ""),
    };
    let dep = deps.iter().position(|d| d.name == dep_name)?;
    let mut alpha = vec![0; vars.len()];
    for c in suffix.chars() {
        let k = vars.iter().position(|v| v.name.len() == 1 && v.name.starts_with(c))?;
        alpha[k] += 1;
    }
    if !suffix.is_empty() && alpha.iter().all(|&a| a == 0) {
        return None;
    }
    Some(Partial { dep, alpha })
}

impl Discretization {
    pub fn new(problem: &DeProblem) -> Result<Self, DeError> {
        let problem = problem.clone();
        let n = problem.vars.len();
        let mut seen: Vec<&str> = Vec::new();
        for v in &problem.vars {
            if v.name.chars().count() != 1 || !v.name.chars().all(|c| c.is_ascii_alphabetic()) {
                return Err(DeError::BadVariableName(v.name.clone()));
            }
            if !(v.lower < v.upper) {
                return Err(DeError::Invalid(format!("interval of `{}` is empty", v.name)));
            }
        }
        for d in &problem.deps {
            if d.name.is_empty() || d.name.contains('_') {
                return Err(DeError::BadDependentName(d.name.clone()));
            }
        }
        for name in problem
            .vars
            .iter()
            .map(|v| v.name.as_str())
            .chain(problem.deps.iter().map(|d| d.name.as_str()))
            .chain(problem.extras.iter().map(|e| e.name.as_str()))
        {
            if seen.contains(&name) {
                return Err(DeError::DuplicateName(name.to_string()));
            }
            seen.push(name);
        }
        for (what, got) in [("grid points", problem.grid.points.len()), ("test points", problem.test_points.len())] {
            if got != n {
                return Err(DeError::Shape { what, expected: n, got });
            }
        }
        if problem.deps.is_empty() || problem.residuals.is_empty() {
            return Err(DeError::Invalid("at least one dependent variable and one residual are required".into()));
        }
        for (i, e) in problem.extras.iter().enumerate() {
            if let Some((lo, hi)) = e.bounds {
                if lo > hi {
                    return Err(ClampError::InconsistentBounds { x: i as f64, lower: lo, upper: hi }.into());
                }
            }
        }

        let var_names: Vec<&str> = problem.vars.iter().map(|v| v.name.as_str()).collect();
        let extra_names: Vec<String> = problem.extras.iter().map(|e| e.name.clone()).collect();
        let mut dep_vars = Vec::with_capacity(problem.deps.len());
        let mut offsets = Vec::with_capacity(problem.deps.len());
        let mut n_coef = 0;
        for spec in &problem.deps {
            let options = CeOptions {
                supports: spec.supports.clone(),
                order: spec.order.clone(),
                extra_names: extra_names.clone(),
            };
            let ce = MultivariateCE::build(&var_names, spec.constraints.clone(), options)?;
            let basis = build_free(spec, &ce, &problem.vars)?;
            let len = basis.len();
            offsets.push(n_coef);
            let leaf = BasisLeaf { basis: Arc::new(basis), offset: n_coef };
            n_coef += len;
            dep_vars.push(DependentVar { name: spec.name.clone(), ce, leaf: Box::new(leaf) });
        }
        let system = System::new(dep_vars)?;

        // symbols: independent variables, extras, then partials
        let mut partials: Vec<Partial> = Vec::new();
        let mut partial_names: Vec<String> = Vec::new();
        let is_base = |s: &str| var_names.contains(&s) || extra_names.iter().any(|e| e == s);
        for r in &problem.residuals {
            for name in r.expr.variables() {
                if is_base(&name) || partial_names.contains(&name) {
                    continue;
                }
                let p = parse_partial(&name, &problem.deps, &problem.vars)
                    .ok_or_else(|| DeError::UnknownSymbol(name.clone()))?;
                partials.push(p);
                partial_names.push(name);
            }
            for &(k, _) in &r.fixed {
                if k >= n {
                    return Err(DeError::Invalid(format!("pinned dimension {k} out of range")));
                }
            }
        }
        let slots: Vec<&str> = var_names
            .iter()
            .copied()
            .chain(extra_names.iter().map(String::as_str))
            .chain(partial_names.iter().map(String::as_str))
            .collect();
        let mut residuals = Vec::with_capacity(problem.residuals.len());
        for r in &problem.residuals {
            let used: Vec<usize> = (0..partials.len()).filter(|&i| r.expr.contains_var(&partial_names[i])).collect();
            let affine = r.expr.is_affine_in(&|v| partial_names.iter().any(|p| p == v));
            let mut d_partials = Vec::new();
            for &i in &used {
                d_partials.push((i, r.expr.differentiate(&partial_names[i], 1).compile(&slots)?));
            }
            let mut d_extras = Vec::new();
            for (i, e) in extra_names.iter().enumerate() {
                if r.expr.contains_var(e) {
                    d_extras.push((i, r.expr.differentiate(e, 1).compile(&slots)?));
                }
            }
            residuals.push(CompiledResidual { value: r.expr.compile(&slots)?, d_partials, d_extras, partials: used, affine });
        }

        let axes: Vec<Vec<f64>> = problem
            .vars
            .iter()
            .zip(&problem.grid.points)
            .map(|(v, &n)| nodes(problem.grid.kind, n, v.lower, v.upper))
            .collect::<Result<_, _>>()?;
        let mut rows = Vec::new();
        for (i, r) in problem.residuals.iter().enumerate() {
            let mut axes = axes.clone();
            for &(k, v) in &r.fixed {
                axes[k] = vec![v];
            }
            rows.extend(tensor_points(&axes).into_iter().map(|p| (i, p)));
        }

        let exact_slots: Vec<&str> = var_names.iter().copied().chain(extra_names.iter().map(String::as_str)).collect();
        let exact = problem
            .deps
            .iter()
            .map(|d| d.exact.as_ref().map(|e| e.compile(&exact_slots)).transpose())
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Discretization { problem, system, offsets, n_coef, partials, residuals, rows, exact })
    }

    pub fn problem(&self) -> &DeProblem {
        &self.problem
    }

    pub fn n_coefficients(&self) -> usize {
        self.n_coef
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_coef + self.problem.extras.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Collocation points of each row.
    pub fn row_points(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.iter().map(|(_, p)| p.as_slice())
    }

    /// Coefficient range of dependent variable `dep`.
    pub fn coefficient_range(&self, dep: usize) -> std::ops::Range<usize> {
        let end = self.offsets.get(dep + 1).copied().unwrap_or(self.n_coef);
        self.offsets[dep]..end
    }

    /// Whether every residual is affine in the partials and no extras are declared.
    pub fn is_linear(&self) -> bool {
        self.problem.extras.is_empty() && self.residuals.iter().all(|r| r.affine)
    }

    pub fn initial_guess(&self) -> Result<DVector<f64>, DeError> {
        match &self.problem.initial {
            Some(v) if v.len() != self.n_unknowns() => {
                Err(DeError::Shape { what: "initial guess", expected: self.n_unknowns(), got: v.len() })
            }
            Some(v) => Ok(DVector::from_column_slice(v)),
            None => {
                let mut v = DVector::zeros(self.n_unknowns());
                for (i, e) in self.problem.extras.iter().enumerate() {
                    v[self.n_coef + i] = e.initial;
                }
                Ok(v)
            }
        }
    }

    /// Clamped extras and their slopes with respect to the raw unknowns.
    pub fn effective_extras(&self, unknowns: &[f64]) -> Result<(Vec<f64>, Vec<f64>), DeError> {
        let raw = &unknowns[self.n_coef..];
        let mut values = Vec::with_capacity(raw.len());
        let mut slopes = Vec::with_capacity(raw.len());
        for (e, &v) in self.problem.extras.iter().zip(raw) {
            let (x, s) = match e.bounds {
                Some((lo, hi)) => clamp_scalar(v, lo, hi)?,
                None => (v, 1.0),
            };
            values.push(x);
            slopes.push(s);
        }
        Ok((values, slopes))
    }

    /// Affine form of a partial of dependent variable `dep` at `x`, with
    /// `doff` taken with respect to the clamped extras.
    pub fn affine(&self, dep: usize, x: &[f64], alpha: &[usize], extras: &[f64]) -> Result<Affine, DeError> {
        let mut out = Affine::zeros(self.n_coef, extras.len());
        let ctx = EvalCtx::with_vars(extras, &self.system);
        self.system.vars[dep].eval_into(x, alpha, 1.0, &mut out, &ctx)?;
        Ok(out)
    }

    /// Partial of dependent variable `dep` at `x` for the given unknowns.
    pub fn value(&self, dep: usize, x: &[f64], alpha: &[usize], unknowns: &[f64]) -> Result<f64, DeError> {
        self.check_len(unknowns)?;
        let (extras, _) = self.effective_extras(unknowns)?;
        Ok(self.affine(dep, x, alpha, &extras)?.value(&unknowns[..self.n_coef]))
    }

    fn check_len(&self, unknowns: &[f64]) -> Result<(), DeError> {
        if unknowns.len() != self.n_unknowns() {
            return Err(DeError::Shape { what: "unknown vector", expected: self.n_unknowns(), got: unknowns.len() });
        }
        Ok(())
    }

    /// Residual value and, when asked, its gradient row over all unknowns.
    fn row(
        &self,
        index: usize,
        unknowns: &[f64],
        extras: &[f64],
        slopes: &[f64],
        gradient: bool,
    ) -> Result<(f64, Option<Vec<f64>>), DeError> {
        let (r, x) = &self.rows[index];
        let res = &self.residuals[*r];
        let n_extra = extras.len();
        let base = x.len() + n_extra;
        let mut slots = vec![0.0; base + self.partials.len()];
        slots[..x.len()].copy_from_slice(x);
        slots[x.len()..base].copy_from_slice(extras);
        let xi = &unknowns[..self.n_coef];
        let mut forms = Vec::with_capacity(res.partials.len());
        for &p in &res.partials {
            let part = &self.partials[p];
            let a = self.affine(part.dep, x, &part.alpha, extras)?;
            slots[base + p] = a.value(xi);
            forms.push((p, a));
        }
        let value = res.value.eval(&slots)?;
        if !gradient {
            return Ok((value, None));
        }
        let mut grad = vec![0.0; self.n_coef + n_extra];
        for ((p, form), (q, d)) in forms.iter().zip(&res.d_partials) {
            debug_assert_eq!(p, q);
            let c = d.eval(&slots)?;
            if c == 0.0 {
                continue;
            }
            for (g, v) in grad.iter_mut().zip(&form.row) {
                *g += c * v;
            }
            for (e, v) in form.doff.iter().enumerate() {
                grad[self.n_coef + e] += c * v;
            }
        }
        for (e, d) in &res.d_extras {
            grad[self.n_coef + e] += d.eval(&slots)?;
        }
        for (e, s) in slopes.iter().enumerate() {
            grad[self.n_coef + e] *= s;
        }
        Ok((value, Some(grad)))
    }

    /// Residual vector at the unknowns.
    pub fn residual(&self, unknowns: &DVector<f64>) -> Result<DVector<f64>, DeError> {
        self.check_len(unknowns.as_slice())?;
        let (extras, slopes) = self.effective_extras(unknowns.as_slice())?;
        let values: Vec<f64> = (0..self.rows.len())
            .into_par_iter()
            .map(|i| self.row(i, unknowns.as_slice(), &extras, &slopes, false).map(|r| r.0))
            .collect::<Result<_, _>>()?;
        Ok(DVector::from_vec(values))
    }

    /// Residual vector and Jacobian at the unknowns.
    pub fn residual_and_jacobian(&self, unknowns: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), DeError> {
        self.check_len(unknowns.as_slice())?;
        let (extras, slopes) = self.effective_extras(unknowns.as_slice())?;
        let rows: Vec<(f64, Vec<f64>)> = (0..self.rows.len())
            .into_par_iter()
            .map(|i| {
                self.row(i, unknowns.as_slice(), &extras, &slopes, true)
                    .map(|(v, g)| (v, g.expect("gradient requested")))
            })
            .collect::<Result<_, _>>()?;
        let n = self.n_unknowns();
        let mut j = DMatrix::zeros(rows.len(), n);
        let mut l = DVector::zeros(rows.len());
        for (i, (v, g)) in rows.into_iter().enumerate() {
            l[i] = v;
            for (k, gv) in g.into_iter().enumerate() {
                j[(i, k)] = gv;
            }
        }
        Ok((l, j))
    }

    pub fn jacobian(&self, unknowns: &DVector<f64>) -> Result<DMatrix<f64>, DeError> {
        Ok(self.residual_and_jacobian(unknowns)?.1)
    }

    /// `A xi = b` for a linear problem.
    pub fn linear_system(&self) -> Result<(DMatrix<f64>, DVector<f64>), DeError> {
        if let Some(index) = self.residuals.iter().position(|r| !r.affine) {
            return Err(DeError::NonAffineResidual { index, expr: self.problem.residuals[index].expr.to_string() });
        }
        if !self.problem.extras.is_empty() {
            return Err(DeError::Invalid("extra unknowns need the nonlinear path".into()));
        }
        let (l, a) = self.residual_and_jacobian(&DVector::zeros(self.n_coef))?;
        Ok((a, -l))
    }

    /// Solution samples and errors on the uniform test grid.
    fn test_samples(&self, unknowns: &[f64]) -> Result<(SampleTable, Option<(f64, f64)>), DeError> {
        let (extras, _) = self.effective_extras(unknowns)?;
        let axes: Vec<Vec<f64>> = self
            .problem
            .vars
            .iter()
            .zip(&self.problem.test_points)
            .map(|(v, &n)| uniform_nodes(v.lower, v.upper, n))
            .collect();
        let points = tensor_points(&axes);
        let mut columns: Vec<String> = self.problem.vars.iter().map(|v| v.name.clone()).collect();
        for (d, spec) in self.problem.deps.iter().enumerate() {
            columns.push(spec.name.clone());
            if self.exact[d].is_some() {
                columns.push(format!("{}_true", spec.name));
                columns.push(format!("{}_abs_error", spec.name));
            }
        }
        let zero = vec![0; self.problem.vars.len()];
        let xi = &unknowns[..self.n_coef];
        let rows: Vec<Vec<f64>> = points
            .par_iter()
            .map(|x| {
                let mut row = x.clone();
                let mut slots = x.clone();
                slots.extend_from_slice(&extras);
                for d in 0..self.problem.deps.len() {
                    let u = self.affine(d, x, &zero, &extras)?.value(xi);
                    row.push(u);
                    if let Some(e) = &self.exact[d] {
                        let t = e.eval(&slots)?;
                        row.push(t);
                        row.push((u - t).abs());
                    }
                }
                Ok(row)
            })
            .collect::<Result<_, DeError>>()?;
        let error_cols: Vec<usize> =
            columns.iter().enumerate().filter(|(_, c)| c.ends_with("_abs_error")).map(|(i, _)| i).collect();
        let errors = if error_cols.is_empty() {
            None
        } else {
            let all: Vec<f64> = rows.iter().flat_map(|r| error_cols.iter().map(move |&c| r[c])).collect();
            let max = all.iter().cloned().fold(0.0, f64::max);
            Some((max, all.iter().sum::<f64>() / all.len() as f64))
        };
        Ok((SampleTable { columns, rows }, errors))
    }

    fn report(
        &self,
        unknowns: DVector<f64>,
        started: Instant,
        iterations: usize,
        termination: &str,
        converged: bool,
    ) -> Result<SolveReport, DeError> {
        let l = self.residual(&unknowns)?;
        let abs: Vec<f64> = l.iter().map(|v| v.abs()).collect();
        let (samples, errors) = self.test_samples(unknowns.as_slice())?;
        let (extras, _) = self.effective_extras(unknowns.as_slice())?;
        let wall_seconds = started.elapsed().as_secs_f64();
        Ok(SolveReport {
            problem: self.problem.id.clone(),
            xi: self
                .problem
                .deps
                .iter()
                .enumerate()
                .map(|(d, s)| (s.name.clone(), unknowns.as_slice()[self.coefficient_range(d)].to_vec()))
                .collect(),
            extras: self.problem.extras.iter().map(|e| e.name.clone()).zip(extras).collect(),
            unknowns: unknowns.as_slice().to_vec(),
            max_residual: abs.iter().cloned().fold(0.0, f64::max),
            mean_residual: abs.iter().sum::<f64>() / abs.len().max(1) as f64,
            max_error: errors.map(|e| e.0),
            mean_error: errors.map(|e| e.1),
            wall_seconds,
            iterations,
            termination: termination.to_string(),
            converged,
            n_rows: self.n_rows(),
            n_coefficients: self.n_coef,
            samples,
        })
    }

    /// Solves with a direct least-squares step when linear, Gauss–Newton otherwise.
    pub fn solve(&self) -> Result<SolveReport, DeError> {
        let started = Instant::now();
        let cfg = &self.problem.solver;
        if self.is_linear() && !cfg.force_nonlinear {
            let (a, b) = self.linear_system()?;
            let xi = lstsq(&a, &b, cfg.method)?;
            return self.report(xi, started, 1, "linear", true);
        }
        let config = NllsConfig {
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            method: cfg.method,
            clamp: None,
            check_jacobian: cfg.check_jacobian,
        };
        let result = nlls(|v| self.residual(v), |v| self.jacobian(v), self.initial_guess()?, &config)
            .map_err(|e| DeError::Nlls(Box::new(e)))?;
        let converged = result.termination != Termination::MaxIterations;
        self.report(result.xi, started, result.iterations, result.termination.name(), converged)
    }
}

/// Matrix and right-hand side of a linear problem; columns are ordered by
/// dependent variable, then by retained basis function.
pub fn assemble_linear(problem: &DeProblem) -> Result<(DMatrix<f64>, DVector<f64>), DeError> {
    Discretization::new(problem)?.linear_system()
}

/// Residual and exact Jacobian as functions of the unknowns.
pub fn assemble_nonlinear(problem: &DeProblem) -> Result<Discretization, DeError> {
    Discretization::new(problem)
}

pub fn solve(problem: &DeProblem) -> Result<SolveReport, DeError> {
    Discretization::new(problem)?.solve()
}
