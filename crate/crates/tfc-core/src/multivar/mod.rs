//! Multivariate constrained expressions.
//!
//! The expression for one dependent variable is built by nesting univariate
//! expressions, one per independent variable, in a processing order:
//!
//! ```text
//! U_d(f)(x) = f(x) + sum_j phi_j(x_d) (kappa_j(x without x_d) - C_j[f](x without x_d))
//! u = U_{p_n}( ... U_{p_1}(g))
//! ```
//!
//! Every evaluation is accumulated into an [`Affine`] value
//! `row . xi + off(extras)`, so the expression is never expanded symbolically
//! and derivatives of any order follow from differentiating each piece.

mod graph;
mod order;
mod tensor;

pub use graph::{
    check_intersection_validity, enumerate_component_graphs, is_nilpotent, ComponentGraph, IntersectionConflict,
    IntersectionReport, Location, SystemConstraint,
};
pub use order::{order_dimensions, ProcessingOrder};
pub use tensor::TensorForm;

use crate::basis::FreeFunction;
use crate::constraint::{
    ConstraintError, ConstraintOperator, EvalSpec, SupportBasis, SwitchingSet,
};
use crate::expr::{CompiledExpr, EvalError, Expr};
use crate::quad;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MvError {
    #[error("integral constraints make dimensions {0:?} depend on one another")]
    CyclicIntegralDependency(Vec<usize>),
    #[error("constraint {index} on dimension {dim} mixes terms with and without an integral over dimension {over}")]
    MixedIntegralConstraint { dim: usize, index: usize, over: usize },
    #[error("constraint value on dimension {dim} depends on its own variable `{var}`")]
    KappaDependsOnOwnVariable { dim: usize, var: String },
    #[error("dimension index {0} out of range")]
    BadDimension(usize),
    #[error("unknown dependent variable `{0}`")]
    UnknownVariable(String),
    #[error("component constraints form a cycle through {0:?}")]
    CyclicComponents(Vec<String>),
    #[error("processing order {0:?} is not a permutation consistent with the integral constraints")]
    InvalidOrder(Vec<usize>),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Integration over a dimension other than the constraint's own.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForeignIntegral {
    pub dim: usize,
    pub lower: f64,
    pub upper: f64,
}

impl ForeignIntegral {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// One term of a multivariate constraint operator: a point derivative or
/// integral in the constraint's own dimension, then integrals over others.
#[derive(Clone, Debug, PartialEq)]
pub struct MvTerm {
    pub spec: EvalSpec,
    pub foreign: Vec<ForeignIntegral>,
}

impl MvTerm {
    pub fn new(spec: EvalSpec) -> Self {
        MvTerm { spec, foreign: vec![] }
    }

    pub fn integrating(mut self, dim: usize, lower: f64, upper: f64) -> Self {
        self.foreign.push(ForeignIntegral { dim, lower, upper });
        self
    }
}

/// Right-hand side of a multivariate constraint.
#[derive(Clone, Debug, PartialEq)]
pub enum MvKappa {
    /// Expression over the other independent variables and the extra unknowns.
    Expr(Expr),
    /// `rhs - sum over others of terms[v]`.
    Component { rhs: Expr, others: Vec<(String, Vec<MvTerm>)> },
}

/// A linear constraint on one independent variable of one dependent variable.
#[derive(Clone, Debug, PartialEq)]
pub struct MvConstraint {
    pub dim: usize,
    pub terms: Vec<MvTerm>,
    pub kappa: MvKappa,
}

impl MvConstraint {
    pub fn new(dim: usize, terms: Vec<MvTerm>, kappa: Expr) -> Self {
        MvConstraint { dim, terms, kappa: MvKappa::Expr(kappa) }
    }

    /// `u(.., at, ..) = kappa` on dimension `dim`.
    pub fn point(dim: usize, at: f64, kappa: Expr) -> Self {
        MvConstraint::new(dim, vec![MvTerm::new(EvalSpec::point(at))], kappa)
    }

    /// `d^order u / dx_dim^order (.., at, ..) = kappa`.
    pub fn deriv(dim: usize, order: usize, at: f64, kappa: Expr) -> Self {
        MvConstraint::new(dim, vec![MvTerm::new(EvalSpec::deriv(order, at))], kappa)
    }

    /// Derivative `order` at `a` equal to that at `b`.
    pub fn relative(dim: usize, order: usize, a: f64, b: f64) -> Self {
        MvConstraint::new(
            dim,
            vec![
                MvTerm::new(EvalSpec::Point { order, at: a, coeff: 1.0 }),
                MvTerm::new(EvalSpec::Point { order, at: b, coeff: -1.0 }),
            ],
            Expr::num(0.0),
        )
    }

    /// Dimensions integrated over by any term.
    pub fn foreign_dims(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.iter().flat_map(|t| t.foreign.iter().map(|f| f.dim)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Operator this constraint applies to functions of its own variable only.
    pub fn native_operator(&self) -> ConstraintOperator {
        ConstraintOperator::new(
            self.terms
                .iter()
                .map(|t| t.spec.scaled(t.foreign.iter().map(ForeignIntegral::length).product()))
                .collect(),
        )
    }

    /// Conditions on the switching functions of dimension `over` that keep
    /// this constraint intact: one integral row per distinct interval over
    /// which its terms integrate `over`. Every term must integrate `over`.
    fn rows_over(&self, index: usize, over: usize) -> Result<Vec<ConstraintOperator>, MvError> {
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        let mut hits = 0;
        for t in &self.terms {
            if let Some(f) = t.foreign.iter().find(|f| f.dim == over) {
                hits += 1;
                if !intervals.contains(&(f.lower, f.upper)) {
                    intervals.push((f.lower, f.upper));
                }
            }
        }
        if hits > 0 && hits != self.terms.len() {
            return Err(MvError::MixedIntegralConstraint { dim: self.dim, index, over });
        }
        Ok(intervals.into_iter().map(|(a, b)| ConstraintOperator::integral(a, b)).collect())
    }
}

/// Affine value `row . xi + off`, with `doff` the gradient of `off` with
/// respect to the extra unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub row: Vec<f64>,
    pub off: f64,
    pub doff: Vec<f64>,
}

impl Affine {
    pub fn zeros(n_coef: usize, n_extra: usize) -> Self {
        Affine { row: vec![0.0; n_coef], off: 0.0, doff: vec![0.0; n_extra] }
    }

    pub fn clear(&mut self) {
        self.row.iter_mut().for_each(|v| *v = 0.0);
        self.doff.iter_mut().for_each(|v| *v = 0.0);
        self.off = 0.0;
    }

    /// Value for coefficients `xi`.
    pub fn value(&self, xi: &[f64]) -> f64 {
        self.row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + self.off
    }
}

/// Evaluation context: values of the extra unknowns and access to the other
/// dependent variables referenced by component constraints.
#[derive(Clone, Copy)]
pub struct EvalCtx<'a> {
    pub extras: &'a [f64],
    pub vars: Option<&'a dyn VarResolver>,
}

impl<'a> EvalCtx<'a> {
    pub fn new(extras: &'a [f64]) -> Self {
        EvalCtx { extras, vars: None }
    }

    pub fn with_vars(extras: &'a [f64], vars: &'a dyn VarResolver) -> Self {
        EvalCtx { extras, vars: Some(vars) }
    }
}

/// Looks up the full constrained expression of a dependent variable.
pub trait VarResolver: Sync {
    fn field(&self, name: &str) -> Option<&dyn Field>;
}

/// A function of the independent variables whose partial derivatives can be
/// accumulated in affine form.
pub trait Field: Send + Sync {
    /// Adds `scale` times the partial derivative `alpha` at `x` to `out`.
    fn eval_into(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut Affine, ctx: &EvalCtx) -> Result<(), MvError>;
}

/// Linear free function occupying `offset..offset+len` of the global coefficient vector.
pub struct BasisLeaf {
    pub basis: Arc<dyn FreeFunction>,
    pub offset: usize,
}

impl Field for BasisLeaf {
    fn eval_into(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut Affine, _: &EvalCtx) -> Result<(), MvError> {
        let n = self.basis.len();
        self.basis.add_row(x, alpha, scale, &mut out.row[self.offset..self.offset + n]);
        Ok(())
    }
}

/// Expression in the independent variables (and extras), differentiated
/// symbolically with cached compiled partials.
pub struct ExprField {
    expr: Expr,
    var_names: Vec<String>,
    extra_names: Vec<String>,
    cache: RwLock<HashMap<Vec<usize>, Arc<Partials>>>,
}

struct Partials {
    value: CompiledExpr,
    /// `None` when the partial does not involve the extra.
    extras: Vec<Option<CompiledExpr>>,
}

impl ExprField {
    pub fn new(expr: Expr, var_names: &[String], extra_names: &[String]) -> Self {
        ExprField {
            expr,
            var_names: var_names.to_vec(),
            extra_names: extra_names.to_vec(),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    fn partials(&self, alpha: &[usize]) -> Result<Arc<Partials>, MvError> {
        if let Some(p) = self.cache.read().unwrap_or_else(|e| e.into_inner()).get(alpha) {
            return Ok(p.clone());
        }
        let mut e = self.expr.clone();
        for (k, &a) in alpha.iter().enumerate() {
            e = e.differentiate(&self.var_names[k], a);
        }
        let slots: Vec<&str> = self.var_names.iter().chain(&self.extra_names).map(String::as_str).collect();
        let value = e.compile(&slots)?;
        let mut extras = Vec::with_capacity(self.extra_names.len());
        for name in &self.extra_names {
            extras.push(if e.contains_var(name) { Some(e.differentiate(name, 1).compile(&slots)?) } else { None });
        }
        let p = Arc::new(Partials { value, extras });
        self.cache.write().unwrap_or_else(|e| e.into_inner()).insert(alpha.to_vec(), p.clone());
        Ok(p)
    }
}

impl Field for ExprField {
    fn eval_into(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut Affine, ctx: &EvalCtx) -> Result<(), MvError> {
        let p = self.partials(alpha)?;
        if p.value.is_zero() {
            return Ok(());
        }
        let mut slots = Vec::with_capacity(x.len() + ctx.extras.len());
        slots.extend_from_slice(x);
        slots.extend_from_slice(ctx.extras);
        out.off += scale * p.value.eval(&slots)?;
        for (i, d) in p.extras.iter().enumerate() {
            if let Some(d) = d {
                out.doff[i] += scale * d.eval(&slots)?;
            }
        }
        Ok(())
    }
}

/// Applies constraint terms on dimension `dim` to `f`, producing the partial
/// `alpha` (which must have `alpha[dim] == 0`) of the resulting function of
/// the remaining variables.
#[allow(clippy::too_many_arguments)]
pub(crate) fn apply_terms(
    f: &dyn Field,
    dim: usize,
    terms: &[MvTerm],
    x: &[f64],
    alpha: &[usize],
    scale: f64,
    out: &mut Affine,
    ctx: &EvalCtx,
) -> Result<(), MvError> {
    let mut xs = x.to_vec();
    let mut al = alpha.to_vec();
    for t in terms {
        if t.foreign.iter().any(|fi| alpha[fi.dim] > 0) {
            continue;
        }
        match t.spec {
            EvalSpec::Point { order, at, coeff } => {
                xs[dim] = at;
                al[dim] = order;
                integrate_foreign(f, &t.foreign, &mut xs, &al, scale * coeff, out, ctx)?;
            }
            EvalSpec::Integral { lower, upper, coeff } => {
                al[dim] = 0;
                for (z, w) in quad::mapped_rule(lower, upper) {
                    xs[dim] = z;
                    integrate_foreign(f, &t.foreign, &mut xs, &al, scale * coeff * w, out, ctx)?;
                }
            }
        }
        xs.copy_from_slice(x);
    }
    Ok(())
}

fn integrate_foreign(
    f: &dyn Field,
    foreign: &[ForeignIntegral],
    x: &mut Vec<f64>,
    alpha: &[usize],
    scale: f64,
    out: &mut Affine,
    ctx: &EvalCtx,
) -> Result<(), MvError> {
    let Some((first, rest)) = foreign.split_first() else {
        return f.eval_into(x, alpha, scale, out, ctx);
    };
    let saved = x[first.dim];
    for (z, w) in quad::mapped_rule(first.lower, first.upper) {
        x[first.dim] = z;
        integrate_foreign(f, rest, x, alpha, scale * w, out, ctx)?;
    }
    x[first.dim] = saved;
    Ok(())
}

/// Right-hand side of one constraint, ready to evaluate.
pub(crate) struct KappaField {
    rhs: ExprField,
    others: Vec<(String, Vec<MvTerm>)>,
    dim: usize,
}

impl Field for KappaField {
    fn eval_into(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut Affine, ctx: &EvalCtx) -> Result<(), MvError> {
        self.rhs.eval_into(x, alpha, scale, out, ctx)?;
        for (name, terms) in &self.others {
            let vars = ctx.vars.ok_or_else(|| MvError::UnknownVariable(name.clone()))?;
            let f = vars.field(name).ok_or_else(|| MvError::UnknownVariable(name.clone()))?;
            apply_terms(f, self.dim, terms, x, alpha, -scale, out, ctx)?;
        }
        Ok(())
    }
}

/// Constraints of one independent variable with their switching functions.
pub struct DimCE {
    pub dim: usize,
    pub constraints: Vec<MvConstraint>,
    pub switching: SwitchingSet,
    kappas: Vec<KappaField>,
}

/// Constrained expression of one dependent variable over `n` independent variables.
pub struct MultivariateCE {
    var_names: Vec<String>,
    extra_names: Vec<String>,
    order: ProcessingOrder,
    dims: Vec<Option<DimCE>>,
}

/// Options for [`MultivariateCE::build`].
#[derive(Clone, Debug, Default)]
pub struct CeOptions {
    /// Support functions per dimension; monomials `1, x, ...` where absent.
    pub supports: HashMap<usize, SupportBasis>,
    /// Processing order; computed from the integral constraints when absent.
    pub order: Option<Vec<usize>>,
    /// Names of extra unknowns that may appear in constraint values.
    pub extra_names: Vec<String>,
}

impl MultivariateCE {
    pub fn build(var_names: &[&str], constraints: Vec<MvConstraint>, options: CeOptions) -> Result<Self, MvError> {
        let n = var_names.len();
        let var_names: Vec<String> = var_names.iter().map(|s| s.to_string()).collect();
        for c in &constraints {
            if c.dim >= n {
                return Err(MvError::BadDimension(c.dim));
            }
            for f in c.terms.iter().flat_map(|t| &t.foreign) {
                if f.dim >= n || f.dim == c.dim {
                    return Err(MvError::BadDimension(f.dim));
                }
            }
            let own = &var_names[c.dim];
            let rhs = match &c.kappa {
                MvKappa::Expr(e) | MvKappa::Component { rhs: e, .. } => e,
            };
            if rhs.contains_var(own) {
                return Err(MvError::KappaDependsOnOwnVariable { dim: c.dim, var: own.clone() });
            }
        }
        let mut order = order_dimensions(n, &constraints)?;
        if let Some(custom) = options.order {
            let mut sorted = custom.clone();
            sorted.sort_unstable();
            let is_perm = sorted == (0..n).collect::<Vec<_>>();
            let pos = |d: usize| custom.iter().position(|&v| v == d);
            let respects = order.forced.iter().all(|&(a, b, _)| pos(a) < pos(b));
            if !is_perm || !respects {
                return Err(MvError::InvalidOrder(custom));
            }
            order.order = custom;
        }

        let mut dims: Vec<Option<DimCE>> = (0..n).map(|_| None).collect();
        for d in 0..n {
            let own: Vec<MvConstraint> = constraints.iter().filter(|c| c.dim == d).cloned().collect();
            let mut extra = Vec::new();
            for (index, c) in constraints.iter().enumerate() {
                if c.dim != d {
                    extra.extend(c.rows_over(index, d)?);
                }
            }
            if own.is_empty() {
                continue;
            }
            let native: Vec<ConstraintOperator> = own.iter().map(MvConstraint::native_operator).collect();
            let native_refs: Vec<&ConstraintOperator> = native.iter().collect();
            let supports = options
                .supports
                .get(&d)
                .cloned()
                .unwrap_or_else(|| SupportBasis::monomials(own.len() + extra.len()));
            let switching = SwitchingSet::build(&native_refs, &extra, supports)?;
            let kappas = own
                .iter()
                .map(|c| {
                    let (rhs, others) = match &c.kappa {
                        MvKappa::Expr(e) => (e.clone(), vec![]),
                        MvKappa::Component { rhs, others } => (rhs.clone(), others.clone()),
                    };
                    KappaField { rhs: ExprField::new(rhs, &var_names, &options.extra_names), others, dim: d }
                })
                .collect();
            dims[d] = Some(DimCE { dim: d, constraints: own, switching, kappas });
        }
        Ok(MultivariateCE { var_names, extra_names: options.extra_names, order, dims })
    }

    pub fn n_dims(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn extra_names(&self) -> &[String] {
        &self.extra_names
    }

    pub fn order(&self) -> &ProcessingOrder {
        &self.order
    }

    pub fn dim(&self, d: usize) -> Option<&DimCE> {
        self.dims.get(d).and_then(Option::as_ref)
    }

    /// Other dependent variables referenced by component constraints.
    pub fn dependencies(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .dims
            .iter()
            .flatten()
            .flat_map(|d| d.kappas.iter().flat_map(|k| k.others.iter().map(|(n, _)| n.clone())))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Partial `alpha` of `u(x, leaf)`, scaled and added to `out`.
    pub fn eval_into(
        &self,
        leaf: &dyn Field,
        x: &[f64],
        alpha: &[usize],
        scale: f64,
        out: &mut Affine,
        ctx: &EvalCtx,
    ) -> Result<(), MvError> {
        Level { ce: self, depth: self.order.order.len(), leaf }.eval_into(x, alpha, scale, out, ctx)
    }

    /// Convenience: numeric value of a partial for a non-linear leaf with no extras.
    pub fn value(&self, leaf: &dyn Field, x: &[f64], alpha: &[usize], ctx: &EvalCtx) -> Result<f64, MvError> {
        let mut out = Affine::zeros(0, ctx.extras.len());
        self.eval_into(leaf, x, alpha, 1.0, &mut out, ctx)?;
        Ok(out.off)
    }

    /// The expression as a field over a given free function.
    pub fn over<'a>(&'a self, leaf: &'a dyn Field) -> CeField<'a> {
        CeField { ce: self, leaf }
    }
}

/// A constrained expression applied to a particular free function.
pub struct CeField<'a> {
    ce: &'a MultivariateCE,
    leaf: &'a dyn Field,
}

impl Field for CeField<'_> {
    fn eval_into(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut Affine, ctx: &EvalCtx) -> Result<(), MvError> {
        self.ce.eval_into(self.leaf, x, alpha, scale, out, ctx)
    }
}

/// The free function after the first `depth` univariate expressions.
struct Level<'a> {
    ce: &'a MultivariateCE,
    depth: usize,
    leaf: &'a dyn Field,
}

impl Field for Level<'_> {
    fn eval_into(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut Affine, ctx: &EvalCtx) -> Result<(), MvError> {
        if self.depth == 0 {
            return self.leaf.eval_into(x, alpha, scale, out, ctx);
        }
        let inner = Level { ce: self.ce, depth: self.depth - 1, leaf: self.leaf };
        inner.eval_into(x, alpha, scale, out, ctx)?;
        let d = self.ce.order.order[self.depth - 1];
        let Some(dce) = self.ce.dims[d].as_ref() else {
            return Ok(());
        };
        let phi = dce.switching.phi(x[d], alpha[d])?;
        let mut rest = alpha.to_vec();
        rest[d] = 0;
        for (j, c) in dce.constraints.iter().enumerate() {
            let s = scale * phi[j];
            if s == 0.0 {
                continue;
            }
            dce.kappas[j].eval_into(x, &rest, s, out, ctx)?;
            apply_terms(&inner, d, &c.terms, x, &rest, -s, out, ctx)?;
        }
        Ok(())
    }
}

/// A dependent variable: its expression together with its free function.
pub struct DependentVar {
    pub name: String,
    pub ce: MultivariateCE,
    pub leaf: Box<dyn Field>,
}

impl Field for DependentVar {
    fn eval_into(&self, x: &[f64], alpha: &[usize], scale: f64, out: &mut Affine, ctx: &EvalCtx) -> Result<(), MvError> {
        self.ce.eval_into(self.leaf.as_ref(), x, alpha, scale, out, ctx)
    }
}

/// Several dependent variables whose component constraints refer to one another.
pub struct System {
    pub vars: Vec<DependentVar>,
}

impl System {
    /// Checks that every referenced variable exists and that references are acyclic.
    pub fn new(vars: Vec<DependentVar>) -> Result<Self, MvError> {
        let names: Vec<&str> = vars.iter().map(|v| v.name.as_str()).collect();
        let deps: Vec<Vec<usize>> = vars
            .iter()
            .map(|v| {
                v.ce.dependencies()
                    .iter()
                    .map(|d| names.iter().position(|n| n == d).ok_or_else(|| MvError::UnknownVariable(d.clone())))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        // depth-first cycle search
        let n = vars.len();
        let mut state = vec![0u8; n];
        fn visit(i: usize, deps: &[Vec<usize>], state: &mut [u8], path: &mut Vec<usize>) -> Option<Vec<usize>> {
            state[i] = 1;
            path.push(i);
            for &j in &deps[i] {
                if state[j] == 1 {
                    return Some(path.clone());
                }
                if state[j] == 0 {
                    if let Some(c) = visit(j, deps, state, path) {
                        return Some(c);
                    }
                }
            }
            path.pop();
            state[i] = 2;
            None
        }
        for i in 0..n {
            if state[i] == 0 {
                if let Some(cycle) = visit(i, &deps, &mut state, &mut Vec::new()) {
                    return Err(MvError::CyclicComponents(cycle.iter().map(|&k| names[k].to_string()).collect()));
                }
            }
        }
        Ok(System { vars })
    }

    pub fn var(&self, name: &str) -> Option<&DependentVar> {
        self.vars.iter().find(|v| v.name == name)
    }
}

impl VarResolver for System {
    fn field(&self, name: &str) -> Option<&dyn Field> {
        self.var(name).map(|v| v as &dyn Field)
    }
}
