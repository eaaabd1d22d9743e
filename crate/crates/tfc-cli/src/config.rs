//! Declarative problem documents in TOML.
//!
//! A document describes either a general problem (any number of variables,
//! dependents and residuals) or, when a `[split]` table is present, a
//! one-dimensional problem solved on two subdomains joined at a free point.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use tfc_core::basis::{Activation, FamilyKind};
use tfc_core::constraint::{EvalSpec, SupportBasis};
use tfc_core::desolve::{
    DeProblem, DependentSpec, ExtraUnknown, FreeSpec, GridKind, GridSpec, IndependentVar, RemovalRule, Residual,
    SolverConfig, SplitDomain, SplitProblem,
};
use tfc_core::expr::{parse, Expr, ParseError};
use tfc_core::multivar::{MvConstraint, MvTerm};
use tfc_core::solvers::LsqMethod;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("cannot write config: {0}")]
    Emit(#[from] toml::ser::Error),
    #[error("{field}: cannot parse `{src}`: {source}")]
    Expr { field: String, src: String, source: ParseError },
    #[error("unknown independent variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown least-squares method `{0}` (expected one of normal, qr, scaled-qr, svd-pinv, cholesky, lstsq)")]
    UnknownMethod(String),
    #[error("unknown basis family `{0}`")]
    UnknownFamily(String),
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

fn default_method() -> String {
    LsqMethod::default().name().to_string()
}

fn default_tol() -> f64 {
    1e-13
}

fn default_max_iter() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub id: String,
    /// Seed for random-feature bases that do not set their own. TOML
    /// integers are signed, so seeds stop at `i64::MAX`.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub seed: u64,
    pub variables: Vec<VariableConfig>,
    pub dependents: Vec<DependentConfig>,
    pub residuals: Vec<ResidualConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extras: Vec<ExtraConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableConfig {
    pub name: String,
    pub interval: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependentConfig {
    pub name: String,
    /// Analytic solution, used only for error reporting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    /// Order in which variables are processed when building the expression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
    /// Monomial support powers per variable name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub supports: BTreeMap<String, Vec<u32>>,
    pub basis: BasisConfig,
    #[serde(default)]
    pub constraints: Vec<ConstraintConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    /// chebyshev, legendre, laguerre, hermite-prob, hermite-phys, fourier or elm.
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removal: Option<RemovalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neurons: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `"auto"`, `"none"`, or explicit basis indices to drop per variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RemovalConfig {
    Named(String),
    PerDim(Vec<Vec<usize>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Point,
    Derivative,
    /// Derivative of `order` equal at the two ends of `between`.
    Relative,
    Integral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub variable: String,
    pub kind: ConstraintKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub between: Option<[f64; 2]>,
    /// Constrained value as an expression in the other variables and extras.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualConfig {
    pub expr: String,
    /// Variables held at a fixed value, e.g. to collocate on a boundary.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fixed: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKindConfig {
    #[default]
    Cgl,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: Vec<usize>,
    #[serde(default)]
    pub kind: GridKindConfig,
    /// Uniform test points per variable; 100 each when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_points: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Iterate with Gauss-Newton even for linear problems.
    #[serde(default)]
    pub nonlinear: bool,
    #[serde(default)]
    pub check_jacobian: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            method: default_method(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            nonlinear: false,
            check_jacobian: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraConfig {
    pub name: String,
    #[serde(default)]
    pub initial: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Boundary value at the lower end of the interval.
    pub left: f64,
    /// Boundary value at the upper end of the interval.
    pub right: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_initial: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_initial: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_initial: Option<f64>,
}

/// A configured problem ready to solve.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Plain(DeProblem),
    Split(SplitProblem),
}

impl Problem {
    pub fn id(&self) -> &str {
        match self {
            Problem::Plain(p) => &p.id,
            Problem::Split(p) => &p.id,
        }
    }
}

impl ProblemConfig {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(src)?)
    }

    pub fn load(path: &str) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_string(), source })?;
        Self::from_toml(&src)
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    fn dim(&self, name: &str) -> Result<usize, ConfigError> {
        self.variables.iter().position(|v| v.name == name).ok_or_else(|| ConfigError::UnknownVariable(name.into()))
    }

    fn solver(&self) -> Result<SolverConfig, ConfigError> {
        let s = &self.solver;
        let method = LsqMethod::from_name(&s.method).ok_or_else(|| ConfigError::UnknownMethod(s.method.clone()))?;
        if !(s.tol > 0.0) || s.max_iter == 0 {
            return Err(invalid("solver: tol must be positive and max_iter at least 1"));
        }
        Ok(SolverConfig {
            method,
            tol: s.tol,
            max_iter: s.max_iter,
            force_nonlinear: s.nonlinear,
            check_jacobian: s.check_jacobian,
        })
    }

    fn test_points(&self) -> Result<Vec<usize>, ConfigError> {
        let tp = self.grid.test_points.clone().unwrap_or_else(|| vec![100; self.variables.len()]);
        if tp.len() != self.variables.len() {
            return Err(invalid(format!(
                "grid.test_points has {} entries for {} variables",
                tp.len(),
                self.variables.len()
            )));
        }
        Ok(tp)
    }

    /// Builds the problem, checking names and expressions.
    pub fn build(&self) -> Result<Problem, ConfigError> {
        if self.variables.is_empty() || self.dependents.is_empty() || self.residuals.is_empty() {
            return Err(invalid("at least one variable, dependent and residual is required"));
        }
        if self.grid.points.len() != self.variables.len() {
            return Err(invalid(format!(
                "grid.points has {} entries for {} variables",
                self.grid.points.len(),
                self.variables.len()
            )));
        }
        match &self.split {
            Some(split) => self.build_split(split).map(Problem::Split),
            None => self.build_plain().map(Problem::Plain),
        }
    }

    fn build_plain(&self) -> Result<DeProblem, ConfigError> {
        let vars =
            self.variables.iter().map(|v| IndependentVar::new(&v.name, v.interval[0], v.interval[1])).collect();
        let deps = self.dependents.iter().map(|d| self.dependent(d)).collect::<Result<Vec<_>, _>>()?;
        let mut residuals = Vec::with_capacity(self.residuals.len());
        for (i, r) in self.residuals.iter().enumerate() {
            let expr = expr(&format!("residuals[{i}].expr"), &r.expr)?;
            let fixed = r.fixed.iter().map(|(name, &v)| Ok((self.dim(name)?, v))).collect::<Result<Vec<_>, ConfigError>>()?;
            residuals.push(Residual::pinned(expr, fixed));
        }
        let extras = self
            .extras
            .iter()
            .map(|e| ExtraUnknown { name: e.name.clone(), initial: e.initial, bounds: e.bounds.map(|b| (b[0], b[1])) })
            .collect();
        let kind = match self.grid.kind {
            GridKindConfig::Cgl => GridKind::Cgl,
            GridKindConfig::Uniform => GridKind::Uniform,
        };
        Ok(DeProblem {
            id: self.id.clone(),
            vars,
            deps,
            residuals,
            grid: GridSpec { points: self.grid.points.clone(), kind },
            test_points: self.test_points()?,
            extras,
            solver: self.solver()?,
            initial: None,
        })
    }

    fn dependent(&self, d: &DependentConfig) -> Result<DependentSpec, ConfigError> {
        let field = |what: &str| format!("dependents.{}.{what}", d.name);
        let mut constraints = Vec::with_capacity(d.constraints.len());
        for (i, c) in d.constraints.iter().enumerate() {
            constraints.push(self.constraint(c, &field(&format!("constraints[{i}]")))?);
        }
        let mut spec = DependentSpec::new(&d.name, constraints, self.free(&d.basis, &field("basis"))?);
        for (name, powers) in &d.supports {
            spec = spec.with_supports(self.dim(name)?, SupportBasis::from_powers(powers));
        }
        if let Some(order) = &d.order {
            spec.order = Some(order.iter().map(|n| self.dim(n)).collect::<Result<_, _>>()?);
        }
        if let Some(src) = &d.exact {
            spec.exact = Some(expr(&field("exact"), src)?);
        }
        Ok(spec)
    }

    fn constraint(&self, c: &ConstraintConfig, field: &str) -> Result<MvConstraint, ConfigError> {
        let dim = self.dim(&c.variable)?;
        let need = |v: Option<f64>, what: &str| v.ok_or_else(|| invalid(format!("{field}: `{what}` is required")));
        let value = || match &c.value {
            Some(src) => expr(&format!("{field}.value"), src),
            None => Err(invalid(format!("{field}: `value` is required"))),
        };
        let between = || c.between.ok_or_else(|| invalid(format!("{field}: `between` is required")));
        Ok(match c.kind {
            ConstraintKind::Point => MvConstraint::point(dim, need(c.at, "at")?, value()?),
            ConstraintKind::Derivative => {
                let order = c.order.ok_or_else(|| invalid(format!("{field}: `order` is required")))?;
                MvConstraint::deriv(dim, order, need(c.at, "at")?, value()?)
            }
            ConstraintKind::Relative => {
                if c.value.is_some() {
                    return Err(invalid(format!("{field}: relative constraints take no `value`")));
                }
                let [a, b] = between()?;
                MvConstraint::relative(dim, c.order.unwrap_or(0), a, b)
            }
            ConstraintKind::Integral => {
                let [lo, hi] = between()?;
                MvConstraint::new(dim, vec![MvTerm::new(EvalSpec::integral(lo, hi))], value()?)
            }
        })
    }

    fn free(&self, b: &BasisConfig, field: &str) -> Result<FreeSpec, ConfigError> {
        if b.family == "elm" {
            let name = b.activation.as_deref().unwrap_or("tanh");
            let activation = Activation::from_name(name).ok_or_else(|| ConfigError::UnknownActivation(name.into()))?;
            let neurons = b.neurons.ok_or_else(|| invalid(format!("{field}: elm needs `neurons`")))?;
            let range = b.range.unwrap_or([-1.0, 1.0]);
            return Ok(FreeSpec::Elm {
                activation,
                neurons,
                seed: b.seed.unwrap_or(self.seed),
                range: (range[0], range[1]),
            });
        }
        let family = family(&b.family)?;
        let degree = b.degree.ok_or_else(|| invalid(format!("{field}: `degree` is required")))?;
        let removal = match &b.removal {
            None => RemovalRule::Auto,
            Some(RemovalConfig::Named(s)) if s == "auto" => RemovalRule::Auto,
            Some(RemovalConfig::Named(s)) if s == "none" => RemovalRule::None,
            Some(RemovalConfig::Named(s)) => {
                return Err(invalid(format!("{field}.removal: expected \"auto\", \"none\" or index lists, got `{s}`")))
            }
            Some(RemovalConfig::PerDim(v)) => RemovalRule::PerDim(v.clone()),
        };
        Ok(FreeSpec::Tensor { family, degree, total_degree: b.total_degree, removal })
    }

    fn build_split(&self, s: &SplitConfig) -> Result<SplitProblem, ConfigError> {
        if self.variables.len() != 1 || self.dependents.len() != 1 || self.residuals.len() != 1 {
            return Err(invalid("split problems have exactly one variable, dependent and residual"));
        }
        if !self.extras.is_empty() {
            return Err(invalid("split problems take no extra unknowns"));
        }
        let var = &self.variables[0];
        let dep = &self.dependents[0];
        if !dep.constraints.is_empty() {
            return Err(invalid("split problems take boundary values from [split], not constraints"));
        }
        let FreeSpec::Tensor { family, degree, .. } = self.free(&dep.basis, "dependents.basis")? else {
            return Err(invalid("split problems need a polynomial or Fourier basis"));
        };
        let [lower, upper] = var.interval;
        let mut domain = SplitDomain::linear_guess(lower, upper, s.left, s.right);
        if let Some(b) = s.split_bounds {
            domain.split_bounds = (b[0], b[1]);
        }
        domain.split_initial = s.split_initial.unwrap_or(domain.split_initial);
        domain.value_initial = s.value_initial.unwrap_or(domain.value_initial);
        domain.slope_initial = s.slope_initial.unwrap_or(domain.slope_initial);
        Ok(SplitProblem {
            id: self.id.clone(),
            var: var.name.clone(),
            dep: dep.name.clone(),
            residual: expr("residuals[0].expr", &self.residuals[0].expr)?,
            domain,
            left: s.left,
            right: s.right,
            family,
            degree,
            points: self.grid.points[0],
            test_points: self.test_points()?[0],
            exact: dep.exact.as_deref().map(|src| expr("dependents.exact", src)).transpose()?,
            solver: self.solver()?,
        })
    }
}

fn expr(field: &str, src: &str) -> Result<Expr, ConfigError> {
    parse(src).map_err(|source| ConfigError::Expr { field: field.into(), src: src.into(), source })
}

fn family(name: &str) -> Result<FamilyKind, ConfigError> {
    [
        FamilyKind::Chebyshev,
        FamilyKind::Legendre,
        FamilyKind::Laguerre,
        FamilyKind::HermiteProb,
        FamilyKind::HermitePhys,
        FamilyKind::Fourier,
    ]
    .into_iter()
    .find(|f| f.name() == name)
    .ok_or_else(|| ConfigError::UnknownFamily(name.into()))
}
