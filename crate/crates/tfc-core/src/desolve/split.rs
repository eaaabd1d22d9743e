//! One-dimensional problems split into two subdomains joined at a free point.
//!
//! Both halves are written on the basis domain `[-1, 1]`. The split point,
//! and the value and slope of the solution there, are extra unknowns, so the
//! two expressions agree in value and first derivative at the join for any
//! coefficients.

use super::{
    DeError, DeProblem, DependentSpec, Discretization, ExtraUnknown, FreeSpec, GridKind, GridSpec, IndependentVar,
    RemovalRule, Residual, SampleTable, SolveReport, SolverConfig,
};
use crate::basis::{uniform_nodes, FamilyKind};
use crate::expr::{parse, Expr};
use crate::multivar::MvConstraint;

const SPLIT: &str = "xp";
const JOIN_VALUE: &str = "yp";
const JOIN_SLOPE: &str = "dyp";

/// Interval, admissible range of the split point, and the starting guess
/// for the split point and the join value and slope.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDomain {
    pub lower: f64,
    pub upper: f64,
    pub split_bounds: (f64, f64),
    pub split_initial: f64,
    pub value_initial: f64,
    pub slope_initial: f64,
}

impl SplitDomain {
    /// Split point kept a thousandth of the length away from either end,
    /// starting at the midpoint.
    pub fn new(lower: f64, upper: f64) -> Self {
        let margin = 1e-3 * (upper - lower);
        SplitDomain {
            lower,
            upper,
            split_bounds: (lower + margin, upper - margin),
            split_initial: 0.5 * (lower + upper),
            value_initial: 0.0,
            slope_initial: 0.0,
        }
    }

    /// As [`SplitDomain::new`], with the join value and slope taken from the
    /// straight line through the two boundary values.
    pub fn linear_guess(lower: f64, upper: f64, left: f64, right: f64) -> Self {
        SplitDomain {
            value_initial: 0.5 * (left + right),
            slope_initial: (right - left) / (upper - lower),
            ..SplitDomain::new(lower, upper)
        }
    }
}

/// Second-order scalar boundary value problem `F(x, y, y_x, y_xx, ...) = 0`
/// with `y(lower) = left` and `y(upper) = right`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitProblem {
    pub id: String,
    pub var: String,
    pub dep: String,
    pub residual: Expr,
    pub domain: SplitDomain,
    pub left: f64,
    pub right: f64,
    pub family: FamilyKind,
    pub degree: usize,
    /// Collocation points per subdomain.
    pub points: usize,
    /// Uniform test points per subdomain.
    pub test_points: usize,
    pub exact: Option<Expr>,
    pub solver: SolverConfig,
}

fn ex(src: &str) -> Expr {
    parse(src).unwrap_or_else(|e| panic!("built-in expression `{src}`: {e}"))
}

fn basis_var(var: &str) -> &'static str {
    if var == "z" {
        "s"
    } else {
        "z"
    }
}

/// Names of the two sub-solutions.
fn part_names(dep: &str) -> [String; 2] {
    [format!("{dep}1"), format!("{dep}2")]
}

/// Rewrites the residual for one subdomain: `x` becomes the affine image of
/// the basis variable and each x-derivative picks up a factor of the map slope.
fn rewrite(sp: &SplitProblem, part: usize) -> Result<Expr, DeError> {
    let z = basis_var(&sp.var);
    let (a, b) = (Expr::num(sp.domain.lower), Expr::num(sp.domain.upper));
    let xp = Expr::var(SPLIT);
    let (start, width) = match part {
        0 => (a.clone(), Expr::sub(xp, a)),
        _ => (xp.clone(), Expr::sub(b, xp)),
    };
    let slope = Expr::div(Expr::num(2.0), width.clone());
    let x_of_z = Expr::add(start, Expr::mul(Expr::div(Expr::add(Expr::var(z), Expr::num(1.0)), Expr::num(2.0)), width));
    let name = &part_names(&sp.dep)[part];
    let mut out = sp.residual.clone();
    for symbol in sp.residual.variables() {
        if symbol == sp.var {
            out = out.substitute(&symbol, &x_of_z);
            continue;
        }
        let order = if symbol == sp.dep {
            0
        } else {
            match symbol.strip_prefix(&format!("{}_", sp.dep)) {
                Some(s) if !s.is_empty() && s.chars().all(|c| sp.var.len() == 1 && sp.var.starts_with(c)) => {
                    s.chars().count()
                }
                _ => return Err(DeError::UnknownSymbol(symbol)),
            }
        };
        let part_symbol =
            if order == 0 { name.clone() } else { format!("{name}_{}", z.repeat(order)) };
        let scaled = Expr::mul(Expr::pow(slope.clone(), Expr::num(order as f64)), Expr::var(&part_symbol));
        out = out.substitute(&symbol, &scaled);
    }
    Ok(out)
}

/// The split problem as a two-variable problem on the basis domain.
pub fn split_problem(sp: &SplitProblem) -> Result<DeProblem, DeError> {
    if sp.var.chars().count() != 1 {
        return Err(DeError::BadVariableName(sp.var.clone()));
    }
    let d = &sp.domain;
    if !(d.lower < d.split_bounds.0 && d.split_bounds.0 <= d.split_bounds.1 && d.split_bounds.1 < d.upper) {
        return Err(DeError::Invalid("split bounds must lie strictly inside the interval".into()));
    }
    let z = basis_var(&sp.var);
    let names = part_names(&sp.dep);
    let free = || FreeSpec::Tensor { family: sp.family, degree: sp.degree, total_degree: None, removal: RemovalRule::Auto };
    let first = vec![
        MvConstraint::point(0, -1.0, Expr::num(sp.left)),
        MvConstraint::point(0, 1.0, Expr::var(JOIN_VALUE)),
        MvConstraint::deriv(0, 1, 1.0, ex(&format!("{JOIN_SLOPE}*({SPLIT} - ({}))/2", d.lower))),
    ];
    let second = vec![
        MvConstraint::point(0, -1.0, Expr::var(JOIN_VALUE)),
        MvConstraint::deriv(0, 1, -1.0, ex(&format!("{JOIN_SLOPE}*(({}) - {SPLIT})/2", d.upper))),
        MvConstraint::point(0, 1.0, Expr::num(sp.right)),
    ];
    Ok(DeProblem {
        id: sp.id.clone(),
        vars: vec![IndependentVar::new(z, -1.0, 1.0)],
        deps: vec![DependentSpec::new(&names[0], first, free()), DependentSpec::new(&names[1], second, free())],
        residuals: vec![Residual::new(rewrite(sp, 0)?), Residual::new(rewrite(sp, 1)?)],
        grid: GridSpec { points: vec![sp.points], kind: GridKind::Cgl },
        test_points: vec![sp.test_points],
        extras: vec![
            ExtraUnknown { name: SPLIT.into(), initial: d.split_initial, bounds: Some(d.split_bounds) },
            ExtraUnknown { name: JOIN_VALUE.into(), initial: d.value_initial, bounds: None },
            ExtraUnknown { name: JOIN_SLOPE.into(), initial: d.slope_initial, bounds: None },
        ],
        solver: SolverConfig { force_nonlinear: true, ..sp.solver.clone() },
        initial: None,
    })
}

/// Solves both halves, the split point and the join values together.
/// Samples and errors are reported against the original variable.
pub fn solve_split(sp: &SplitProblem) -> Result<SolveReport, DeError> {
    let problem = split_problem(sp)?;
    let disc = Discretization::new(&problem)?;
    let mut report = disc.solve()?;
    let xp = report.extras[0].1;
    let exact = sp.exact.as_ref().map(|e| e.compile(&[sp.var.as_str()])).transpose()?;
    let mut columns = vec![sp.var.clone(), sp.dep.clone()];
    if exact.is_some() {
        columns.push(format!("{}_true", sp.dep));
        columns.push(format!("{}_abs_error", sp.dep));
    }
    let mut rows = Vec::with_capacity(2 * sp.test_points);
    for (part, (start, end)) in [(sp.domain.lower, xp), (xp, sp.domain.upper)].into_iter().enumerate() {
        for z in uniform_nodes(-1.0, 1.0, sp.test_points) {
            let x = start + (z + 1.0) * (end - start) / 2.0;
            let y = disc.value(part, &[z], &[0], &report.unknowns)?;
            let mut row = vec![x, y];
            if let Some(e) = &exact {
                let t = e.eval(&[x])?;
                row.push(t);
                row.push((y - t).abs());
            }
            rows.push(row);
        }
    }
    if exact.is_some() {
        let errors: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        report.max_error = Some(errors.iter().cloned().fold(0.0, f64::max));
        report.mean_error = Some(errors.iter().sum::<f64>() / errors.len() as f64);
    }
    report.samples = SampleTable { columns, rows };
    Ok(report)
}
