//! Benchmark problems with known analytic solutions.

use super::{
    split::SplitProblem, DeProblem, DependentSpec, FreeSpec, GridKind, GridSpec, IndependentVar, RemovalRule,
    Residual, SolverConfig,
};
use crate::basis::{Activation, FamilyKind};
use crate::constraint::SupportBasis;
use crate::expr::{parse, Expr};
use crate::multivar::MvConstraint;
use std::f64::consts::PI;

fn ex(src: &str) -> Expr {
    parse(src).unwrap_or_else(|e| panic!("built-in expression `{src}`: {e}"))
}

fn problem(id: &str, vars: Vec<IndependentVar>, dep: DependentSpec, residuals: Vec<Residual>, grid: GridSpec) -> DeProblem {
    let test_points = vec![100; vars.len()];
    DeProblem {
        id: id.to_string(),
        vars,
        deps: vec![dep],
        residuals,
        grid,
        test_points,
        extras: vec![],
        solver: SolverConfig::default(),
        initial: None,
    }
}

fn cgl(points: usize, dims: usize) -> GridSpec {
    GridSpec { points: vec![points; dims], kind: GridKind::Cgl }
}

fn chebyshev(degree: usize) -> FreeSpec {
    FreeSpec::Tensor { family: FamilyKind::Chebyshev, degree, total_degree: Some(degree), removal: RemovalRule::Auto }
}

/// Random tanh features with weights and biases drawn from (-1, 1).
pub fn tanh_elm(neurons: usize, seed: u64) -> FreeSpec {
    FreeSpec::Elm { activation: Activation::Tanh, neurons, seed, range: (-1.0, 1.0) }
}

const SIMPLE_PDE: &str = "u_xx + u_yy - exp(-x)*(x - 2 + y^3 + 6*y)";
const SIMPLE_PDE_EXACT: &str = "exp(-x)*(x + y^3)";

fn unit_square() -> Vec<IndependentVar> {
    vec![IndependentVar::new("x", 0.0, 1.0), IndependentVar::new("y", 0.0, 1.0)]
}

fn simple_pde_constraints() -> Vec<MvConstraint> {
    vec![
        MvConstraint::point(0, 0.0, ex("y^3")),
        MvConstraint::point(0, 1.0, ex("(1 + y^3)*exp(-1)")),
        MvConstraint::point(1, 0.0, ex("x*exp(-x)")),
        MvConstraint::point(1, 1.0, ex("exp(-x)*(x + 1)")),
    ]
}

/// Poisson problem on the unit square with Dirichlet data embedded in the
/// expression; Chebyshev terms up to total degree `m` on an `n x n` grid.
pub fn simple_pde(n: usize, m: usize) -> DeProblem {
    let dep = DependentSpec::new("u", simple_pde_constraints(), chebyshev(m)).with_exact(ex(SIMPLE_PDE_EXACT));
    problem("simple-pde", unit_square(), dep, vec![Residual::new(ex(SIMPLE_PDE))], cgl(n, 2))
}

/// The same problem with boundary data as extra least-squares rows and the
/// full Chebyshev basis as the unknown function.
pub fn simple_pde_spectral(n: usize, m: usize) -> DeProblem {
    let free = FreeSpec::Tensor {
        family: FamilyKind::Chebyshev,
        degree: m,
        total_degree: Some(m),
        removal: RemovalRule::None,
    };
    let dep = DependentSpec::new("u", vec![], free).with_exact(ex(SIMPLE_PDE_EXACT));
    let residuals = vec![
        Residual::new(ex(SIMPLE_PDE)),
        Residual::pinned(ex("u - y^3"), vec![(0, 0.0)]),
        Residual::pinned(ex("u - (1 + y^3)*exp(-1)"), vec![(0, 1.0)]),
        Residual::pinned(ex("u - x*exp(-x)"), vec![(1, 0.0)]),
        Residual::pinned(ex("u - exp(-x)*(x + 1)"), vec![(1, 1.0)]),
    ];
    problem("simple-pde-spectral", unit_square(), dep, residuals, cgl(n, 2))
}

/// Simple PDE with a tanh random-feature free function.
pub fn simple_pde_xtfc(n: usize, neurons: usize, seed: u64) -> DeProblem {
    let dep = DependentSpec::new("u", simple_pde_constraints(), tanh_elm(neurons, seed)).with_exact(ex(SIMPLE_PDE_EXACT));
    problem("simple-pde-xtfc", unit_square(), dep, vec![Residual::new(ex(SIMPLE_PDE))], cgl(n, 2))
}

/// String fixed at both ends released from rest with a sine profile.
pub fn wave1d(degree: usize, n: usize) -> DeProblem {
    let vars = vec![IndependentVar::new("x", 0.0, 1.0), IndependentVar::new("t", 0.0, 1.0)];
    let constraints = vec![
        MvConstraint::point(0, 0.0, Expr::num(0.0)),
        MvConstraint::point(0, 1.0, Expr::num(0.0)),
        MvConstraint::point(1, 0.0, ex("sin(pi*x)")),
        MvConstraint::deriv(1, 1, 0.0, Expr::num(0.0)),
    ];
    let free = FreeSpec::Tensor {
        family: FamilyKind::Legendre,
        degree,
        total_degree: Some(degree),
        removal: RemovalRule::Auto,
    };
    let dep = DependentSpec::new("u", constraints, free).with_exact(ex("sin(pi*x)*cos(pi*t)"));
    problem("wave1d", vars, dep, vec![Residual::new(ex("u_xx - u_tt"))], cgl(n, 2))
}

fn wave2d(id: &str, free: FreeSpec) -> DeProblem {
    let vars = vec![
        IndependentVar::new("x", 0.0, 1.0),
        IndependentVar::new("y", 0.0, 1.0),
        IndependentVar::new("t", 0.0, 1.0),
    ];
    let constraints = vec![
        MvConstraint::point(0, 0.0, Expr::num(0.0)),
        MvConstraint::point(0, 1.0, Expr::num(0.0)),
        MvConstraint::point(1, 0.0, Expr::num(0.0)),
        MvConstraint::point(1, 1.0, Expr::num(0.0)),
        MvConstraint::point(2, 0.0, ex("sin(pi*x)*sin(pi*y)")),
        MvConstraint::deriv(2, 1, 0.0, Expr::num(0.0)),
    ];
    let dep = DependentSpec::new("u", constraints, free).with_exact(ex("sin(pi*x)*sin(pi*y)*cos(pi*sqrt(2)/8*t)"));
    let grid = GridSpec { points: vec![11; 3], kind: GridKind::Uniform };
    let mut p = problem(id, vars, dep, vec![Residual::new(ex("u_xx + u_yy - 64*u_tt"))], grid);
    p.test_points = vec![15; 3];
    p
}

/// Clamped membrane with Chebyshev terms up to total degree `degree`.
pub fn wave2d_tfc(degree: usize) -> DeProblem {
    wave2d("wave2d", chebyshev(degree))
}

/// Clamped membrane with a tanh random-feature free function.
pub fn wave2d_xtfc(neurons: usize, seed: u64) -> DeProblem {
    wave2d("wave2d-xtfc", tanh_elm(neurons, seed))
}

/// Simply supported square plate under a sine load.
pub fn biharmonic_cartesian(degree: usize, n: usize) -> DeProblem {
    let constraints = vec![
        MvConstraint::point(0, 0.0, Expr::num(0.0)),
        MvConstraint::point(0, 1.0, Expr::num(0.0)),
        MvConstraint::deriv(0, 2, 0.0, Expr::num(0.0)),
        MvConstraint::deriv(0, 2, 1.0, Expr::num(0.0)),
        MvConstraint::point(1, 0.0, Expr::num(0.0)),
        MvConstraint::point(1, 1.0, Expr::num(0.0)),
        MvConstraint::deriv(1, 2, 0.0, Expr::num(0.0)),
        MvConstraint::deriv(1, 2, 1.0, Expr::num(0.0)),
    ];
    let dep = DependentSpec::new("u", constraints, chebyshev(degree)).with_exact(ex("sin(pi*x)*sin(pi*y)/pi^2"));
    let residual = ex("u_xxxx + 2*u_xxyy + u_yyyy - 4*pi^2*sin(pi*x)*sin(pi*y)");
    problem("biharmonic-cart", unit_square(), dep, vec![Residual::new(residual)], cgl(n, 2))
}

/// Biharmonic equation on an annulus in polar coordinates `(r, t)`, with
/// periodicity in the angle imposed by relative constraints.
pub fn biharmonic_polar(degree: usize, n: usize) -> DeProblem {
    let vars = vec![IndependentVar::new("r", 1.0, 4.0), IndependentVar::new("t", 0.0, 2.0 * PI)];
    let mut constraints = vec![
        MvConstraint::point(0, 1.0, ex("sin(2*t)/4 + sin(3*t)/16 + pi*cos(t) + 1/8")),
        MvConstraint::point(0, 4.0, ex("4*sin(2*t) + 4*sin(3*t) + pi*cos(t)/4 + 2")),
        MvConstraint::deriv(0, 2, 1.0, ex("sin(2*t)/2 + 3*sin(3*t)/8 + 2*pi*cos(t) + 1/4")),
        MvConstraint::deriv(0, 2, 4.0, ex("sin(2*t)/2 + 3*sin(3*t)/2 + pi*cos(t)/32 + 1/4")),
    ];
    for order in 0..4 {
        constraints.push(MvConstraint::relative(1, order, 0.0, 2.0 * PI));
    }
    let free = FreeSpec::Tensor {
        family: FamilyKind::Chebyshev,
        degree,
        total_degree: Some(degree),
        removal: RemovalRule::PerDim(vec![(0..4).collect(), (0..5).collect()]),
    };
    let dep = DependentSpec::new("u", constraints, free)
        .with_supports(1, SupportBasis::from_powers(&[1, 2, 3, 4]))
        .with_exact(ex("r^3/16*sin(3*t) + r^2/4*sin(2*t) + r^2/8 + pi*cos(t)/r"));
    let residual = ex("u_rrrr + 2/r^2*u_rrtt + 1/r^4*u_tttt + 2/r*u_rrr - 2/r^3*u_rtt - 1/r^2*u_rr \
         + 4/r^4*u_tt + 1/r^3*u_r");
    problem("biharmonic-polar", vars, dep, vec![Residual::new(residual)], cgl(n, 2))
}

const CONVECTION_DIFFUSION: &str = "y_xx - Pe*y_x";

fn convection_diffusion_exact(pe: f64) -> Expr {
    let pe = Expr::num(pe);
    ex("(1 - exp(Pe*(x - 1)))/(1 - exp(-Pe))").substitute("Pe", &pe)
}

/// Steady convection–diffusion on `[0, 1]` with one expression over the
/// whole interval; `points` CGL nodes and Legendre terms up to `degree`.
pub fn convection_diffusion_whole(pe: f64, points: usize, degree: usize) -> DeProblem {
    let constraints = vec![MvConstraint::point(0, 0.0, Expr::num(1.0)), MvConstraint::point(0, 1.0, Expr::num(0.0))];
    let free = FreeSpec::Tensor { family: FamilyKind::Legendre, degree, total_degree: None, removal: RemovalRule::Auto };
    let dep = DependentSpec::new("y", constraints, free).with_exact(convection_diffusion_exact(pe));
    let residual = ex(CONVECTION_DIFFUSION).substitute("Pe", &Expr::num(pe));
    let mut p = problem(
        "convection-diffusion-whole",
        vec![IndependentVar::new("x", 0.0, 1.0)],
        dep,
        vec![Residual::new(residual)],
        cgl(points, 1),
    );
    p.test_points = vec![1000];
    p
}

/// The same equation split at a free interior point solved with the coefficients.
pub fn convection_diffusion_split(pe: f64, points: usize, degree: usize) -> SplitProblem {
    SplitProblem {
        id: "convection-diffusion-split".into(),
        var: "x".into(),
        dep: "y".into(),
        residual: ex(CONVECTION_DIFFUSION).substitute("Pe", &Expr::num(pe)),
        domain: super::SplitDomain::linear_guess(0.0, 1.0, 1.0, 0.0),
        left: 1.0,
        right: 0.0,
        family: FamilyKind::Legendre,
        degree,
        points,
        test_points: 1000,
        exact: Some(convection_diffusion_exact(pe)),
        solver: SolverConfig::default(),
    }
}
