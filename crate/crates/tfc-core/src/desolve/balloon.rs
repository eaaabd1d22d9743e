//! Natural (zero circumferential stress) shape of a tandem balloon.
//!
//! The film runs from the contact point with the super-pressure sphere,
//! at arc length `Rs * beta`, to the apex at arc length `ld`. Both ends are
//! unknown, so `beta` and `ld` are extra unknowns and the equations are
//! written on the basis domain `z` with map slope `c = 2 / (ld - Rs * beta)`.
//! The unknowns are the tangent angle `theta`, `q = 1 / (meridional stress * r)`,
//! and the coordinates `r` and `y`.

use super::{
    DeError, DeProblem, DependentSpec, Discretization, ExtraUnknown, FreeSpec, GridKind, GridSpec, IndependentVar,
    RemovalRule, Residual, SolverConfig,
};
use crate::basis::FamilyKind;
use crate::expr::{parse, Expr};
use crate::multivar::MvConstraint;
use crate::solvers::lstsq;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::{FRAC_PI_2, PI};

/// Atmospheric conditions at one float altitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalloonAtmosphere {
    pub altitude_km: f64,
    /// kg/m^3
    pub density: f64,
    /// Gas mass in the super-pressure balloon, kg.
    pub gas_mass: f64,
    /// m/s^2
    pub gravity: f64,
}

const fn atm(altitude_km: f64, density: f64, gas_mass: f64, gravity: f64) -> BalloonAtmosphere {
    BalloonAtmosphere { altitude_km, density, gas_mass, gravity }
}

/// Venus atmosphere from 52 km to 62 km.
pub const BALLOON_ATMOSPHERE: [BalloonAtmosphere; 11] = [
    atm(52.0, 1.28, 11.62, 8.719),
    atm(53.0, 1.15, 10.74, 8.716),
    atm(54.0, 1.03, 9.97, 8.713),
    atm(55.0, 0.921, 9.29, 8.71),
    atm(56.0, 0.818, 8.67, 8.707),
    atm(57.0, 0.721, 8.12, 8.704),
    atm(58.0, 0.629, 7.58, 8.702),
    atm(59.0, 0.545, 7.14, 8.699),
    atm(60.0, 0.469, 6.812, 8.696),
    atm(61.0, 0.41, 6.675, 8.693),
    atm(62.0, 0.341, 6.2675, 8.69),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalloonConstants {
    /// Zero-pressure film mass per area, kg/m^2.
    pub film: f64,
    /// Super-pressure film mass per area, kg/m^2.
    pub super_film: f64,
    /// kg/mol
    pub gas_molar_mass: f64,
    /// kg/mol
    pub atmosphere_molar_mass: f64,
    /// Payload load divided by gravity, kg.
    pub payload: f64,
    /// Super-pressure sphere radius, m.
    pub super_radius: f64,
}

impl Default for BalloonConstants {
    fn default() -> Self {
        BalloonConstants {
            film: 0.095,
            super_film: 0.215,
            gas_molar_mass: 4e-3,
            atmosphere_molar_mass: 4.34e-2,
            payload: 208.0,
            super_radius: 2.5,
        }
    }
}

/// Scalars of the equations at a given contact angle.
struct Loads {
    y0: f64,
    q0: f64,
    buoyancy: f64,
}

impl BalloonConstants {
    fn loads(&self, a: &BalloonAtmosphere, beta: f64) -> Loads {
        let rs = self.super_radius;
        let y0 = rs * (1.0 - beta.cos());
        let cap_volume = PI / 3.0 * y0 * y0 * (3.0 * rs - y0);
        let volume = 4.0 / 3.0 * PI * rs.powi(3);
        let g = a.gravity;
        let t0 = self.payload * g
            + g * (self.film + self.super_film) * 2.0 * PI * rs * y0
            + g * (cap_volume / volume * a.gas_mass - a.density * cap_volume);
        Loads {
            y0,
            q0: 2.0 * PI * beta.cos() / t0,
            buoyancy: g * a.density * (1.0 - self.gas_molar_mass / self.atmosphere_molar_mass),
        }
    }

    /// Start value of `q` as an expression in `beta`.
    fn q0_expr(&self, a: &BalloonAtmosphere) -> String {
        let rs = self.super_radius;
        let g = a.gravity;
        let y0 = format!("({rs}*(1 - cos(beta)))");
        let cap = format!("(pi/3*{y0}^2*(3*{rs} - {y0}))");
        let volume = 4.0 / 3.0 * PI * rs.powi(3);
        format!(
            "2*pi*cos(beta)/({} + {}*2*pi*{rs}*{y0} + {g}*({cap}/{volume}*{} - {}*{cap}))",
            self.payload * g,
            g * (self.film + self.super_film),
            a.gas_mass,
            a.density
        )
    }
}

type State = [f64; 4];

fn rhs(u: &State, w: f64, b: f64, y0: f64) -> State {
    let [th, q, r, y] = *u;
    [-q * r * w * th.sin() - q * r * b * (y - y0), -q * q * w * r * th.cos(), th.sin(), th.cos()]
}

fn rk4(u: &State, h: f64, w: f64, b: f64, y0: f64) -> State {
    let add = |u: &State, k: &State, s: f64| -> State { std::array::from_fn(|i| u[i] + s * k[i]) };
    let k1 = rhs(u, w, b, y0);
    let k2 = rhs(&add(u, &k1, h / 2.0), w, b, y0);
    let k3 = rhs(&add(u, &k2, h / 2.0), w, b, y0);
    let k4 = rhs(&add(u, &k3, h), w, b, y0);
    std::array::from_fn(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Initial state at the contact point.
fn start(c: &BalloonConstants, a: &BalloonAtmosphere, beta: f64) -> (State, f64, Loads) {
    let l = c.loads(a, beta);
    let rs = c.super_radius;
    ([FRAC_PI_2 - beta, l.q0, rs * beta.sin(), l.y0], rs * beta, l)
}

const SHOOT_STEP: f64 = 1e-3;
const SHOOT_MAX_LENGTH: f64 = 100.0;

/// Integrates until the film turns horizontal at the top or crosses the
/// axis. Positive values measure the radius left when it turns, negative
/// ones the turning left when it crosses; zero is a closed natural shape.
/// Returns the miss and the arc length reached.
fn shooting_miss(c: &BalloonConstants, a: &BalloonAtmosphere, beta: f64) -> Option<(f64, f64)> {
    let (mut u, mut s, l) = start(c, a, beta);
    while s < SHOOT_MAX_LENGTH {
        let next = rk4(&u, SHOOT_STEP, c.film, l.buoyancy, l.y0);
        if next[0] <= -FRAC_PI_2 {
            let f = (u[0] + FRAC_PI_2) / (u[0] - next[0]);
            return Some((u[2] + f * (next[2] - u[2]), s + f * SHOOT_STEP));
        }
        if next[2] <= 0.0 {
            let f = u[2] / (u[2] - next[2]);
            let th = u[0] + f * (next[0] - u[0]);
            return Some((-(th + FRAC_PI_2), s + f * SHOOT_STEP));
        }
        u = next;
        s += SHOOT_STEP;
    }
    None
}

/// Natural shape found by shooting on `beta`: the smallest contact angle
/// whose film closes on the axis exactly as it turns horizontal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootingShape {
    pub beta: f64,
    pub length: f64,
}

pub fn shoot_balloon(c: &BalloonConstants, a: &BalloonAtmosphere) -> Result<ShootingShape, DeError> {
    let fail = || DeError::Invalid(format!("no natural balloon shape found at {} km", a.altitude_km));
    let scan = 200;
    let upper = FRAC_PI_2 - 1e-3;
    let at = |i: usize| 1e-3 + (upper - 1e-3) * i as f64 / scan as f64;
    let mut prev = (at(0), shooting_miss(c, a, at(0)).ok_or_else(fail)?.0);
    for i in 1..=scan {
        let beta = at(i);
        let Some((miss, _)) = shooting_miss(c, a, beta) else { break };
        if prev.1 > 0.0 && miss <= 0.0 {
            let (mut lo, mut hi) = (prev.0, beta);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                match shooting_miss(c, a, mid) {
                    Some((m, _)) if m > 0.0 => lo = mid,
                    Some(_) => hi = mid,
                    None => return Err(fail()),
                }
            }
            let beta = 0.5 * (lo + hi);
            let (_, length) = shooting_miss(c, a, beta).ok_or_else(fail)?;
            return Ok(ShootingShape { beta, length });
        }
        prev = (beta, miss);
    }
    Err(fail())
}

/// States along the shot trajectory at the given arc lengths (ascending).
fn trajectory(c: &BalloonConstants, a: &BalloonAtmosphere, beta: f64, at: &[f64]) -> Vec<State> {
    let (mut u, mut s, l) = start(c, a, beta);
    at.iter()
        .map(|&target| {
            let steps = ((target - s) / SHOOT_STEP).ceil().max(0.0) as usize;
            if steps > 0 {
                let h = (target - s) / steps as f64;
                for _ in 0..steps {
                    u = rk4(&u, h, c.film, l.buoyancy, l.y0);
                }
                s = target;
            }
            u
        })
        .collect()
}

fn ex(src: &str) -> Expr {
    parse(src).unwrap_or_else(|e| panic!("built-in expression `{src}`: {e}"))
}

/// Natural-shape problem at one altitude on `points` CGL nodes with
/// Chebyshev terms up to `degree`, started from a shooting solution.
pub fn balloon_problem(
    c: &BalloonConstants,
    a: &BalloonAtmosphere,
    points: usize,
    degree: usize,
) -> Result<DeProblem, DeError> {
    let shot = shoot_balloon(c, a)?;
    let rs = c.super_radius;
    let b = c.loads(a, 0.0).buoyancy;
    let w = c.film;
    let slope = format!("(2/(ld - {rs}*beta))");
    let y0 = format!("({rs}*(1 - cos(beta)))");
    let free = || FreeSpec::Tensor { family: FamilyKind::Chebyshev, degree, total_degree: None, removal: RemovalRule::Auto };
    let dep = |name: &str, constraints| DependentSpec::new(name, constraints, free());
    let deps = vec![
        dep(
            "theta",
            vec![MvConstraint::point(0, -1.0, ex("pi/2 - beta")), MvConstraint::point(0, 1.0, ex("-pi/2"))],
        ),
        dep("q", vec![MvConstraint::point(0, -1.0, ex(&c.q0_expr(a)))]),
        dep(
            "r",
            vec![MvConstraint::point(0, -1.0, ex(&format!("{rs}*sin(beta)"))), MvConstraint::point(0, 1.0, Expr::num(0.0))],
        ),
        dep("y", vec![MvConstraint::point(0, -1.0, ex(&y0))]),
    ];
    let residuals = [
        format!("{slope}*theta_z + q*r*{w}*sin(theta) + q*r*{b}*(y - {y0})"),
        format!("{slope}*q_z + q^2*{w}*r*cos(theta)"),
        format!("{slope}*r_z - sin(theta)"),
        format!("{slope}*y_z - cos(theta)"),
    ]
    .iter()
    .map(|s| Residual::new(ex(s)))
    .collect();
    let mut problem = DeProblem {
        id: format!("balloon-{}km", a.altitude_km),
        vars: vec![IndependentVar::new("z", -1.0, 1.0)],
        deps,
        residuals,
        grid: GridSpec { points: vec![points], kind: GridKind::Cgl },
        test_points: vec![points],
        extras: vec![
            ExtraUnknown { name: "beta".into(), initial: shot.beta, bounds: None },
            ExtraUnknown { name: "ld".into(), initial: shot.length, bounds: None },
        ],
        solver: SolverConfig { force_nonlinear: true, ..SolverConfig::default() },
        initial: None,
    };
    problem.initial = Some(fit_initial(&problem, c, a, shot)?);
    Ok(problem)
}

/// Coefficients whose expressions match the shot trajectory in the least-squares sense.
fn fit_initial(
    problem: &DeProblem,
    c: &BalloonConstants,
    a: &BalloonAtmosphere,
    shot: ShootingShape,
) -> Result<Vec<f64>, DeError> {
    let disc = Discretization::new(problem)?;
    let zs: Vec<f64> = disc.row_points().take(problem.grid.points[0]).map(|p| p[0]).collect();
    let s0 = c.super_radius * shot.beta;
    let arc: Vec<f64> = zs.iter().map(|z| s0 + (z + 1.0) / 2.0 * (shot.length - s0)).collect();
    let states = trajectory(c, a, shot.beta, &arc);
    let extras = [shot.beta, shot.length];
    let mut unknowns = vec![0.0; disc.n_unknowns()];
    for dep in 0..problem.deps.len() {
        let range = disc.coefficient_range(dep);
        let mut m = DMatrix::zeros(zs.len(), range.len());
        let mut rhs = DVector::zeros(zs.len());
        for (i, z) in zs.iter().enumerate() {
            let form = disc.affine(dep, &[*z], &[0], &extras)?;
            for (k, col) in range.clone().enumerate() {
                m[(i, k)] = form.row[col];
            }
            rhs[i] = states[i][dep] - form.off;
        }
        let xi = lstsq(&m, &rhs, problem.solver.method)?;
        unknowns[range].copy_from_slice(xi.as_slice());
    }
    let n = disc.n_coefficients();
    unknowns[n..].copy_from_slice(&extras);
    Ok(unknowns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shooting_closes_on_the_axis() {
        let c = BalloonConstants::default();
        let a = BALLOON_ATMOSPHERE[0];
        let shot = shoot_balloon(&c, &a).unwrap();
        assert!(shot.beta > 0.85 && shot.beta < 0.95, "{shot:?}");
        let (miss, length) = shooting_miss(&c, &a, shot.beta).unwrap();
        assert!(miss.abs() < 1e-6);
        assert!((length - shot.length).abs() < 1e-12);
    }

    #[test]
    fn start_load_expression_matches_closed_form() {
        let c = BalloonConstants::default();
        for a in BALLOON_ATMOSPHERE {
            let e = ex(&c.q0_expr(&a)).compile(&["beta"]).unwrap();
            for beta in [0.2, 0.7, 1.1] {
                let want = c.loads(&a, beta).q0;
                assert!((e.eval(&[beta]).unwrap() - want).abs() < 1e-15 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn fitted_guess_has_small_residual() {
        let c = BalloonConstants::default();
        let p = balloon_problem(&c, &BALLOON_ATMOSPHERE[0], 40, 30).unwrap();
        let disc = Discretization::new(&p).unwrap();
        let r = disc.residual(&disc.initial_guess().unwrap()).unwrap();
        assert!(r.amax() < 1e-3, "{}", r.amax());
    }
}
