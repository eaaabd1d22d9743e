//! Randomized checks of the constrained-expression identities.
//!
//! Every check draws its case from a seed so the acceptance runner and the
//! proptest suite exercise the same generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfc_core::constraint::{
    apply_operator, condition_number, support_matrix, Constraint, ConstraintOperator, EvalSpec, FnUnivariate,
    ExprUnivariate, SupportBasis, UnivariateCE, Univariate,
};
use tfc_core::expr::{parse, Expr};
use tfc_core::multivar::{Affine, CeOptions, EvalCtx, ExprField, MultivariateCE, MvConstraint, MvTerm, TensorForm};
use tfc_core::quad;

pub enum Outcome {
    Pass,
    /// The drawn case is degenerate (singular or badly conditioned supports).
    Skip,
    Fail(String),
}

pub struct Check {
    pub name: &'static str,
    pub run: fn(u64) -> Outcome,
}

pub const CHECKS: [Check; 7] = [
    Check { name: "constraint satisfaction", run: constraint_satisfaction },
    Check { name: "projection idempotence", run: projection_idempotence },
    Check { name: "support-span null space", run: support_span_null_space },
    Check { name: "switching Kronecker property", run: switching_kronecker },
    Check { name: "multivariate order invariance", run: order_invariance },
    Check { name: "tensor/recursive equivalence", run: tensor_recursive_equivalence },
    Check { name: "integral augmentation zero integrals", run: integral_augmentation },
];

/// Univariate cases whose support matrix is worse than this are skipped.
const MAX_CONDITION: f64 = 1e6;
const UNI_TOL: f64 = 1e-10;
const MULTI_TOL: f64 = 1e-10;
const ZERO_INTEGRAL_TOL: f64 = 1e-12;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coef(r: &mut ChaCha8Rng) -> f64 {
    r.gen_range(-2.0..2.0)
}

fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + scale.abs())
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Outcome::Fail(format!($($msg)*));
        }
    };
}

macro_rules! ok_or_skip {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(_) => return Outcome::Skip,
        }
    };
}

macro_rules! ok_or_fail {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return Outcome::Fail(format!("{}: {e}", stringify!($e))),
        }
    };
}

// ---------------------------------------------------------------- univariate

struct UniCase {
    ce: UnivariateCE,
    g: ExprUnivariate,
}

const LOCATIONS: [f64; 7] = [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];

fn random_operator(r: &mut ChaCha8Rng) -> ConstraintOperator {
    let at = |r: &mut ChaCha8Rng| *LOCATIONS.choose(r).unwrap();
    match r.gen_range(0..5) {
        0 => ConstraintOperator::point(at(r)),
        1 => ConstraintOperator::deriv(r.gen_range(1..=2), at(r)),
        2 => {
            let a = r.gen_range(-1.5..0.5);
            ConstraintOperator::integral(a, a + r.gen_range(0.3..1.5))
        }
        3 => {
            let mut pair = LOCATIONS.choose_multiple(r, 2);
            let (a, b) = (*pair.next().unwrap(), *pair.next().unwrap());
            ConstraintOperator::relative(r.gen_range(0..=1), a, b)
        }
        _ => ConstraintOperator::new(vec![
            EvalSpec::Point { order: r.gen_range(0..=1), at: at(r), coeff: coef(r) },
            EvalSpec::Point { order: r.gen_range(0..=2), at: at(r), coeff: coef(r) },
        ]),
    }
}

fn random_supports(r: &mut ChaCha8Rng, k: usize) -> SupportBasis {
    if r.gen_bool(0.5) {
        return SupportBasis::monomials(k);
    }
    let mut powers: Vec<u32> = (0..(k as u32 + 3)).collect::<Vec<_>>().choose_multiple(r, k).copied().collect();
    powers.sort_unstable();
    SupportBasis::from_powers(&powers)
}

fn random_univariate(r: &mut ChaCha8Rng) -> ExprUnivariate {
    let src = format!(
        "({}) + ({})*x + ({})*x^2 + ({})*x^3 + ({})*sin(({})*x + ({}))",
        coef(r),
        coef(r),
        coef(r),
        coef(r),
        coef(r),
        r.gen_range(0.5..3.0),
        coef(r)
    );
    ExprUnivariate::new(parse(&src).unwrap(), "x")
}

fn uni_case(seed: u64) -> Option<UniCase> {
    let mut r = rng(seed);
    let k = r.gen_range(1..=4);
    let constraints: Vec<Constraint> =
        (0..k).map(|_| Constraint::new(random_operator(&mut r), r.gen_range(-3.0..3.0))).collect();
    let supports = random_supports(&mut r, k);
    let ops: Vec<&ConstraintOperator> = constraints.iter().map(|c| &c.op).collect();
    let s = support_matrix(&ops, &supports).ok()?;
    if !(condition_number(&s) < MAX_CONDITION) {
        return None;
    }
    let ce = UnivariateCE::build(constraints, Some(supports)).ok()?;
    Some(UniCase { ce, g: random_univariate(&mut r) })
}

fn constrained<'a>(ce: &'a UnivariateCE, g: &'a dyn Univariate) -> FnUnivariate<impl Fn(f64, usize) -> f64 + 'a> {
    FnUnivariate(move |x: f64, d: usize| ce.evaluate(g, x, d, None).unwrap())
}

fn sample_points(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-2.0..2.0)).collect()
}

pub fn constraint_satisfaction(seed: u64) -> Outcome {
    let Some(case) = uni_case(seed) else { return Outcome::Skip };
    let y = constrained(&case.ce, &case.g);
    for c in &case.ce.constraints {
        let kappa = c.kappa_value(None).unwrap();
        let got = ok_or_fail!(apply_operator(&c.op, &y));
        let scale = ok_or_fail!(apply_operator(&c.op, &case.g)).abs() + kappa.abs();
        ensure!(close(got, kappa, UNI_TOL, scale), "seed {seed}: {:?} gives {got}, expected {kappa}", c.op);
    }
    Outcome::Pass
}

pub fn projection_idempotence(seed: u64) -> Outcome {
    let Some(case) = uni_case(seed) else { return Outcome::Skip };
    let y = constrained(&case.ce, &case.g);
    let mut r = rng(seed ^ 0x9e37);
    for x in sample_points(&mut r, 10) {
        let once = y.deriv(x, 0).unwrap();
        let twice = ok_or_fail!(case.ce.evaluate(&y, x, 0, None));
        ensure!(close(twice, once, UNI_TOL, once), "seed {seed}: x={x}: {twice} vs {once}");
    }
    Outcome::Pass
}

pub fn support_span_null_space(seed: u64) -> Outcome {
    let Some(case) = uni_case(seed) else { return Outcome::Skip };
    let mut r = rng(seed ^ 0x51ed);
    let beta: Vec<f64> = (0..case.ce.switching.supports.len()).map(|_| coef(&mut r)).collect();
    let supports = case.ce.switching.supports.functions();
    let shifted = FnUnivariate(|x: f64, d: usize| {
        case.g.deriv(x, d).unwrap() + beta.iter().zip(supports).map(|(b, s)| b * s.deriv(x, d).unwrap()).sum::<f64>()
    });
    for x in sample_points(&mut r, 10) {
        for d in 0..=2 {
            let base = ok_or_fail!(case.ce.evaluate(&case.g, x, d, None));
            let moved = ok_or_fail!(case.ce.evaluate(&shifted, x, d, None));
            ensure!(close(moved, base, UNI_TOL, base), "seed {seed}: x={x} d={d}: {moved} vs {base}");
        }
    }
    Outcome::Pass
}

pub fn switching_kronecker(seed: u64) -> Outcome {
    let Some(case) = uni_case(seed) else { return Outcome::Skip };
    let sw = &case.ce.switching;
    for (i, c) in case.ce.constraints.iter().enumerate() {
        for j in 0..sw.len() {
            let v = ok_or_fail!(apply_operator(&c.op, &sw.function(j)));
            let expect = if i == j { 1.0 } else { 0.0 };
            ensure!(close(v, expect, UNI_TOL, 0.0), "seed {seed}: C_{i}[phi_{j}] = {v}");
        }
    }
    Outcome::Pass
}

// -------------------------------------------------------------- multivariate

const VARS: [&str; 3] = ["x", "y", "z"];

/// A smooth function of the first `n` variables, used both as the free
/// function and as the source of consistent constraint values.
fn random_field_source(r: &mut ChaCha8Rng, n: usize) -> String {
    let mut src = format!(
        "({})*sin(({})*x + ({})*y) + ({})*x^2*y + ({})*exp(({})*y)*x + ({})*y^3",
        coef(r),
        r.gen_range(0.5..2.0),
        coef(r),
        coef(r),
        coef(r),
        r.gen_range(-1.0..1.0),
        coef(r)
    );
    if n == 3 {
        src += &format!(" + ({})*x*y*z + ({})*cos(({})*z + x) + ({})*z^2*y", coef(r), coef(r), r.gen_range(0.5..2.0), coef(r));
    }
    src
}

/// Constraint value `sum coeff * d^order F / d var^order` at `var = at`.
fn consistent_kappa(source: &Expr, var: &str, terms: &[(usize, f64, f64)]) -> Expr {
    terms
        .iter()
        .map(|&(order, at, coeff)| {
            Expr::mul(Expr::num(coeff), source.differentiate(var, order).substitute(var, &Expr::num(at)))
        })
        .reduce(Expr::add)
        .unwrap_or(Expr::num(0.0))
}

fn random_terms(r: &mut ChaCha8Rng) -> Vec<(usize, f64, f64)> {
    let at = |r: &mut ChaCha8Rng| *LOCATIONS.choose(r).unwrap();
    match r.gen_range(0..4) {
        0 => vec![(0, at(r), 1.0)],
        1 => vec![(1, at(r), 1.0)],
        2 => {
            let mut pair = LOCATIONS.choose_multiple(r, 2);
            let (a, b) = (*pair.next().unwrap(), *pair.next().unwrap());
            let order = r.gen_range(0..=1);
            vec![(order, a, 1.0), (order, b, -1.0)]
        }
        _ => vec![(0, at(r), coef(r)), (1, at(r), coef(r))],
    }
}

fn names(n: usize) -> Vec<String> {
    VARS[..n].iter().map(|s| s.to_string()).collect()
}

struct MultiCase {
    n: usize,
    constraints: Vec<MvConstraint>,
    free: ExprField,
}

fn multi_case(seed: u64) -> MultiCase {
    let mut r = rng(seed);
    let n = r.gen_range(2..=3);
    let truth = parse(&random_field_source(&mut r, n)).unwrap();
    let mut constraints = Vec::new();
    for dim in 0..n {
        for _ in 0..r.gen_range(1..=2) {
            let terms = random_terms(&mut r);
            let kappa = consistent_kappa(&truth, VARS[dim], &terms);
            let mv_terms = terms
                .iter()
                .map(|&(order, at, coeff)| MvTerm::new(EvalSpec::Point { order, at, coeff }))
                .collect();
            constraints.push(MvConstraint::new(dim, mv_terms, kappa));
        }
    }
    let free = ExprField::new(parse(&random_field_source(&mut r, n)).unwrap(), &names(n), &[]);
    MultiCase { n, constraints, free }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn random_point(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.8..1.8)).collect()
}

fn random_alpha(r: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| r.gen_range(0..=1)).collect()
}

pub fn order_invariance(seed: u64) -> Outcome {
    let case = multi_case(seed);
    let vars = &VARS[..case.n];
    let mut ces = Vec::new();
    for order in permutations(case.n) {
        let options = CeOptions { order: Some(order), ..Default::default() };
        ces.push(ok_or_skip!(MultivariateCE::build(vars, case.constraints.clone(), options)));
    }
    let ctx = EvalCtx::new(&[]);
    let mut r = rng(seed ^ 0x0dd);
    for _ in 0..5 {
        let x = random_point(&mut r, case.n);
        let alpha = random_alpha(&mut r, case.n);
        let base = ok_or_fail!(ces[0].value(&case.free, &x, &alpha, &ctx));
        for ce in &ces[1..] {
            let v = ok_or_fail!(ce.value(&case.free, &x, &alpha, &ctx));
            ensure!(
                close(v, base, MULTI_TOL, base),
                "seed {seed}: order {:?} at {x:?} {alpha:?}: {v} vs {base}",
                ce.order().order
            );
        }
    }
    Outcome::Pass
}

pub fn tensor_recursive_equivalence(seed: u64) -> Outcome {
    let case = multi_case(seed);
    let ce = ok_or_skip!(MultivariateCE::build(&VARS[..case.n], case.constraints, CeOptions::default()));
    let tensor = TensorForm::new(&ce);
    let ctx = EvalCtx::new(&[]);
    let mut r = rng(seed ^ 0x7e5);
    for _ in 0..5 {
        let x = random_point(&mut r, case.n);
        let alpha = random_alpha(&mut r, case.n);
        let recursive = ok_or_fail!(ce.value(&case.free, &x, &alpha, &ctx));
        let mut out = Affine::zeros(0, 0);
        ok_or_fail!(tensor.eval_into(&case.free, &x, &alpha, 1.0, &mut out, &ctx));
        ensure!(close(out.off, recursive, MULTI_TOL, recursive), "seed {seed}: {x:?} {alpha:?}: {} vs {recursive}", out.off);
    }
    Outcome::Pass
}

/// Two variables; the `x` constraints integrate over `y` on `[lower, upper]`,
/// which forces the `y` switching functions to integrate to zero there.
pub fn integral_augmentation(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let truth = parse(&random_field_source(&mut r, 2)).unwrap();
    let f = truth.compile(&["x", "y"]).unwrap();
    let lower = r.gen_range(-1.5..0.0);
    let upper = lower + r.gen_range(0.5..2.0);
    let count = r.gen_range(1..=2);
    let x_locations: Vec<f64> = LOCATIONS.choose_multiple(&mut r, count).copied().collect();
    let x_kappas: Vec<f64> =
        x_locations.iter().map(|&at| quad::integrate(lower, upper, |y| f.eval(&[at, y]).unwrap())).collect();
    let mut constraints: Vec<MvConstraint> = x_locations
        .iter()
        .zip(&x_kappas)
        .map(|(&at, &kappa)| {
            MvConstraint::new(0, vec![MvTerm::new(EvalSpec::point(at)).integrating(1, lower, upper)], Expr::num(kappa))
        })
        .collect();
    let mut y_ops = Vec::new();
    for _ in 0..r.gen_range(1..=2) {
        let terms = random_terms(&mut r);
        let mv_terms = terms.iter().map(|&(order, at, coeff)| MvTerm::new(EvalSpec::Point { order, at, coeff })).collect();
        constraints.push(MvConstraint::new(1, mv_terms, consistent_kappa(&truth, "y", &terms)));
        y_ops.push(terms);
    }
    let ce = ok_or_skip!(MultivariateCE::build(&["x", "y"], constraints, CeOptions::default()));
    ensure!(ce.order().order == vec![0, 1], "seed {seed}: order {:?}", ce.order().order);
    let sw = &ce.dim(1).unwrap().switching;
    let alpha_scale = sw.alpha.amax();
    for j in 0..sw.len() {
        let int = quad::integrate(lower, upper, |y| sw.phi(y, 0).unwrap()[j]);
        ensure!(int.abs() <= ZERO_INTEGRAL_TOL * (1.0 + alpha_scale), "seed {seed}: integral of phi_{j} is {int}");
    }
    // the constraints still hold for an arbitrary free function
    let free = ExprField::new(parse(&random_field_source(&mut r, 2)).unwrap(), &names(2), &[]);
    let ctx = EvalCtx::new(&[]);
    let u = |x: f64, y: f64, alpha: [usize; 2]| ce.value(&free, &[x, y], &alpha, &ctx).unwrap();
    for (&at, &kappa) in x_locations.iter().zip(&x_kappas) {
        let got = quad::integrate(lower, upper, |y| u(at, y, [0, 0]));
        ensure!(close(got, kappa, MULTI_TOL, kappa), "seed {seed}: integral at x={at}: {got} vs {kappa}");
    }
    for x in [-1.3, 0.2, 1.7] {
        for terms in &y_ops {
            let got: f64 = terms.iter().map(|&(order, at, coeff)| coeff * u(x, at, [0, order])).sum();
            let expect: f64 = terms
                .iter()
                .map(|&(order, at, coeff)| {
                    coeff * truth.differentiate("y", order).compile(&["x", "y"]).unwrap().eval(&[x, at]).unwrap()
                })
                .sum();
            ensure!(close(got, expect, MULTI_TOL, expect), "seed {seed}: y constraint at x={x}: {got} vs {expect}");
        }
    }
    Outcome::Pass
}

/// Runs `check` on consecutive seeds until `cases` non-degenerate cases
/// pass, stopping at the first failure. Returns the number of seeds drawn.
pub fn run_cases(check: &Check, first_seed: u64, cases: usize) -> Result<u64, String> {
    let mut accepted = 0;
    let mut seed = first_seed;
    let limit = first_seed + 20 * cases as u64;
    while accepted < cases {
        if seed >= limit {
            return Err(format!("only {accepted} usable cases in {} draws", limit - first_seed));
        }
        match (check.run)(seed) {
            Outcome::Pass => accepted += 1,
            Outcome::Skip => {}
            Outcome::Fail(msg) => return Err(msg),
        }
        seed += 1;
    }
    Ok(seed - first_seed)
}
