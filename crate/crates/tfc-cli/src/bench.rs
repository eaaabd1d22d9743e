//! Benchmark suites: fixed sweeps over the built-in problems.

use crate::report::ResultRow;
use clap::ValueEnum;
use tfc_core::desolve::{
    balloon_problem, problems, solve, solve_split, BalloonConstants, DeError, SolveReport, BALLOON_ATMOSPHERE,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    SimplePde,
    SimplePdeSpectral,
    SimplePdeXtfc,
    Wave1d,
    Wave2d,
    Wave2dXtfc,
    BiharmonicCart,
    BiharmonicPolar,
    ConvectionDiffusion,
    Balloon,
}

const POINTS: [usize; 6] = [5, 10, 15, 20, 25, 30];
const DEGREES: [usize; 5] = [5, 10, 15, 20, 25];
/// Neuron counts matching the number of retained Chebyshev terms at each degree.
const SIMPLE_NEURONS: [usize; 5] = [17, 62, 132, 227, 347];
const WAVE2D_DEGREES: [usize; 6] = [3, 6, 9, 12, 15, 18];
const WAVE2D_NEURONS: [usize; 7] = [12, 76, 212, 447, 808, 1322, 650];

type Run = Box<dyn Fn() -> Result<SolveReport, DeError>>;

struct Job {
    id: String,
    m: usize,
    n: usize,
    seed: Option<u64>,
    run: Run,
}

#[derive(Clone, Copy)]
enum Metric {
    MaxError,
    MeanError,
}

/// Jobs sharing a setting; stochastic groups differ only in seed and get a
/// best-of row after the per-seed rows.
struct Group {
    jobs: Vec<Job>,
    best_by: Option<Metric>,
    /// Use the coefficient count of the solve as `m`.
    m_from_report: bool,
}

fn single(id: &str, m: usize, n: usize, run: Run) -> Group {
    Group { jobs: vec![Job { id: id.into(), m, n, seed: None, run }], best_by: None, m_from_report: false }
}

fn triangle() -> impl Iterator<Item = (usize, usize, usize)> {
    POINTS.into_iter().flat_map(|n| DEGREES.into_iter().enumerate().filter(move |(_, m)| *m <= n).map(move |(j, m)| (n, j, m)))
}

fn groups(suite: Suite, seeds: &[u64]) -> Vec<Group> {
    match suite {
        Suite::SimplePde => triangle()
            .map(|(n, _, m)| single("simple-pde", m, n, Box::new(move || solve(&problems::simple_pde(n, m)))))
            .collect(),
        Suite::SimplePdeSpectral => triangle()
            .map(|(n, _, m)| {
                single("simple-pde-spectral", m, n, Box::new(move || solve(&problems::simple_pde_spectral(n, m))))
            })
            .collect(),
        Suite::SimplePdeXtfc => triangle()
            .map(|(n, j, _)| {
                let neurons = SIMPLE_NEURONS[j];
                let jobs = seeds
                    .iter()
                    .map(|&seed| Job {
                        id: "simple-pde-xtfc".into(),
                        m: neurons,
                        n,
                        seed: Some(seed),
                        run: Box::new(move || solve(&problems::simple_pde_xtfc(n, neurons, seed))),
                    })
                    .collect();
                Group { jobs, best_by: Some(Metric::MaxError), m_from_report: false }
            })
            .collect(),
        Suite::Wave1d => vec![single("wave1d", 20, 30, Box::new(|| solve(&problems::wave1d(20, 30))))],
        Suite::Wave2d => WAVE2D_DEGREES
            .into_iter()
            .map(|d| Group { m_from_report: true, ..single("wave2d", d, 11, Box::new(move || solve(&problems::wave2d_tfc(d)))) })
            .collect(),
        Suite::Wave2dXtfc => WAVE2D_NEURONS
            .into_iter()
            .map(|neurons| {
                let jobs = seeds
                    .iter()
                    .map(|&seed| Job {
                        id: "wave2d-xtfc".into(),
                        m: neurons,
                        n: 11,
                        seed: Some(seed),
                        run: Box::new(move || solve(&problems::wave2d_xtfc(neurons, seed))),
                    })
                    .collect();
                Group { jobs, best_by: Some(Metric::MeanError), m_from_report: false }
            })
            .collect(),
        Suite::BiharmonicCart => {
            vec![single("biharmonic-cart", 26, 20, Box::new(|| solve(&problems::biharmonic_cartesian(26, 20))))]
        }
        Suite::BiharmonicPolar => {
            vec![single("biharmonic-polar", 30, 30, Box::new(|| solve(&problems::biharmonic_polar(30, 30))))]
        }
        Suite::ConvectionDiffusion => [1.0, 1e6]
            .into_iter()
            .flat_map(|pe| {
                let tag = if pe == 1.0 { "pe1" } else { "pe1e6" };
                [
                    single(
                        &format!("convection-diffusion-whole-{tag}"),
                        190,
                        200,
                        Box::new(move || solve(&problems::convection_diffusion_whole(pe, 200, 190))),
                    ),
                    single(
                        &format!("convection-diffusion-split-{tag}"),
                        190,
                        200,
                        Box::new(move || solve_split(&problems::convection_diffusion_split(pe, 200, 190))),
                    ),
                ]
            })
            .collect(),
        Suite::Balloon => BALLOON_ATMOSPHERE
            .iter()
            .map(|atm| {
                let atm = *atm;
                let id = format!("balloon-{}km", atm.altitude_km);
                single(&id, 50, 60, Box::new(move || solve(&balloon_problem(&BalloonConstants::default(), &atm, 60, 50)?)))
            })
            .collect(),
    }
}

fn metric(row: &ResultRow, by: Metric) -> f64 {
    let v = match by {
        Metric::MaxError => row.max_error,
        Metric::MeanError => row.mean_error,
    };
    v.filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
}

#[derive(Debug, thiserror::Error)]
#[error("{id} (m={m}, n={n}, seed={seed:?}): {source}")]
pub struct BenchError {
    pub id: String,
    pub m: usize,
    pub n: usize,
    pub seed: Option<u64>,
    pub source: DeError,
}

/// Runs every problem of the suite in order, one row each.
pub fn run_suite(suite: Suite, seeds: &[u64]) -> Result<Vec<ResultRow>, BenchError> {
    let mut rows = Vec::new();
    for group in groups(suite, seeds) {
        let start = rows.len();
        for job in &group.jobs {
            let report = (job.run)().map_err(|source| BenchError {
                id: job.id.clone(),
                m: job.m,
                n: job.n,
                seed: job.seed,
                source,
            })?;
            let m = if group.m_from_report { report.n_coefficients } else { job.m };
            rows.push(ResultRow::from_report(&job.id, m, job.n, job.seed, &report));
        }
        if let Some(by) = group.best_by {
            let best = rows[start..]
                .iter()
                .min_by(|a, b| metric(a, by).total_cmp(&metric(b, by)))
                .cloned();
            if let Some(mut best) = best {
                best.problem.push_str("/best");
                rows.push(best);
            }
        }
    }
    Ok(rows)
}

/// Parses `a..b` (inclusive), a comma-separated list, or a single seed.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("invalid seed list `{spec}` (expected e.g. 0, 0..9 or 1,4,7)");
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}
