//! Command-line front end: solve configured problems, run benchmark suites
//! and extract plot data from reports.

pub mod bench;
pub mod config;
pub mod report;

use bench::{parse_seeds, run_suite, Suite};
use clap::{Parser, Subcommand, ValueEnum};
use config::{Problem, ProblemConfig};
use report::{write_table_file, ReportRecord, ResultRow};
use std::path::{Path, PathBuf};
use tfc_core::desolve::{solve, solve_split};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "TFC_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tfc", version, about = "Least-squares solution of differential equations with embedded constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem described by a TOML config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run a benchmark suite and write its result table as CSV.
    Bench {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        out: PathBuf,
        /// Seeds for random-feature suites: `0`, `0..9` or `1,4,7`.
        #[arg(long, default_value = "0")]
        seeds: String,
    },
    /// Write the test-grid samples of a JSON report as CSV.
    Plotdata {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_ENV}: expected a thread count, got `{v}`"))?;
    // A pool may already exist when called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn cmd_solve(config: &Path, out: &Path, format: Format) -> Result<i32, String> {
    let cfg = ProblemConfig::load(&config.display().to_string()).map_err(|e| e.to_string())?;
    let problem = cfg.build().map_err(|e| format!("{}: {e}", config.display()))?;
    let report = match &problem {
        Problem::Plain(p) => solve(p),
        Problem::Split(p) => solve_split(p),
    }
    .map_err(|e| format!("{}: {e}", problem.id()))?;
    match format {
        Format::Json => ReportRecord::from(&report).write_json(out),
        Format::Csv => {
            let m = report.n_coefficients;
            let row = ResultRow::from_report(&report.problem, m, report.n_rows, Some(cfg.seed), &report);
            write_table_file(&[row], out)
        }
    }
    .map_err(|e| e.to_string())?;
    if report.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "{}: not converged after {} iterations (max residual {:.3e})",
            report.problem, report.iterations, report.max_residual
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn cmd_bench(suite: Suite, out: &Path, seeds: &str) -> Result<i32, String> {
    let seeds = parse_seeds(seeds)?;
    let rows = run_suite(suite, &seeds).map_err(|e| e.to_string())?;
    write_table_file(&rows, out).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

fn cmd_plotdata(report: &Path, out: &Path) -> Result<i32, String> {
    let record = ReportRecord::read_json(report).map_err(|e| e.to_string())?;
    let file = std::fs::File::create(out).map_err(|e| format!("{}: {e}", out.display()))?;
    record.write_samples_csv(std::io::BufWriter::new(file)).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Solve { config, out, format } => cmd_solve(config, out, *format),
        Command::Bench { suite, out, seeds } => cmd_bench(*suite, out, seeds),
        Command::Plotdata { report, out } => cmd_plotdata(report, out),
    });
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}
