//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::reports::{emit_reports, ReportKind};
use super::store::{ResultStore, RunKey};
use super::verify::{descent_agreement, schedule_cells};
use super::{execute, run_experiment, Algorithm, ExperimentConfig, OUTPUT_DIR_ENV};
use crate::error::{Error, Result};
use crate::oracle::{Oracle, OracleConfig};
use crate::problems::{manifest_json, MinimaxProblem};

/// Exit status for malformed input.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for runtime failures.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "minimax", version, about = "Evolution-strategy minimax solvers and benchmark harness")]
pub struct Cli {
    /// Worker threads for `run` (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Convergence,
    Scalability,
    Variants,
    Cd,
}

impl From<KindArg> for ReportKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Convergence => ReportKind::Convergence,
            KindArg::Scalability => ReportKind::Scalability,
            KindArg::Variants => ReportKind::Variants,
            KindArg::Cd => ReportKind::Cd,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment sweep from a TOML or JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run one algorithm on one problem and print the result record.
    Solve {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value = "reckless:CR")]
        algo: String,
        #[arg(long)]
        fes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Oracle estimate of max_y L(x, y) and the regret of x.
    Regret {
        #[arg(long)]
        problem: String,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Optional known worst-case y, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        hint: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write CSV/JSON reports from the results of an earlier `run`.
    Report {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Directory holding results.jsonl; reports go to its `reports/` subdirectory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check the schedule table and the descent-direction estimator.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 100_000)]
        lambda: usize,
    },
    /// Print the problem manifest as JSON.
    Problems,
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse { what: format!("coordinate {t:?}"), message: e.to_string() })
        })
        .collect()
}

fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::UnknownProblem(_) | Error::Dimension { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit status.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Run { config, output_dir } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.output_dir = output_dir.unwrap_or_else(|| cfg.effective_output_dir());
            let summary = match cli.threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?
                    .install(|| run_experiment(&cfg)),
                None => run_experiment(&cfg),
            }?;
            writeln!(out, "{}", serde_json::to_string(&summary)?)?;
            Ok(if summary.failed > 0 { EXIT_FAILURE } else { 0 })
        }
        Command::Solve { problem, algo, fes, seed } => {
            let p = MinimaxProblem::from_id(&problem)?;
            let a: Algorithm = algo.parse()?;
            let key = RunKey { problem: p.id().to_string(), algorithm: a.to_string(), budget: fes, seed };
            let oracle = Oracle::new(OracleConfig::default())?;
            let rec = execute(&key, &a, &oracle)?;
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
            Ok(0)
        }
        Command::Regret { problem, x, hint, seed } => {
            let p = MinimaxProblem::from_id(&problem)?;
            let x = parse_vector(&x)?;
            let hint = hint.as_deref().map(parse_vector).transpose()?;
            let oracle = Oracle::new(OracleConfig { seed, ..OracleConfig::default() })?;
            let v = oracle.evaluate(&p, &x, hint.as_deref())?;
            writeln!(out, "{}", serde_json::to_string(&v)?)?;
            Ok(0)
        }
        Command::Report { kind, output_dir: dir } => {
            let dir = output_dir(dir);
            let records = ResultStore::new(&dir).load()?;
            let paths = emit_reports(&records, kind.into(), &dir.join("reports"))?;
            for p in paths {
                writeln!(out, "{}", p.display())?;
            }
            Ok(0)
        }
        Command::Verify { seed, points, lambda } => {
            let mut ok = true;
            writeln!(out, "schedule table (population 8):")?;
            for c in schedule_cells() {
                let got = c.got.map(|g| format!("{} {} {}", g.iterations, g.inner_fes, g.outer_fes)).unwrap_or_else(|| "error".into());
                writeln!(out, "  FEs={:<7} s={:.1}  T inner outer = {got}  {}", c.total_fes, c.s, if c.ok() { "ok" } else { "MISMATCH" })?;
                ok &= c.ok();
            }
            writeln!(out, "descent direction vs finite differences (sigma 1e-3, lambda {lambda}):")?;
            let oracle = Oracle::new(OracleConfig { seed, ..OracleConfig::default() })?;
            for p in [MinimaxProblem::l1(3), MinimaxProblem::l5(), MinimaxProblem::l6()] {
                let cases = descent_agreement(&p, &oracle, points, 1e-3, lambda, seed)?;
                let good = cases.iter().filter(|c| c.cosine > 0.95).count();
                let min = cases.iter().map(|c| c.cosine).fold(f64::INFINITY, f64::min);
                let pass = good * 20 >= points * 19;
                writeln!(out, "  {:<3} {good}/{points} above 0.95 (min cosine {min:.4})  {}", p.id(), if pass { "ok" } else { "FAIL" })?;
                ok &= pass;
            }
            Ok(if ok { 0 } else { EXIT_FAILURE })
        }
        Command::Problems => {
            writeln!(out, "{}", manifest_json()?)?;
            Ok(0)
        }
    }
}
