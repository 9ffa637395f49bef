//! Fixed-budget experiments: every (problem, algorithm, budget, seed) is a
//! fresh run with exactly that evaluation cap, scored by the regret oracle
//! and appended to a JSONL store.

pub mod cli;
pub mod reports;
pub mod stats;
pub mod store;
pub mod verify;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coevolution::{run_coev_alternating, run_coev_parallel, CoevConfig};
use crate::error::{Error, Result};
use crate::mmde::{run_mmde, MmdeConfig};
use crate::oracle::{Oracle, OracleConfig};
use crate::problems::MinimaxProblem;
use crate::reckless::{resolve_variant, run_reckless, RecklessConfig, Variant};
use crate::seeding::derive_seed;
use crate::trace::RunTrace;
pub use store::{ResultRecord, ResultStore, RunKey, TimingRecord};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "MINIMAX_OUTPUT_DIR";
pub const ORACLE_CACHE_FILE: &str = "oracle_cache.tsv";

/// An algorithm and its settings, written as `reckless:<variant>[:s=<s>]`,
/// `coeva`, `coevp` or `mmde`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algorithm {
    Reckless { variant: Variant, s: f64 },
    CoevA,
    CoevP,
    Mmde,
}

impl Algorithm {
    pub fn reckless(code: &str, s: f64) -> Result<Self> {
        Ok(Algorithm::Reckless { variant: resolve_variant(code)?, s })
    }

    /// Runs the algorithm with evaluation cap `budget` and RNG seed `seed`.
    pub fn solve(&self, problem: &MinimaxProblem, budget: u64, seed: u64) -> Result<RunTrace> {
        match *self {
            Algorithm::Reckless { variant, s } => {
                let cfg = RecklessConfig::new(budget, s, variant, seed);
                Ok(run_reckless(problem, &cfg)?.to_trace(&cfg))
            }
            Algorithm::CoevA => run_coev_alternating(problem, &CoevConfig::new(budget, seed)),
            Algorithm::CoevP => run_coev_parallel(problem, &CoevConfig::new(budget, seed)),
            Algorithm::Mmde => run_mmde(problem, &MmdeConfig::new(budget, seed)),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Reckless { variant, s } if *s == 0.5 => write!(f, "reckless:{variant}"),
            Algorithm::Reckless { variant, s } => write!(f, "reckless:{variant}:s={s}"),
            Algorithm::CoevA => f.write_str("coeva"),
            Algorithm::CoevP => f.write_str("coevp"),
            Algorithm::Mmde => f.write_str("mmde"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(id: &str) -> Result<Self> {
        let lower = id.to_ascii_lowercase();
        match lower.as_str() {
            "coeva" => return Ok(Algorithm::CoevA),
            "coevp" => return Ok(Algorithm::CoevP),
            "mmde" => return Ok(Algorithm::Mmde),
            _ => {}
        }
        let mut parts = id.split(':');
        if !parts.next().is_some_and(|h| h.eq_ignore_ascii_case("reckless")) {
            return Err(Error::Config(format!("unknown algorithm {id:?}")));
        }
        let variant = resolve_variant(parts.next().unwrap_or("CR"))?;
        let mut s = 0.5;
        for extra in parts {
            match extra.strip_prefix("s=").map(str::parse::<f64>) {
                Some(Ok(v)) => s = v,
                _ => return Err(Error::Config(format!("bad algorithm option {extra:?} in {id:?}"))),
            }
        }
        if !(s > 0.0 && s <= 0.5) {
            return Err(Error::Config(format!("descent fraction s = {s} outside (0, 0.5]")));
        }
        Ok(Algorithm::Reckless { variant, s })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEntry {
    pub id: String,
    /// Overrides an `s=` given in the id.
    #[serde(default)]
    pub s: Option<f64>,
}

impl AlgorithmEntry {
    pub fn resolve(&self) -> Result<Algorithm> {
        let algo: Algorithm = self.id.parse()?;
        match (algo, self.s) {
            (Algorithm::Reckless { variant, .. }, Some(s)) => {
                format!("reckless:{variant}:s={s}").parse()
            }
            (_, Some(_)) => Err(Error::Config(format!("option s does not apply to {}", self.id))),
            (a, None) => Ok(a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problems: Vec<String>,
    pub algorithms: Vec<AlgorithmEntry>,
    pub budgets: Vec<u64>,
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub oracle: OracleConfig,
}

fn default_runs() -> u64 {
    60
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Parse { what: path.display().to_string(), message: e.to_string() })?
        } else {
            toml::from_str(&text).map_err(|e| Error::Parse { what: path.display().to_string(), message: e.to_string() })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.problems.is_empty() || self.algorithms.is_empty() || self.budgets.is_empty() {
            return Err(Error::Config("problems, algorithms and budgets must be nonempty".into()));
        }
        if !self.budgets.windows(2).all(|w| w[0] < w[1]) || self.budgets[0] == 0 {
            return Err(Error::Config("budgets must be positive and strictly ascending".into()));
        }
        for p in &self.problems {
            MinimaxProblem::from_id(p)?;
        }
        for a in &self.algorithms {
            a.resolve()?;
        }
        self.oracle.validate()
    }

    /// `output_dir`, unless the environment override is set.
    pub fn effective_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output_dir.clone(),
        }
    }

    /// Every run the sweep consists of, in a fixed order.
    pub fn tasks(&self) -> Result<Vec<(RunKey, Algorithm)>> {
        let mut out = Vec::new();
        for p in &self.problems {
            let id = MinimaxProblem::from_id(p)?.id().to_string();
            for a in &self.algorithms {
                let algo = a.resolve()?;
                for &budget in &self.budgets {
                    for run in 0..self.runs {
                        let key = RunKey { problem: id.clone(), algorithm: algo.to_string(), budget, seed: self.base_seed + run };
                        out.push((key, algo));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// RNG seed of one run: depends on every component of the key, so runs at
/// different budgets never share a stream.
pub fn run_seed(key: &RunKey) -> u64 {
    derive_seed(key.seed, &[&key.problem, &key.algorithm, &key.budget.to_string()])
}

/// Runs one keyed task and scores it with the oracle.
pub fn execute(key: &RunKey, algo: &Algorithm, oracle: &Oracle) -> Result<ResultRecord> {
    let problem = MinimaxProblem::from_id(&key.problem)?;
    let trace = algo.solve(&problem, key.budget, run_seed(key))?;
    let scored = oracle.evaluate(&problem, &trace.result.x, Some(&trace.result.y))?;
    Ok(ResultRecord {
        key: key.clone(),
        x: trace.result.x,
        y: trace.result.y,
        value: trace.result.value,
        inner_max: scored.inner_max,
        regret: scored.regret,
        evaluations: trace.evaluations,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub completed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Oracle for a sweep writing into `dir`; the cache lives next to the results
/// unless the config names another file.
pub fn sweep_oracle(config: &OracleConfig, dir: &Path) -> Result<Oracle> {
    let mut cfg = config.clone();
    if cfg.cache_path.is_none() {
        cfg.cache_path = Some(dir.join(ORACLE_CACHE_FILE));
    }
    Oracle::new(cfg)
}

/// Runs every missing task of the sweep in parallel and appends results to
/// `config.output_dir` in task order. Failed runs are logged and left out of
/// the store.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepSummary> {
    config.validate()?;
    let dir = config.output_dir.clone();
    let store = ResultStore::new(&dir);
    let oracle = sweep_oracle(&config.oracle, &dir)?;
    let done = store.completed()?;
    let (todo, skipped): (Vec<_>, Vec<_>) = config.tasks()?.into_iter().partition(|(k, _)| !done.contains(k));
    let mut summary = SweepSummary { skipped: skipped.len(), ..Default::default() };
    log::info!("{} runs to do, {} already in {}", todo.len(), summary.skipped, dir.display());

    let chunk = (rayon::current_num_threads() * 4).max(1);
    for batch in todo.chunks(chunk) {
        let outcomes: Vec<_> = batch
            .par_iter()
            .map(|(key, algo)| {
                let start = Instant::now();
                let r = execute(key, algo, &oracle);
                (key, r, start.elapsed().as_secs_f64())
            })
            .collect();
        let mut records = Vec::new();
        let mut timings = Vec::new();
        for (key, r, secs) in outcomes {
            match r {
                Ok(rec) => {
                    records.push(rec);
                    timings.push(TimingRecord { key: key.clone(), wall_seconds: secs });
                }
                Err(e) => {
                    log::error!("run {key:?} failed: {e}");
                    summary.failed += 1;
                }
            }
        }
        summary.completed += records.len();
        store.append(&records, &timings)?;
    }
    Ok(summary)
}
