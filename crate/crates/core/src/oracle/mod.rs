//! Regret oracle: the largest `L(x, y)` over `y` that an ensemble of
//! independent maximizers can find, optionally memoized on disk.
//!
//! Oracle evaluations never touch an algorithm's budget counter; they are
//! metered separately in [`Oracle::evaluations`].

pub mod cache;
pub mod nelder_mead;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, Result};
use crate::es_core::{maximize_with_restarts, RestartPolicy};
use crate::mmde::de_variation;
use crate::problems::{Bounds, MinimaxProblem};
use crate::seeding::derive_seed;
pub use cache::{CacheKey, OracleCache};
pub use nelder_mead::{nelder_mead, LocalResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    CmaRestarts,
    DifferentialEvolution,
    MultistartLocal,
    /// Only used when the problem has at most two `y` coordinates.
    DenseGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub ensemble: Vec<Member>,
    pub cma_runs: usize,
    /// Evaluations per CMA run; `None` means `max(2000, 1000 n_y)`.
    pub cma_budget: Option<u64>,
    pub de_population: usize,
    pub de_budget: u64,
    pub local_starts: usize,
    /// Evaluations per local start; `None` means `max(500, 200 n_y)`.
    pub local_budget: Option<u64>,
    pub grid_points_1d: usize,
    pub grid_side_2d: usize,
    /// Final Nelder-Mead refinement of the best point found.
    pub polish_budget: u64,
    pub seed: u64,
    pub cache_path: Option<PathBuf>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            ensemble: vec![Member::CmaRestarts, Member::DifferentialEvolution, Member::MultistartLocal, Member::DenseGrid],
            cma_runs: 5,
            cma_budget: None,
            de_population: 20,
            de_budget: 2000,
            local_starts: 20,
            local_budget: None,
            grid_points_1d: 1_000_000,
            grid_side_2d: 2000,
            polish_budget: 2000,
            seed: 0,
            cache_path: None,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("oracle: {m}")));
        if self.ensemble.is_empty() {
            return bad("ensemble is empty");
        }
        if self.ensemble.contains(&Member::CmaRestarts) && self.cma_runs == 0 {
            return bad("cma_runs must be positive");
        }
        if self.ensemble.contains(&Member::DifferentialEvolution) && self.de_population < 4 {
            return bad("de_population must be at least 4");
        }
        if self.ensemble.contains(&Member::MultistartLocal) && self.local_starts == 0 {
            return bad("local_starts must be positive");
        }
        if self.ensemble.contains(&Member::DenseGrid) && (self.grid_points_1d < 2 || self.grid_side_2d < 2) {
            return bad("grid sizes must be at least 2");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub evaluations: u64,
}

/// Inner-max value and, when `L*` is known, the regret.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretValue {
    pub inner_max: f64,
    pub regret: Option<f64>,
}

pub struct Oracle {
    config: OracleConfig,
    cache: OracleCache,
    evaluations: AtomicU64,
}

/// Running maximum over candidate `y` values.
struct Best {
    value: f64,
    y: Vec<f64>,
    evaluations: u64,
}

impl Best {
    fn offer(&mut self, y: &[f64], v: f64) {
        if v > self.value || self.y.is_empty() {
            self.value = v;
            self.y = y.to_vec();
        }
    }
}

impl Oracle {
    pub fn new(config: OracleConfig) -> Result<Self> {
        config.validate()?;
        let cache = match &config.cache_path {
            Some(p) => OracleCache::open(p)?,
            None => OracleCache::in_memory(),
        };
        Ok(Self { config, cache, evaluations: AtomicU64::new(0) })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn cache(&self) -> &OracleCache {
        &self.cache
    }

    /// Objective evaluations spent by this oracle so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// `max_y L(x, y)` as found by the ensemble, memoized per quantized `x`.
    /// `hint` is a known good `y` (for example an algorithm's own worst case);
    /// the result is never below `L(x, hint)`.
    pub fn inner_max(&self, problem: &MinimaxProblem, x: &[f64], hint: Option<&[f64]>) -> Result<f64> {
        check_x(problem, x)?;
        let key = CacheKey::new(problem.id(), x);
        let cached = self.cache.lookup(&key);
        let hinted = match hint {
            Some(h) => {
                self.evaluations.fetch_add(1, Ordering::Relaxed);
                Some(objective(problem, x, &problem.y_bounds().projected(h)))
            }
            None => None,
        };
        if let Some(c) = cached {
            let v = hinted.map_or(c, |h| c.max(h));
            if v > c {
                self.cache.store(key, v)?;
            }
            return Ok(v);
        }
        let full = self.inner_max_uncached(problem, x, hint)?;
        self.cache.store(key, full.value)?;
        Ok(full.value)
    }

    /// Runs the full ensemble without consulting or updating the cache.
    pub fn inner_max_uncached(&self, problem: &MinimaxProblem, x: &[f64], hint: Option<&[f64]>) -> Result<OracleValue> {
        check_x(problem, x)?;
        let c = &self.config;
        let n_y = problem.n_y();
        let yb = problem.y_bounds();
        let key = CacheKey::new(problem.id(), x);
        let label = key.x.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",");
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(c.seed, &["oracle", problem.id(), &label]));
        let mut best = Best { value: f64::NEG_INFINITY, y: Vec::new(), evaluations: 0 };
        let g = |y: &[f64], best: &mut Best| {
            best.evaluations += 1;
            let v = objective(problem, x, y);
            best.offer(y, v);
            v
        };

        if let Some(h) = hint {
            g(&yb.projected(h), &mut best);
        }
        for member in &c.ensemble {
            match member {
                Member::CmaRestarts => {
                    let units = c.cma_budget.unwrap_or_else(|| (1000 * n_y as u64).max(2000));
                    let policy = RestartPolicy::for_dimension(n_y);
                    for _ in 0..c.cma_runs {
                        let r = maximize_with_restarts(|y: &[f64]| Ok(g(y, &mut best)), yb, None, units, &policy, &mut rng);
                        debug_assert!(r.is_ok());
                    }
                }
                Member::DifferentialEvolution => {
                    let mut pop: Vec<Vec<f64>> = (0..c.de_population).map(|_| yb.sample(&mut rng)).collect();
                    let mut fit: Vec<f64> = pop.iter().map(|y| g(y, &mut best)).collect();
                    let mut spent = pop.len() as u64;
                    'de: while spent < c.de_budget {
                        let trials = de_variation(&pop, 0.5, 0.9, yb, &mut rng)?;
                        for (i, t) in trials.into_iter().enumerate() {
                            if spent >= c.de_budget {
                                break 'de;
                            }
                            let v = g(&t, &mut best);
                            spent += 1;
                            if v >= fit[i] {
                                pop[i] = t;
                                fit[i] = v;
                            }
                        }
                    }
                }
                Member::MultistartLocal => {
                    let units = c.local_budget.unwrap_or_else(|| (200 * n_y as u64).max(500));
                    for s in 0..c.local_starts {
                        let start = match (s, hint) {
                            (0, Some(h)) => yb.projected(h),
                            _ => yb.sample(&mut rng),
                        };
                        nelder_mead(|y: &[f64]| -g(y, &mut best), yb, &start, 0.1, units);
                    }
                }
                Member::DenseGrid => match n_y {
                    1 => {
                        let steps = grid_axis(yb, 0, c.grid_points_1d);
                        for v in steps {
                            g(&[v], &mut best);
                        }
                        let step = 2.0 / c.grid_points_1d as f64;
                        let start = best.y.clone();
                        nelder_mead(|y: &[f64]| -g(y, &mut best), yb, &start, step, c.polish_budget);
                    }
                    2 => {
                        let a = grid_axis(yb, 0, c.grid_side_2d);
                        let b = grid_axis(yb, 1, c.grid_side_2d);
                        let mut y = [0.0; 2];
                        for &u in &a {
                            y[0] = u;
                            for &v in &b {
                                y[1] = v;
                                g(&y, &mut best);
                            }
                        }
                        let step = 2.0 / c.grid_side_2d as f64;
                        let start = best.y.clone();
                        nelder_mead(|y: &[f64]| -g(y, &mut best), yb, &start, step, c.polish_budget);
                    }
                    _ => log::debug!("dense grid skipped for n_y = {n_y}"),
                },
            }
        }
        if !best.y.is_empty() && c.polish_budget > 0 {
            let start = best.y.clone();
            nelder_mead(|y: &[f64]| -g(y, &mut best), yb, &start, 1e-3, c.polish_budget);
        }
        self.evaluations.fetch_add(best.evaluations, Ordering::Relaxed);
        Ok(OracleValue { value: best.value, argmax: best.y, evaluations: best.evaluations })
    }

    /// `inner_max(x) - L*` when `L*` is known.
    pub fn regret(&self, problem: &MinimaxProblem, x: &[f64], hint: Option<&[f64]>) -> Result<f64> {
        let reference = problem
            .reference_value()
            .ok_or_else(|| Error::Config(format!("problem {} has no reference value; use inner_max", problem.id())))?;
        Ok(self.inner_max(problem, x, hint)? - reference)
    }

    /// Both terms; `regret` is `None` when `L*` is unknown.
    pub fn evaluate(&self, problem: &MinimaxProblem, x: &[f64], hint: Option<&[f64]>) -> Result<RegretValue> {
        let inner_max = self.inner_max(problem, x, hint)?;
        Ok(RegretValue { inner_max, regret: problem.reference_value().map(|r| inner_max - r) })
    }
}

fn check_x(problem: &MinimaxProblem, x: &[f64]) -> Result<()> {
    if x.len() != problem.n_x() {
        return Err(Error::Dimension { expected: problem.n_x(), got: x.len() });
    }
    if !problem.x_bounds().contains(x) {
        return Err(EvalError::OutOfDomain(format!("x = {x:?} outside the domain of {}", problem.id())).into());
    }
    Ok(())
}

/// `L(x, y)`, with points the objective rejects scored as `-inf`.
fn objective(problem: &MinimaxProblem, x: &[f64], y: &[f64]) -> f64 {
    match problem.value_unchecked(x, y) {
        Ok(v) if !v.is_nan() => v,
        _ => f64::NEG_INFINITY,
    }
}

/// `points` evenly spaced values covering coordinate `i` end to end.
fn grid_axis(b: &Bounds, i: usize, points: usize) -> Vec<f64> {
    let iv = b.intervals()[i];
    let lo = iv.feasible_lo();
    (0..points).map(|k| lo + (iv.hi - lo) * k as f64 / (points - 1) as f64).collect()
}
