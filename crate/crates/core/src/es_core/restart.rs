//! Budgeted search drivers built on the CMA and NES engines.
//!
//! Engines run in the unit cube and map points into the caller's box, so one
//! initial step size (a quarter of the domain width per coordinate) fits
//! every problem. Each driver spends at most `units` objective calls and, when
//! the budget is not a multiple of the population size, spends the remainder
//! on a final truncated generation that is evaluated but not used for an update.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cma::{CmaOptions, CmaState};
use super::nes::{nes_step, NesState};
use super::sampling::{sample_perturbations, standardize_fitness};
use super::{default_population_size, probe, Mode, Probe};
use crate::error::{Error, EvalError, Result};
use crate::problems::Bounds;

/// Initial step size in unit-cube coordinates.
pub const INITIAL_STEP: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Best evaluated point.
    pub best: Vec<f64>,
    pub value: f64,
    /// Final distribution mean, in domain coordinates.
    pub mean: Vec<f64>,
    pub evaluations: u64,
    pub restarts: usize,
}

/// When to abandon a CMA run and start a fresh one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartPolicy {
    /// `usize::MAX` means restart for as long as budget remains.
    pub max_restarts: usize,
    /// Minimum improvement of the run's best value over the window.
    pub stagnation_tolerance: f64,
    /// Window length in generations.
    pub stagnation_window: usize,
}

impl RestartPolicy {
    /// Tolerance 1e-9, window `10 + ceil(30 n / lambda)`, unlimited restarts.
    pub fn for_dimension(n: usize) -> Self {
        let lambda = default_population_size(n);
        Self {
            max_restarts: usize::MAX,
            stagnation_tolerance: 1e-9,
            stagnation_window: 10 + (30 * n).div_ceil(lambda),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stagnation_window == 0 || !(self.stagnation_tolerance > 0.0) {
            return Err(Error::Config(format!("invalid restart policy {self:?}")));
        }
        Ok(())
    }
}

struct Tracker {
    mode: Mode,
    best: Option<(Vec<f64>, f64)>,
    evaluations: u64,
}

impl Tracker {
    fn new(mode: Mode) -> Self {
        Self { mode, best: None, evaluations: 0 }
    }

    fn record(&mut self, x: &[f64], v: f64) {
        self.evaluations += 1;
        let improves = match &self.best {
            None => true,
            Some((_, b)) => self.mode.better(v, *b),
        };
        if improves {
            self.best = Some((x.to_vec(), v));
        }
    }

    fn finish(self, mean: Vec<f64>, restarts: usize) -> Result<SearchResult, EvalError> {
        let (best, value) = self.best.ok_or(EvalError::BudgetExhausted)?;
        Ok(SearchResult {
            best,
            value,
            mean,
            evaluations: self.evaluations,
            restarts,
        })
    }
}

#[derive(Debug, PartialEq)]
enum SegmentEnd {
    Spent,
    Stagnated,
    Exhausted,
}

/// Runs one CMA instance for at most `units` evaluations.
fn run_segment<F, R>(
    state: &mut CmaState,
    f: &mut F,
    bounds: &Bounds,
    units: u64,
    stagnation: Option<(f64, usize)>,
    tracker: &mut Tracker,
    rng: &mut R,
) -> Result<SegmentEnd, EvalError>
where
    F: FnMut(&[f64]) -> Result<f64, EvalError>,
    R: Rng + ?Sized,
{
    let mode = tracker.mode;
    let mut used = 0u64;
    let mut history: Vec<f64> = Vec::new();
    let mut segment_best = mode.worst();
    while used < units {
        let unit_points = state.ask(rng);
        let affordable = (units - used).min(unit_points.len() as u64) as usize;
        let mut fitness = Vec::with_capacity(affordable);
        for u in &unit_points[..affordable] {
            let x = bounds.from_unit(u);
            match probe(f, &x, mode)? {
                Probe::Value(v) => {
                    used += 1;
                    tracker.record(&x, v);
                    if mode.better(v, segment_best) {
                        segment_best = v;
                    }
                    fitness.push(v);
                }
                Probe::Exhausted => return Ok(SegmentEnd::Exhausted),
            }
        }
        if affordable < unit_points.len() {
            break;
        }
        state
            .tell(&unit_points, &fitness, mode)
            .expect("ask produced lambda points of the right dimension");
        if !state.step_size().is_finite() || state.step_size() <= 0.0 {
            return Ok(SegmentEnd::Stagnated);
        }
        if let Some((tol, window)) = stagnation {
            history.push(segment_best);
            if history.len() > window {
                let old = history[history.len() - 1 - window];
                let gain = match mode {
                    Mode::Maximize => segment_best - old,
                    Mode::Minimize => old - segment_best,
                };
                if !(gain >= tol) {
                    return Ok(SegmentEnd::Stagnated);
                }
            }
        }
    }
    Ok(SegmentEnd::Spent)
}

/// Minimizes with a single CMA-ES run started at `start` (no restarts).
pub fn minimize_cma<F, R>(
    mut f: F,
    bounds: &Bounds,
    start: &[f64],
    units: u64,
    options: &CmaOptions,
    rng: &mut R,
) -> Result<SearchResult, EvalError>
where
    F: FnMut(&[f64]) -> Result<f64, EvalError>,
    R: Rng + ?Sized,
{
    let mut tracker = Tracker::new(Mode::Minimize);
    let mut restarts = 0;
    let mut used_before = 0;
    let mut state = new_unit_state(bounds, &bounds.to_unit(start), options);
    loop {
        let end = run_segment(&mut state, &mut f, bounds, units - used_before, None, &mut tracker, rng)?;
        // A numerically collapsed state is re-seeded at the incumbent; this is
        // repair, not a search restart, but it is still reported.
        if end != SegmentEnd::Stagnated || tracker.evaluations >= units {
            break;
        }
        used_before = tracker.evaluations;
        restarts += 1;
        let anchor = tracker.best.as_ref().map(|b| bounds.to_unit(&b.0)).unwrap_or_else(|| bounds.to_unit(start));
        state = new_unit_state(bounds, &anchor, options);
    }
    let mean = bounds.from_unit(state.mean());
    tracker.finish(mean, restarts)
}

fn new_unit_state(bounds: &Bounds, unit_mean: &[f64], options: &CmaOptions) -> CmaState {
    CmaState::new(unit_mean, INITIAL_STEP, Bounds::unit(bounds.dim()), options).expect("valid CMA configuration")
}

/// Maximizes with CMA-ES, restarting from a uniformly drawn mean whenever the
/// current run's best value stops improving. The first run starts at `start`
/// when given. Returns the best point over all runs.
pub fn maximize_with_restarts<F, R>(
    mut f: F,
    bounds: &Bounds,
    start: Option<&[f64]>,
    units: u64,
    policy: &RestartPolicy,
    rng: &mut R,
) -> Result<SearchResult, EvalError>
where
    F: FnMut(&[f64]) -> Result<f64, EvalError>,
    R: Rng + ?Sized,
{
    let options = CmaOptions::default();
    let unit = Bounds::unit(bounds.dim());
    let mut tracker = Tracker::new(Mode::Maximize);
    let first = match start {
        Some(s) => bounds.to_unit(s),
        None => unit.sample(rng),
    };
    let mut state = new_unit_state(bounds, &first, &options);
    let mut restarts = 0usize;
    loop {
        let left = units - tracker.evaluations;
        let end = run_segment(
            &mut state,
            &mut f,
            bounds,
            left,
            Some((policy.stagnation_tolerance, policy.stagnation_window)),
            &mut tracker,
            rng,
        )?;
        if end != SegmentEnd::Stagnated || tracker.evaluations >= units || restarts >= policy.max_restarts {
            break;
        }
        restarts += 1;
        let fresh = unit.sample(rng);
        state = new_unit_state(bounds, &fresh, &options);
    }
    let mean = bounds.from_unit(state.mean());
    tracker.finish(mean, restarts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NesOptions {
    /// Perturbation scale in unit-cube coordinates.
    pub sigma: f64,
    pub eta: f64,
    /// `None` selects `4 + floor(3 ln n)`, rounded up to even when antithetic.
    pub lambda: Option<usize>,
    pub antithetic: bool,
}

impl Default for NesOptions {
    fn default() -> Self {
        Self {
            sigma: 0.25,
            eta: 1e-4,
            lambda: None,
            antithetic: false,
        }
    }
}

impl NesOptions {
    pub fn population(&self, n: usize) -> usize {
        let base = self.lambda.unwrap_or_else(|| default_population_size(n));
        if self.antithetic {
            base + base % 2
        } else {
            base
        }
    }
}

/// Minimizes by NES gradient steps on standardized, negated objective values.
/// The returned `mean` is the final iterate; `best` is the best sampled point.
pub fn minimize_nes<F, R>(
    mut f: F,
    bounds: &Bounds,
    start: &[f64],
    units: u64,
    options: &NesOptions,
    rng: &mut R,
) -> Result<SearchResult, EvalError>
where
    F: FnMut(&[f64]) -> Result<f64, EvalError>,
    R: Rng + ?Sized,
{
    let n = bounds.dim();
    let unit = Bounds::unit(n);
    let lambda = options.population(n);
    let mut state = NesState::new(unit.projected(&bounds.to_unit(start)), options.sigma, options.eta, lambda, options.antithetic)
        .map_err(|e| EvalError::OutOfDomain(e.to_string()))?;
    let mut tracker = Tracker::new(Mode::Minimize);
    'outer: while tracker.evaluations < units {
        let eps = sample_perturbations(rng, lambda, n, options.antithetic).expect("validated population");
        let affordable = (units - tracker.evaluations).min(lambda as u64) as usize;
        let mut fitness = Vec::with_capacity(affordable);
        for e in &eps[..affordable] {
            let u: Vec<f64> = state.mu.iter().zip(e).map(|(m, ei)| m + state.sigma * ei).collect();
            let x = bounds.from_unit(&u);
            match probe(&mut f, &x, Mode::Minimize)? {
                Probe::Value(v) => {
                    tracker.record(&x, v);
                    fitness.push(-v);
                }
                Probe::Exhausted => break 'outer,
            }
        }
        if fitness.len() >= 2 {
            let shaped = standardize_fitness(&fitness);
            state = nes_step(&state, &shaped, &eps[..fitness.len()], &unit).expect("matching batch");
        }
    }
    let mean = bounds.from_unit(&state.mu);
    tracker.finish(mean, 0)
}
