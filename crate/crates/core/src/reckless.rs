//! RECKLESS: alternate a restarting inner maximization with a short outer
//! descent step, keep the best pre-descent iterate, and optionally restart
//! when successive displacements stop pointing the same way.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, Result};
use crate::es_core::{
    default_population_size, maximize_with_restarts, minimize_cma, minimize_nes, CmaOptions, NesOptions, RestartPolicy,
};
use crate::problems::{BudgetCounter, MinimaxProblem};
use crate::trace::{RunTrace, SolutionRecord};

/// Number of extra model evaluations per iteration the schedule reserves room for.
const SCHEDULE_SLOTS: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Nes,
    Cma,
}

/// Algorithm variant, written as a letter code such as "CR" or "ACR".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Variant {
    pub engine: Engine,
    /// Antithetic sampling for NES, mirrored sampling for CMA.
    pub antithetic: bool,
    pub powell_restart: bool,
}

impl Variant {
    pub fn code(&self) -> String {
        let mut s = String::new();
        if self.antithetic {
            s.push('A');
        }
        s.push(match self.engine {
            Engine::Nes => 'N',
            Engine::Cma => 'C',
        });
        if self.powell_restart {
            s.push('R');
        }
        s
    }

    /// All eight variants.
    pub fn all() -> Vec<Variant> {
        let mut out = Vec::new();
        for engine in [Engine::Nes, Engine::Cma] {
            for antithetic in [false, true] {
                for powell_restart in [false, true] {
                    out.push(Variant { engine, antithetic, powell_restart });
                }
            }
        }
        out
    }
}

/// Parses a variant code: letters from {A, N, C, R} in any order, exactly one of N or C.
pub fn resolve_variant(code: &str) -> Result<Variant> {
    let bad = |why: &str| Error::Config(format!("variant code {code:?}: {why}"));
    let (mut a, mut n, mut c, mut r) = (false, false, false, false);
    for ch in code.chars() {
        let slot = match ch.to_ascii_uppercase() {
            'A' => &mut a,
            'N' => &mut n,
            'C' => &mut c,
            'R' => &mut r,
            other => return Err(bad(&format!("unknown letter {other:?}"))),
        };
        if *slot {
            return Err(bad("repeated letter"));
        }
        *slot = true;
    }
    let engine = match (n, c) {
        (true, false) => Engine::Nes,
        (false, true) => Engine::Cma,
        _ => return Err(bad("needs exactly one of N or C")),
    };
    Ok(Variant { engine, antithetic: a, powell_restart: r })
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        resolve_variant(s)
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        resolve_variant(&s)
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.code()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub iterations: u64,
    pub per_iteration: u64,
    pub inner_fes: u64,
    pub outer_fes: u64,
}

impl Schedule {
    /// Budget left after `iterations` full iterations.
    pub fn leftover(&self, total_fes: u64) -> u64 {
        total_fes - self.iterations * (self.inner_fes + self.outer_fes)
    }
}

/// Iteration count and per-iteration split for a problem of the given dimensions.
pub fn budget_schedule(total_fes: u64, s: f64, n_x: usize, n_y: usize) -> Result<Schedule> {
    budget_schedule_with_populations(total_fes, s, default_population_size(n_y), default_population_size(n_x))
}

/// Same as [`budget_schedule`] with explicit inner (`lambda_inner`) and outer
/// population sizes.
pub fn budget_schedule_with_populations(total_fes: u64, s: f64, lambda_inner: usize, lambda_outer: usize) -> Result<Schedule> {
    if !(s > 0.0 && s <= 0.5) {
        return Err(Error::Config(format!("descent fraction s = {s} outside (0, 0.5]")));
    }
    let per = SCHEDULE_SLOTS * (lambda_inner as f64 + 2.0 * s * lambda_outer as f64);
    let iterations = (total_fes as f64 / per).sqrt().floor() as u64;
    if iterations == 0 {
        return Err(Error::Config(format!(
            "total_fes = {total_fes} too small for one iteration (needs at least {})",
            per.ceil()
        )));
    }
    let share = total_fes as f64 / iterations as f64;
    Ok(Schedule {
        iterations,
        per_iteration: total_fes / iterations,
        inner_fes: ((1.0 - s) * share + 1e-9).floor() as u64,
        outer_fes: (s * share + 1e-9).floor() as u64,
    })
}

/// True when the last displacement does not continue the previous one.
pub fn powell_restart_check(x_t: &[f64], x_prev: &[f64], x_prev2: &[f64]) -> bool {
    let dot: f64 = x_t
        .iter()
        .zip(x_prev)
        .zip(x_prev2)
        .map(|((a, b), c)| (a - b) * (b - c))
        .sum();
    dot <= 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecklessConfig {
    pub total_fes: u64,
    #[serde(default = "default_s")]
    pub s: f64,
    pub variant: Variant,
    pub seed: u64,
    /// Starting point; drawn uniformly when absent.
    #[serde(default)]
    pub initial: Option<(Vec<f64>, Vec<f64>)>,
    #[serde(default)]
    pub nes: NesOptions,
}

fn default_s() -> f64 {
    0.5
}

impl RecklessConfig {
    pub fn new(total_fes: u64, s: f64, variant: Variant, seed: u64) -> Self {
        Self {
            total_fes,
            s,
            variant,
            seed,
            initial: None,
            nes: NesOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub t: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `L(x_{t-1}, y_t)`, the value used for the best-solution update.
    pub value: f64,
    pub budget_used: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecklessTrajectory {
    pub schedule: Schedule,
    pub iterates: Vec<IterateRecord>,
    /// Iterations after which a restart was applied.
    pub restarts: Vec<u64>,
    /// Successive improvements of the best solution.
    pub history: Vec<SolutionRecord>,
    pub best: SolutionRecord,
    pub evaluations: u64,
}

impl RecklessTrajectory {
    /// Best-so-far history and final best as a [`RunTrace`].
    pub fn to_trace(&self, config: &RecklessConfig) -> RunTrace {
        RunTrace {
            algorithm: format!("reckless:{}", config.variant),
            seed: config.seed,
            cap: config.total_fes,
            evaluations: self.evaluations,
            history: self.history.clone(),
            result: self.best.clone(),
        }
    }
}

/// Runs RECKLESS with an RNG seeded from `config.seed`.
pub fn run_reckless(problem: &MinimaxProblem, config: &RecklessConfig) -> Result<RecklessTrajectory> {
    let schedule = budget_schedule(config.total_fes, config.s, problem.n_x(), problem.n_y())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut x, mut y) = match &config.initial {
        Some((x0, y0)) => {
            for (v, b, what) in [(x0, problem.x_bounds(), "x"), (y0, problem.y_bounds(), "y")] {
                if v.len() != b.dim() {
                    return Err(Error::Dimension { expected: b.dim(), got: v.len() });
                }
                if !b.contains(v) {
                    return Err(Error::Config(format!("initial {what} outside the domain")));
                }
            }
            (x0.clone(), y0.clone())
        }
        None => (problem.x_bounds().sample(&mut rng), problem.y_bounds().sample(&mut rng)),
    };
    let policy = RestartPolicy::for_dimension(problem.n_y());
    let cma_options = CmaOptions { lambda: None, mirrored: config.variant.antithetic };
    let nes_options = NesOptions { antithetic: config.variant.antithetic, ..config.nes.clone() };

    let mut budget = BudgetCounter::new(config.total_fes);
    let mut history: Vec<SolutionRecord> = Vec::new();
    let mut iterates = Vec::with_capacity(schedule.iterations as usize);
    let mut restarts = Vec::new();
    // Last three outer iterates since the last restart.
    let mut recent: Vec<Vec<f64>> = vec![x.clone()];
    let leftover = schedule.leftover(config.total_fes);

    for t in 1..=schedule.iterations {
        let inner_units = schedule.inner_fes + if t == schedule.iterations { leftover } else { 0 };
        let x_prev = x.clone();
        let inner = maximize_with_restarts(
            |yy: &[f64]| problem.evaluate(&x_prev, yy, &mut budget),
            problem.y_bounds(),
            Some(&y),
            inner_units,
            &policy,
            &mut rng,
        );
        let inner = match inner {
            Ok(r) => r,
            Err(EvalError::BudgetExhausted) => break,
            Err(e) => return Err(e.into()),
        };
        y = inner.best;
        let value = inner.value;
        if value.is_finite() {
            let record = SolutionRecord { x: x_prev.clone(), y: y.clone(), value, budget_used: budget.used() };
            RunTrace::offer(&mut history, record);
        }

        let y_t = y.clone();
        let outer = {
            let f = |xx: &[f64]| problem.evaluate(xx, &y_t, &mut budget);
            match config.variant.engine {
                Engine::Cma => minimize_cma(f, problem.x_bounds(), &x_prev, schedule.outer_fes, &cma_options, &mut rng)
                    .map(|r| r.best),
                Engine::Nes => minimize_nes(f, problem.x_bounds(), &x_prev, schedule.outer_fes, &nes_options, &mut rng)
                    .map(|r| r.mean),
            }
        };
        match outer {
            Ok(next) => x = next,
            Err(EvalError::BudgetExhausted) => {}
            Err(e) => return Err(e.into()),
        }

        recent.push(x.clone());
        if config.variant.powell_restart && recent.len() >= 3 {
            let k = recent.len();
            if powell_restart_check(&recent[k - 1], &recent[k - 2], &recent[k - 3]) {
                x = problem.x_bounds().sample(&mut rng);
                y = problem.y_bounds().sample(&mut rng);
                restarts.push(t);
                recent = vec![x.clone()];
            }
        }
        if recent.len() > 3 {
            recent.remove(0);
        }
        iterates.push(IterateRecord { t, x: x.clone(), y: y.clone(), value, budget_used: budget.used() });
    }

    let best = history
        .last()
        .cloned()
        .ok_or_else(|| Error::Config("no iteration completed within the budget".into()))?;
    Ok(RecklessTrajectory { schedule, iterates, restarts, history, best, evaluations: budget.used() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_table_fixture() {
        // (total, s, T, inner, outer) at inner/outer population 8.
        let rows = [
            (100_000, 0.1, 41, 2195, 243),
            (100_000, 0.2, 38, 2105, 526),
            (100_000, 0.3, 36, 1944, 833),
            (100_000, 0.4, 34, 1764, 1176),
            (100_000, 0.5, 32, 1562, 1562),
            (100, 0.1, 1, 90, 10),
            (100, 0.2, 1, 80, 20),
            (100, 0.3, 1, 70, 30),
            (100, 0.4, 1, 60, 40),
            (100, 0.5, 1, 50, 50),
        ];
        for (total, s, t, inner, outer) in rows {
            let sch = budget_schedule_with_populations(total, s, 8, 8).unwrap();
            assert_eq!((sch.iterations, sch.inner_fes, sch.outer_fes), (t, inner, outer), "{total} {s}");
        }
    }

    #[test]
    fn schedule_matches_independent_formula() {
        for total in [60u64, 100, 999, 12_345, 100_000, 1_000_000] {
            for s in [0.1, 0.25, 0.3, 0.5] {
                for (nx, ny) in [(1, 1), (3, 3), (5, 5), (9, 1), (20, 20)] {
                    let l1 = 4.0 + (3.0 * (ny as f64).ln()).floor();
                    let l2 = 4.0 + (3.0 * (nx as f64).ln()).floor();
                    let t = (total as f64 / (6.0 * (l1 + 2.0 * s * l2))).sqrt().floor() as u64;
                    match budget_schedule(total, s, nx, ny) {
                        Ok(sch) => {
                            assert_eq!(sch.iterations, t);
                            let v = total / t;
                            assert_eq!(sch.per_iteration, v);
                            assert!(t * v <= total && total < (t + 1) * v + t);
                            assert!(sch.inner_fes + sch.outer_fes <= v + 1);
                            assert!(sch.inner_fes + sch.outer_fes + sch.leftover(total) / t.max(1) + 2 >= v);
                        }
                        Err(_) => assert_eq!(t, 0),
                    }
                }
            }
        }
    }

    #[test]
    fn schedule_errors() {
        assert!(budget_schedule(10, 0.5, 5, 5).is_err());
        assert!(budget_schedule(1000, 0.0, 1, 1).is_err());
        assert!(budget_schedule(1000, 0.6, 1, 1).is_err());
    }

    #[test]
    fn powell_examples() {
        assert!(!powell_restart_check(&[2.0], &[1.0], &[0.0]));
        assert!(powell_restart_check(&[0.0], &[1.0], &[0.0]));
        assert!(powell_restart_check(&[1.0], &[1.0], &[0.0]));
    }

    #[test]
    fn variant_codes() {
        assert_eq!(resolve_variant("CR").unwrap(), Variant { engine: Engine::Cma, antithetic: false, powell_restart: true });
        assert_eq!(resolve_variant("N").unwrap(), Variant { engine: Engine::Nes, antithetic: false, powell_restart: false });
        assert_eq!(resolve_variant("AN").unwrap(), Variant { engine: Engine::Nes, antithetic: true, powell_restart: false });
        assert_eq!(resolve_variant("RCA").unwrap().code(), "ACR");
        for bad in ["", "NC", "X", "CC", "AR"] {
            assert!(resolve_variant(bad).is_err(), "{bad}");
        }
        let all = Variant::all();
        assert_eq!(all.len(), 8);
        for v in all {
            assert_eq!(resolve_variant(&v.code()).unwrap(), v);
        }
        let json = serde_json::to_string(&resolve_variant("ANR").unwrap()).unwrap();
        assert_eq!(json, "\"ANR\"");
    }

    #[test]
    fn deterministic_and_budget_exact() {
        let p = MinimaxProblem::l1(3);
        for code in ["CR", "N", "ANR", "AC"] {
            let cfg = RecklessConfig::new(5_000, 0.3, resolve_variant(code).unwrap(), 11);
            let a = run_reckless(&p, &cfg).unwrap();
            let b = run_reckless(&p, &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.evaluations, 5_000, "{code}");
            assert!(a.iterates.windows(2).all(|w| w[0].budget_used < w[1].budget_used));
            let min = a.iterates.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
            assert_eq!(a.best.value, min);
            assert!(p.x_bounds().contains(&a.best.x) && p.y_bounds().contains(&a.best.y));
        }
    }

    #[test]
    fn restart_guard_spacing() {
        let p = MinimaxProblem::l5();
        let cfg = RecklessConfig::new(20_000, 0.5, resolve_variant("CR").unwrap(), 3);
        let tr = run_reckless(&p, &cfg).unwrap();
        // No check at t = 1, and after a restart at t the next check is at t + 2.
        assert!(tr.restarts.iter().all(|&t| t >= 2));
        assert!(tr.restarts.windows(2).all(|w| w[1] >= w[0] + 2));
    }

    #[test]
    fn saddle_start_keeps_saddle_value() {
        let p = MinimaxProblem::l6();
        let mut cfg = RecklessConfig::new(10_000, 0.5, resolve_variant("C").unwrap(), 5);
        cfg.initial = Some((vec![1.0, 1.0], vec![0.0, 0.0]));
        let tr = run_reckless(&p, &cfg).unwrap();
        assert!((tr.iterates[0].value - 1.0).abs() < 1e-12);
        assert!(tr.best.value <= 1.0 + 1e-12);
        let mut running = f64::INFINITY;
        for it in &tr.iterates {
            running = running.min(it.value);
            assert!(running >= tr.best.value);
        }
    }

    #[test]
    fn rejects_bad_initial_point() {
        let p = MinimaxProblem::l6();
        let mut cfg = RecklessConfig::new(10_000, 0.5, resolve_variant("C").unwrap(), 5);
        cfg.initial = Some((vec![1.0], vec![0.0, 0.0]));
        assert!(run_reckless(&p, &cfg).is_err());
        cfg.initial = Some((vec![9.0, 1.0], vec![0.0, 0.0]));
        assert!(run_reckless(&p, &cfg).is_err());
    }
}
