//! Differential-evolution minimax baseline with bottom-boosting.
//!
//! This is a reconstruction from a short prose description, not a port of
//! the original MMDE. Candidates carry a worst-case estimate: the maximum of
//! `L(x, y)` over the `y` values tried so far for that `x`. New trial vectors
//! are estimated cheaply against a small archive of worst cases found for
//! earlier incumbents. Only the candidate at the bottom of a min-heap (the
//! most promising one) gets its estimate refined by a real inner
//! maximization, and a bottom candidate is trusted once it has received `Ks`
//! refinement evaluations.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, Result};
use crate::es_core::{maximize_with_restarts, RestartPolicy};
use crate::problems::{Bounds, BudgetCounter, MinimaxProblem};
use crate::trace::{RunTrace, SolutionRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmdeConfig {
    pub population_size: usize,
    /// Differential weight.
    pub f: f64,
    pub crossover_prob: f64,
    /// Refinement evaluations a bottom candidate needs before it is accepted.
    pub ks: u64,
    /// Evaluations per refinement burst; `None` means `ks / 5`.
    pub burst: Option<u64>,
    pub archive_size: usize,
    pub max_evaluations: u64,
    pub seed: u64,
}

impl Default for MmdeConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            f: 0.7,
            crossover_prob: 0.5,
            ks: 190,
            burst: None,
            archive_size: 5,
            max_evaluations: 100_000,
            seed: 0,
        }
    }
}

impl MmdeConfig {
    pub fn new(max_evaluations: u64, seed: u64) -> Self {
        Self { max_evaluations, seed, ..Self::default() }
    }

    pub fn burst_size(&self) -> u64 {
        self.burst.unwrap_or(self.ks / 5).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("mmde: {m}")));
        if self.population_size < 4 {
            return bad("population_size must be at least 4");
        }
        if !(0.0..=2.0).contains(&self.f) || !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("f must be in [0, 2] and crossover_prob in [0, 1]");
        }
        if self.ks == 0 || self.archive_size == 0 {
            return bad("ks and archive_size must be positive");
        }
        Ok(())
    }
}

/// DE/rand/1/bin: one trial per member, clamped to `bounds`.
pub fn de_variation<R: Rng + ?Sized>(
    pop: &[Vec<f64>],
    f: f64,
    cr: f64,
    bounds: &Bounds,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let n = pop.len();
    if n < 4 {
        return Err(Error::Config(format!("DE needs at least 4 members, got {n}")));
    }
    let dim = bounds.dim();
    let mut trials = Vec::with_capacity(n);
    for (i, target) in pop.iter().enumerate() {
        let mut pick = |taken: &[usize]| loop {
            let r = rng.random_range(0..n);
            if r != i && !taken.contains(&r) {
                break r;
            }
        };
        let r1 = pick(&[]);
        let r2 = pick(&[r1]);
        let r3 = pick(&[r1, r2]);
        let j_rand = rng.random_range(0..dim);
        let mut trial: Vec<f64> = (0..dim)
            .map(|j| {
                if j == j_rand || rng.random::<f64>() < cr {
                    pop[r1][j] + f * (pop[r2][j] - pop[r3][j])
                } else {
                    target[j]
                }
            })
            .collect();
        bounds.project(&mut trial);
        trials.push(trial);
    }
    Ok(trials)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeapEntry {
    pub x: Vec<f64>,
    /// Max of `L(x, y)` over every `y` tried for this `x`.
    pub worst_case_estimate: f64,
    pub worst_y: Vec<f64>,
    pub refinement_evals: u64,
}

/// Binary min-heap on `worst_case_estimate`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MinHeap {
    entries: Vec<HeapEntry>,
}

impl MinHeap {
    pub fn from_entries(entries: Vec<HeapEntry>) -> Self {
        let mut h = Self { entries };
        for i in (0..h.entries.len() / 2).rev() {
            h.sift_down(i);
        }
        h
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[HeapEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<HeapEntry> {
        self.entries
    }

    pub fn peek(&self) -> Option<&HeapEntry> {
        self.entries.first()
    }

    pub fn push(&mut self, e: HeapEntry) {
        self.entries.push(e);
        let mut i = self.entries.len() - 1;
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.less(i, parent) {
                self.entries.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    pub fn pop(&mut self) -> Option<HeapEntry> {
        if self.entries.is_empty() {
            return None;
        }
        let last = self.entries.len() - 1;
        self.entries.swap(0, last);
        let top = self.entries.pop();
        if !self.entries.is_empty() {
            self.sift_down(0);
        }
        top
    }

    /// True when every parent is no greater than its children.
    pub fn is_valid_heap(&self) -> bool {
        (1..self.entries.len()).all(|i| !self.less(i, (i - 1) / 2))
    }

    fn less(&self, a: usize, b: usize) -> bool {
        self.entries[a].worst_case_estimate.total_cmp(&self.entries[b].worst_case_estimate).is_lt()
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.entries.len();
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut m = i;
            if l < n && self.less(l, m) {
                m = l;
            }
            if r < n && self.less(r, m) {
                m = r;
            }
            if m == i {
                break;
            }
            self.entries.swap(i, m);
            i = m;
        }
    }
}

/// Worst case of `x` over `ys`; `None` when the budget runs out.
fn estimate(
    problem: &MinimaxProblem,
    x: &[f64],
    ys: &[Vec<f64>],
    budget: &mut BudgetCounter,
) -> Result<Option<(f64, Vec<f64>)>, EvalError> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for y in ys {
        let v = match problem.evaluate(x, y, budget) {
            Ok(v) => v,
            Err(EvalError::Numeric(_)) => f64::INFINITY,
            Err(EvalError::BudgetExhausted) => return Ok(None),
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, y.clone()));
        }
    }
    Ok(best)
}

/// Refines the bottom of the heap until the bottom entry has `ks`
/// refinement evaluations, and returns a copy of it. Each step pops the
/// minimum, runs a CMA burst of at most `burst` evaluations on `y` started at
/// the entry's worst `y`, raises the estimate if the burst found a larger
/// value, and pushes the entry back. Returns `None` if the budget runs out first.
pub fn bottom_boost_refine<R: Rng + ?Sized>(
    heap: &mut MinHeap,
    problem: &MinimaxProblem,
    budget: &mut BudgetCounter,
    burst: u64,
    ks: u64,
    rng: &mut R,
) -> Result<Option<HeapEntry>, EvalError> {
    let policy = RestartPolicy::for_dimension(problem.n_y());
    loop {
        let bottom = heap.peek().expect("heap is nonempty");
        if bottom.refinement_evals >= ks {
            return Ok(Some(bottom.clone()));
        }
        let units = burst.min(ks - bottom.refinement_evals).min(budget.remaining());
        if units == 0 {
            return Ok(None);
        }
        let mut e = heap.pop().expect("peeked");
        let x = e.x.clone();
        let found = maximize_with_restarts(
            |y: &[f64]| problem.evaluate(&x, y, budget),
            problem.y_bounds(),
            Some(&e.worst_y),
            units,
            &policy,
            rng,
        );
        let exhausted = match found {
            Ok(r) => {
                e.refinement_evals += r.evaluations;
                if r.value > e.worst_case_estimate {
                    e.worst_case_estimate = r.value;
                    e.worst_y = r.best;
                }
                r.evaluations < units
            }
            Err(EvalError::BudgetExhausted) => true,
            Err(err) => return Err(err),
        };
        heap.push(e);
        if exhausted {
            return Ok(None);
        }
    }
}

/// Runs the DE loop until the evaluation cap. The result is the accepted
/// incumbent with the lowest refined worst-case estimate.
pub fn run_mmde(problem: &MinimaxProblem, config: &MmdeConfig) -> Result<RunTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut budget = BudgetCounter::new(config.max_evaluations);
    let mut archive: Vec<Vec<f64>> = vec![problem.y_bounds().sample(&mut rng)];
    let mut history: Vec<SolutionRecord> = Vec::new();
    let burst = config.burst_size();
    let mut incumbent: Option<SolutionRecord> = None;

    let mut pop: Vec<HeapEntry> = Vec::with_capacity(config.population_size);
    while pop.len() < config.population_size {
        let x = problem.x_bounds().sample(&mut rng);
        match estimate(problem, &x, &archive, &mut budget)? {
            Some((v, y)) => pop.push(HeapEntry { x, worst_case_estimate: v, worst_y: y, refinement_evals: 0 }),
            None => break,
        }
    }

    'run: while pop.len() == config.population_size {
        let xs: Vec<Vec<f64>> = pop.iter().map(|e| e.x.clone()).collect();
        let trials = de_variation(&xs, config.f, config.crossover_prob, problem.x_bounds(), &mut rng)?;
        for (i, u) in trials.into_iter().enumerate() {
            match estimate(problem, &u, &archive, &mut budget)? {
                Some((v, y)) => {
                    if v < pop[i].worst_case_estimate {
                        pop[i] = HeapEntry { x: u, worst_case_estimate: v, worst_y: y, refinement_evals: 0 };
                    }
                }
                None => break 'run,
            }
        }
        let mut heap = MinHeap::from_entries(std::mem::take(&mut pop));
        let accepted = bottom_boost_refine(&mut heap, problem, &mut budget, burst, config.ks, &mut rng)?;
        pop = heap.into_entries();
        match accepted {
            Some(inc) => {
                if !archive.contains(&inc.worst_y) {
                    archive.push(inc.worst_y.clone());
                    if archive.len() > config.archive_size {
                        archive.remove(0);
                    }
                }
                let rec = SolutionRecord {
                    x: inc.x,
                    y: inc.worst_y,
                    value: inc.worst_case_estimate,
                    budget_used: budget.used(),
                };
                RunTrace::offer(&mut history, rec.clone());
                incumbent = Some(rec);
            }
            None => break,
        }
    }

    // Budget ran out before any candidate was accepted: fall back to the
    // current bottom of the population.
    let result = match incumbent {
        Some(r) => r,
        None => {
            let e = pop
                .iter()
                .min_by(|a, b| a.worst_case_estimate.total_cmp(&b.worst_case_estimate))
                .ok_or_else(|| Error::Config("mmde: budget too small to evaluate the initial population".into()))?;
            let rec = SolutionRecord { x: e.x.clone(), y: e.worst_y.clone(), value: e.worst_case_estimate, budget_used: budget.used() };
            history.push(rec.clone());
            rec
        }
    };
    Ok(RunTrace {
        algorithm: "mmde".into(),
        seed: config.seed,
        cap: config.max_evaluations,
        evaluations: budget.used(),
        history,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Interval;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn entry(x: f64, v: f64) -> HeapEntry {
        HeapEntry { x: vec![x], worst_case_estimate: v, worst_y: vec![1.0], refinement_evals: 0 }
    }

    #[test]
    fn de_variation_examples() {
        let b = Bounds::uniform(Interval::closed(-10.0, 10.0), 3);
        let pop: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, -(i as f64), 0.5 * i as f64]).collect();
        // F = 0, CR = 1: every trial is some other member.
        let t = de_variation(&pop, 0.0, 1.0, &b, &mut rng(1)).unwrap();
        for (i, trial) in t.iter().enumerate() {
            assert!(pop.iter().enumerate().any(|(k, m)| k != i && m == trial));
        }
        // CR = 0: exactly one coordinate changes (members differ in every coordinate).
        let t = de_variation(&pop, 0.7, 0.0, &b, &mut rng(2)).unwrap();
        for (trial, target) in t.iter().zip(&pop) {
            let changed = trial.iter().zip(target).filter(|(a, b)| a != b).count();
            assert!(changed <= 1);
        }
        let same = vec![vec![1.0, 2.0, 3.0]; 5];
        assert_eq!(de_variation(&same, 0.7, 0.5, &b, &mut rng(3)).unwrap(), same);
        assert!(de_variation(&same[..3], 0.7, 0.5, &b, &mut rng(3)).is_err());
        let t = de_variation(&pop, 2.0, 1.0, &Bounds::uniform(Interval::closed(0.0, 1.0), 3), &mut rng(4)).unwrap();
        assert!(t.iter().all(|m| m.iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn heap_keeps_order() {
        let mut r = rng(5);
        let mut h = MinHeap::from_entries((0..50).map(|i| entry(i as f64, r.random::<f64>())).collect());
        assert!(h.is_valid_heap());
        for i in 0..30 {
            h.push(entry(i as f64, r.random::<f64>()));
            assert!(h.is_valid_heap());
        }
        let mut last = f64::NEG_INFINITY;
        while let Some(e) = h.pop() {
            assert!(e.worst_case_estimate >= last);
            last = e.worst_case_estimate;
            assert!(h.is_valid_heap());
        }
    }

    #[test]
    fn refinement_finds_slice_maximum() {
        // The y-part of L1 is concave.
        let p = MinimaxProblem::l1(1);
        let x = [2.0];
        let grid = (0..=100_000)
            .map(|i| p.value(&x, &[i as f64 * 1e-4]).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let start_y = vec![9.0];
        let v0 = p.value(&x, &start_y).unwrap();
        let mut heap = MinHeap::from_entries(vec![HeapEntry {
            x: x.to_vec(),
            worst_case_estimate: v0,
            worst_y: start_y,
            refinement_evals: 0,
        }]);
        let mut b = BudgetCounter::unlimited();
        let inc = bottom_boost_refine(&mut heap, &p, &mut b, 38, 190, &mut rng(6)).unwrap().unwrap();
        assert_eq!(inc.refinement_evals, 190);
        assert_eq!(b.used(), 190);
        assert!((inc.worst_case_estimate - grid).abs() < 1e-2, "{} vs {grid}", inc.worst_case_estimate);
        assert!(inc.worst_case_estimate >= v0);
    }

    #[test]
    fn refinement_accepts_true_minimax_candidate() {
        let p = MinimaxProblem::l1(1);
        let brute = |x: f64| {
            (0..=10_000)
                .map(|i| p.value(&[x], &[i as f64 * 1e-3]).unwrap())
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let (a, bx) = (4.0, 0.5);
        assert!(brute(a) < brute(bx));
        // Both start with the same optimistic estimate from a poor y.
        let mut heap = MinHeap::from_entries(vec![
            HeapEntry { x: vec![bx], worst_case_estimate: -100.0, worst_y: vec![0.5], refinement_evals: 0 },
            HeapEntry { x: vec![a], worst_case_estimate: -100.0, worst_y: vec![0.5], refinement_evals: 0 },
        ]);
        let mut b = BudgetCounter::unlimited();
        let inc = bottom_boost_refine(&mut heap, &p, &mut b, 38, 190, &mut rng(7)).unwrap().unwrap();
        assert_eq!(inc.x, vec![a]);
        assert!(heap.is_valid_heap());
        for e in heap.entries() {
            if e.x == vec![bx] {
                assert!(e.worst_case_estimate > inc.worst_case_estimate);
            }
        }
    }

    #[test]
    fn refinement_stops_on_budget() {
        let p = MinimaxProblem::l3();
        let mut heap = MinHeap::from_entries(vec![entry(5.0, 0.0)]);
        let mut b = BudgetCounter::new(20);
        assert!(bottom_boost_refine(&mut heap, &p, &mut b, 38, 190, &mut rng(8)).unwrap().is_none());
        assert_eq!(b.used(), 20);
        assert_eq!(heap.len(), 1);
        assert!(heap.peek().unwrap().worst_case_estimate > 0.0);
    }

    #[test]
    fn run_is_deterministic_and_spends_cap() {
        let p = MinimaxProblem::l1(3);
        for cap in [1_000u64, 20_000] {
            let cfg = MmdeConfig::new(cap, 3);
            let a = run_mmde(&p, &cfg).unwrap();
            assert_eq!(a, run_mmde(&p, &cfg).unwrap());
            assert_eq!(a.evaluations, cap);
            assert!(a.history.windows(2).all(|w| w[1].value < w[0].value));
            assert!(p.x_bounds().contains(&a.result.x));
        }
    }

    #[test]
    fn config_validation() {
        assert!(MmdeConfig { population_size: 3, ..MmdeConfig::default() }.validate().is_err());
        assert!(MmdeConfig { crossover_prob: 2.0, ..MmdeConfig::default() }.validate().is_err());
        assert!(MmdeConfig { ks: 0, ..MmdeConfig::default() }.validate().is_err());
        assert_eq!(MmdeConfig::default().burst_size(), 38);
    }
}
