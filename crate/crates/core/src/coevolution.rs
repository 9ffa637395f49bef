//! Competitive coevolution baselines: a minimizer population and a
//! maximizer population evolved against each other, either alternately
//! (CoevA) or in the same cycle (CoevP).
//!
//! Fitness comes from the full interaction matrix `M[i][j] = L(X_i, Y_j)`:
//! a minimizer is scored by its worst case over the maximizers, a maximizer
//! by its best case over the minimizers. The returned solution is the best
//! pair of the final populations, so a run can end worse than its best
//! recorded pair.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, Result};
use crate::es_core::Mode;
use crate::problems::{Bounds, BudgetCounter, MinimaxProblem};
use crate::trace::{RunTrace, SolutionRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoevConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    pub mutation_prob: f64,
    pub replaced_per_gen: usize,
    /// Mutation standard deviation as a fraction of each coordinate's width.
    pub mutation_scale: f64,
    /// Evaluation cap.
    pub max_evaluations: u64,
    pub seed: u64,
    /// Members placed at the front of the initial minimizer population.
    pub seeded_x: Vec<Vec<f64>>,
}

impl Default for CoevConfig {
    fn default() -> Self {
        Self {
            population_size: 10,
            tournament_size: 2,
            mutation_prob: 0.9,
            replaced_per_gen: 2,
            mutation_scale: 0.1,
            max_evaluations: 100_000,
            seed: 0,
            seeded_x: Vec::new(),
        }
    }
}

impl CoevConfig {
    pub fn new(max_evaluations: u64, seed: u64) -> Self {
        Self { max_evaluations, seed, ..Self::default() }
    }

    pub fn validate(&self, problem: &MinimaxProblem) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("coevolution: {m}")));
        if self.population_size == 0 {
            return bad("population_size must be positive");
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad("tournament_size must be in 1..=population_size");
        }
        if self.replaced_per_gen == 0 || self.replaced_per_gen > self.population_size {
            return bad("replaced_per_gen must be in 1..=population_size");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) || !(self.mutation_scale >= 0.0) {
            return bad("mutation_prob must be in [0, 1] and mutation_scale non-negative");
        }
        if self.seeded_x.len() > self.population_size {
            return bad("more seeded members than population slots");
        }
        for x in &self.seeded_x {
            if x.len() != problem.n_x() || !problem.x_bounds().contains(x) {
                return bad("seeded member outside the x domain");
            }
        }
        let scan = (self.population_size * self.population_size) as u64;
        if self.max_evaluations < scan {
            return bad(&format!("max_evaluations must cover one {scan}-evaluation interaction scan"));
        }
        Ok(())
    }
}

/// `tau`-ary tournaments drawn with replacement, one per population slot.
/// Ties go to the lower index.
pub fn tournament_select<R: Rng + ?Sized>(
    members: &[Vec<f64>],
    tau: usize,
    scores: &[f64],
    mode: Mode,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    assert_eq!(members.len(), scores.len());
    assert!(tau >= 1);
    let n = members.len();
    (0..n)
        .map(|_| {
            let mut winner = rng.random_range(0..n);
            for _ in 1..tau {
                let c = rng.random_range(0..n);
                if mode.better(scores[c], scores[winner]) || (scores[c] == scores[winner] && c < winner) {
                    winner = c;
                }
            }
            members[winner].clone()
        })
        .collect()
}

/// Perturbs each coordinate with probability `prob` by `N(0, (scale * width)^2)`, then clamps.
pub fn gaussian_mutate<R: Rng + ?Sized>(
    members: &[Vec<f64>],
    bounds: &Bounds,
    prob: f64,
    scale: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    members
        .iter()
        .map(|m| {
            let mut out: Vec<f64> = m
                .iter()
                .zip(bounds.intervals())
                .map(|(&v, iv)| {
                    if prob > 0.0 && rng.random::<f64>() < prob {
                        v + scale * iv.width() * normal.sample(rng)
                    } else {
                        v
                    }
                })
                .collect();
            bounds.project(&mut out);
            out
        })
        .collect()
}

/// Row-major interaction matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Interaction {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Worst case (max over columns) of each row.
    pub fn row_max(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect()
    }

    /// Best case (min over rows) of each column.
    pub fn col_min(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).fold(f64::INFINITY, f64::min))
            .collect()
    }

    /// `(i, j, value)`: the row with the smallest worst case and its worst column.
    /// Ties go to the lower index.
    pub fn best_pair(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..self.rows {
            let mut jmax = 0;
            for j in 1..self.cols {
                if self.get(i, j) > self.get(i, jmax) {
                    jmax = j;
                }
            }
            let v = self.get(i, jmax);
            if i == 0 || v < best.2 {
                best = (i, jmax, v);
            }
        }
        best
    }
}

/// Evaluation failure part-way through a scan, with the best pair among fully scanned rows.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialScan {
    pub best: Option<(usize, usize, f64)>,
}

/// `L(x, y)` for a coevolution matrix entry; numeric failures count as `+inf`.
fn entry(problem: &MinimaxProblem, x: &[f64], y: &[f64], budget: &mut BudgetCounter) -> Result<f64, EvalError> {
    match problem.evaluate(x, y, budget) {
        Err(EvalError::Numeric(_)) => Ok(f64::INFINITY),
        other => other,
    }
}

/// Evaluates every pair of `xs` and `ys`.
pub fn interaction_matrix(
    problem: &MinimaxProblem,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    budget: &mut BudgetCounter,
) -> std::result::Result<Interaction, PartialScan> {
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for (i, x) in xs.iter().enumerate() {
        for y in ys {
            match entry(problem, x, y, budget) {
                Ok(v) => values.push(v),
                Err(_) => {
                    let done = Interaction { rows: i, cols: ys.len(), values: values[..i * ys.len()].to_vec() };
                    return Err(PartialScan { best: (i > 0).then(|| done.best_pair()) });
                }
            }
        }
    }
    Ok(Interaction { rows: xs.len(), cols: ys.len(), values })
}

/// The minimizer with the smallest worst case over `ys`, its worst `y`, and the value.
/// Spends `|xs| * |ys|` evaluations.
pub fn pairwise_best(
    problem: &MinimaxProblem,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    budget: &mut BudgetCounter,
) -> std::result::Result<(Vec<f64>, Vec<f64>, f64), PartialScan> {
    assert!(!xs.is_empty() && !ys.is_empty());
    let m = interaction_matrix(problem, xs, ys, budget)?;
    let (i, j, v) = m.best_pair();
    Ok((xs[i].clone(), ys[j].clone(), v))
}

/// Indices sorted so the best member (under `mode`) comes first; stable.
fn ranking(scores: &[f64], mode: Mode) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    match mode {
        Mode::Minimize => idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b])),
        Mode::Maximize => idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a])),
    }
    idx
}

/// Replaces up to `r` of the worst members by the best challengers, pairing
/// the k-th best challenger with the k-th worst member. Returns
/// `(member slot, challenger index)` for each replacement made.
fn replace_worst(member_scores: &[f64], challenger_scores: &[f64], r: usize, mode: Mode) -> Vec<(usize, usize)> {
    let members = ranking(member_scores, mode);
    let challengers = ranking(challenger_scores, mode);
    let mut out = Vec::new();
    for k in 0..r.min(members.len()).min(challengers.len()) {
        let slot = members[members.len() - 1 - k];
        let c = challengers[k];
        if mode.better(challenger_scores[c], member_scores[slot]) {
            out.push((slot, c));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scheme {
    Alternating,
    Parallel,
}

struct Run<'a> {
    problem: &'a MinimaxProblem,
    config: &'a CoevConfig,
    budget: BudgetCounter,
    rng: ChaCha8Rng,
    xs: Vec<Vec<f64>>,
    ys: Vec<Vec<f64>>,
    history: Vec<SolutionRecord>,
    /// Best pair of the populations at the most recent complete matrix.
    current: Option<SolutionRecord>,
}

impl Run<'_> {
    fn can_scan(&self) -> bool {
        let n = self.config.population_size as u64;
        self.budget.remaining() >= n * n
    }

    fn scan(&mut self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Interaction {
        interaction_matrix(self.problem, xs, ys, &mut self.budget).expect("scan checked against remaining budget")
    }

    fn record(&mut self, m: &Interaction) {
        let (i, j, value) = m.best_pair();
        let rec = SolutionRecord { x: self.xs[i].clone(), y: self.ys[j].clone(), value, budget_used: self.budget.used() };
        RunTrace::offer(&mut self.history, rec.clone());
        self.current = Some(rec);
    }

    fn offspring(&mut self, side: Mode, scores: &[f64]) -> Vec<Vec<f64>> {
        let (members, bounds) = match side {
            Mode::Minimize => (&self.xs, self.problem.x_bounds()),
            Mode::Maximize => (&self.ys, self.problem.y_bounds()),
        };
        let c = self.config;
        let picked = tournament_select(members, c.tournament_size, scores, side, &mut self.rng);
        gaussian_mutate(&picked, bounds, c.mutation_prob, c.mutation_scale, &mut self.rng)
    }

    /// One alternating cycle on a matrix `m` kept current for `(xs, ys)`.
    /// Returns false once the budget no longer covers a scan.
    fn alternating_cycle(&mut self, m: &mut Interaction) -> bool {
        let r = self.config.replaced_per_gen;
        if !self.can_scan() {
            return false;
        }
        let x_scores = m.row_max();
        let x_new = self.offspring(Mode::Minimize, &x_scores);
        let mx = self.scan(&x_new, &self.ys.clone());
        for (slot, c) in replace_worst(&x_scores, &mx.row_max(), r, Mode::Minimize) {
            self.xs[slot] = x_new[c].clone();
            let cols = m.cols;
            m.values[slot * cols..(slot + 1) * cols].copy_from_slice(mx.row(c));
        }
        self.record(m);

        if !self.can_scan() {
            return false;
        }
        let y_scores = m.col_min();
        let y_new = self.offspring(Mode::Maximize, &y_scores);
        let my = self.scan(&self.xs.clone(), &y_new);
        for (slot, c) in replace_worst(&y_scores, &my.col_min(), r, Mode::Maximize) {
            self.ys[slot] = y_new[c].clone();
            for i in 0..m.rows {
                m.values[i * m.cols + slot] = my.get(i, c);
            }
        }
        self.record(m);
        true
    }

    /// One parallel cycle: both sides breed from the same matrix and their
    /// offspring are scored against each other.
    fn parallel_cycle(&mut self, m: &Interaction) -> Option<Interaction> {
        let r = self.config.replaced_per_gen;
        if !self.can_scan() {
            return None;
        }
        let x_scores = m.row_max();
        let y_scores = m.col_min();
        let x_new = self.offspring(Mode::Minimize, &x_scores);
        let y_new = self.offspring(Mode::Maximize, &y_scores);
        let mo = self.scan(&x_new, &y_new);
        for (slot, c) in replace_worst(&x_scores, &mo.row_max(), r, Mode::Minimize) {
            self.xs[slot] = x_new[c].clone();
        }
        for (slot, c) in replace_worst(&y_scores, &mo.col_min(), r, Mode::Maximize) {
            self.ys[slot] = y_new[c].clone();
        }
        if !self.can_scan() {
            return None;
        }
        let fresh = self.scan(&self.xs.clone(), &self.ys.clone());
        self.record(&fresh);
        Some(fresh)
    }
}

fn run(problem: &MinimaxProblem, config: &CoevConfig, scheme: Scheme) -> Result<RunTrace> {
    config.validate(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lambda = config.population_size;
    let mut xs: Vec<Vec<f64>> = config.seeded_x.clone();
    while xs.len() < lambda {
        xs.push(problem.x_bounds().sample(&mut rng));
    }
    let ys: Vec<Vec<f64>> = (0..lambda).map(|_| problem.y_bounds().sample(&mut rng)).collect();
    let mut state = Run {
        problem,
        config,
        budget: BudgetCounter::new(config.max_evaluations),
        rng,
        xs,
        ys,
        history: Vec::new(),
        current: None,
    };
    let mut m = state.scan(&state.xs.clone(), &state.ys.clone());
    state.record(&m);
    match scheme {
        Scheme::Alternating => while state.alternating_cycle(&mut m) {},
        Scheme::Parallel => {
            while let Some(next) = state.parallel_cycle(&m) {
                m = next;
            }
        }
    }
    let result = state.current.clone().expect("initial scan recorded");
    Ok(RunTrace {
        algorithm: match scheme {
            Scheme::Alternating => "coeva".into(),
            Scheme::Parallel => "coevp".into(),
        },
        seed: config.seed,
        cap: config.max_evaluations,
        evaluations: state.budget.used(),
        history: state.history,
        result,
    })
}

/// CoevA: minimizers evolve against the current maximizers, then maximizers
/// against the updated minimizers. Runs until the next interaction scan no
/// longer fits in the evaluation cap.
pub fn run_coev_alternating(problem: &MinimaxProblem, config: &CoevConfig) -> Result<RunTrace> {
    run(problem, config, Scheme::Alternating)
}

/// CoevP: both populations breed from the same generation and challengers
/// are scored against the opposing challengers.
pub fn run_coev_parallel(problem: &MinimaxProblem, config: &CoevConfig) -> Result<RunTrace> {
    run(problem, config, Scheme::Parallel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Interval;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn full_tournament_picks_best() {
        let members: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let scores = [3.0, 1.0, 4.0, 0.5, 9.0, 2.0];
        // Tournaments sample with replacement, so a size-n tournament still
        // misses the best member with probability (5/6)^6; use a large tau.
        let out = tournament_select(&members, 200, &scores, Mode::Minimize, &mut rng(1));
        assert!(out.iter().all(|m| m == &vec![3.0]));
        let out = tournament_select(&members, 200, &scores, Mode::Maximize, &mut rng(1));
        assert!(out.iter().all(|m| m == &vec![4.0]));
    }

    #[test]
    fn tournament_closure_and_ties() {
        let members: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let out = tournament_select(&members, 3, &[1.0; 5], Mode::Minimize, &mut rng(2));
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|m| members.contains(m)));
        // tau = 1 is a uniform resample: over many draws every member appears.
        let mut seen = [0usize; 5];
        let mut r = rng(3);
        for _ in 0..200 {
            for m in tournament_select(&members, 1, &[0.0, 1.0, 2.0, 3.0, 4.0], Mode::Minimize, &mut r) {
                seen[m[0] as usize] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c > 150 && c < 250), "{seen:?}");
        // Equal scores with tau = n large: the lowest index wins every tie.
        let out = tournament_select(&members, 100, &[1.0; 5], Mode::Minimize, &mut rng(4));
        assert!(out.iter().all(|m| m == &vec![0.0]));
    }

    #[test]
    fn mutation_contract() {
        let b = Bounds::uniform(Interval::closed(0.0, 1.0), 3);
        let pop = vec![vec![0.0, 0.5, 1.0]; 4];
        assert_eq!(gaussian_mutate(&pop, &b, 0.0, 0.1, &mut rng(5)), pop);
        let out = gaussian_mutate(&pop, &b, 1.0, 0.1, &mut rng(5));
        assert!(out.iter().all(|m| b.contains(m)));

        let wide = Bounds::uniform(Interval::closed(0.0, 1.0), 100_000);
        let one = vec![vec![0.5; 100_000]];
        let out = gaussian_mutate(&one, &wide, 1.0, 0.1, &mut rng(6));
        let d: Vec<f64> = out[0].iter().map(|v| v - 0.5).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
        assert!((sd - 0.1).abs() < 0.005, "{sd}");
    }

    #[test]
    fn pairwise_examples() {
        let p = MinimaxProblem::l1(3);
        let mut b = BudgetCounter::new(100);
        let (x, y, v) = pairwise_best(&p, &[vec![5.0; 3]], &[vec![5.0; 3]], &mut b).unwrap();
        assert_eq!((x, y, v), (vec![5.0; 3], vec![5.0; 3], 0.0));
        let (x, _, v) = pairwise_best(&p, &[vec![5.0; 3], vec![0.0; 3]], &[vec![5.0; 3]], &mut b).unwrap();
        assert_eq!(x, vec![5.0; 3]);
        assert_eq!(v, 0.0);
        assert_eq!(b.used(), 3);
    }

    #[test]
    fn pairwise_matches_double_loop() {
        let p = MinimaxProblem::l3();
        let mut r = rng(7);
        for n in [1usize, 3, 5, 10] {
            let xs: Vec<Vec<f64>> = (0..n).map(|_| p.x_bounds().sample(&mut r)).collect();
            let ys: Vec<Vec<f64>> = (0..n).map(|_| p.y_bounds().sample(&mut r)).collect();
            let mut b = BudgetCounter::unlimited();
            let got = pairwise_best(&p, &xs, &ys, &mut b).unwrap();
            assert_eq!(b.used(), (n * n) as u64);
            let mut best: Option<(usize, usize, f64)> = None;
            for (i, x) in xs.iter().enumerate() {
                let mut worst = (0, f64::NEG_INFINITY);
                for (j, y) in ys.iter().enumerate() {
                    let v = p.value(x, y).unwrap();
                    if v > worst.1 {
                        worst = (j, v);
                    }
                }
                if best.is_none_or(|bb| worst.1 < bb.2) {
                    best = Some((i, worst.0, worst.1));
                }
            }
            let (i, j, v) = best.unwrap();
            assert_eq!(got, (xs[i].clone(), ys[j].clone(), v));
        }
    }

    #[test]
    fn partial_scan_reports_scanned_rows() {
        let p = MinimaxProblem::l1(3);
        let xs = vec![vec![5.0; 3], vec![0.0; 3]];
        let ys = vec![vec![5.0; 3], vec![0.0; 3]];
        let mut b = BudgetCounter::new(3);
        let err = pairwise_best(&p, &xs, &ys, &mut b).unwrap_err();
        assert_eq!(err.best, Some((0, 0, 0.0)));
        let mut b = BudgetCounter::new(1);
        assert_eq!(pairwise_best(&p, &xs, &ys, &mut b).unwrap_err().best, None);
    }

    #[test]
    fn deterministic_and_within_cap() {
        let p = MinimaxProblem::l1(3);
        for cap in [1_000u64, 10_000, 12_345] {
            let cfg = CoevConfig::new(cap, 9);
            for f in [run_coev_alternating, run_coev_parallel] {
                let a = f(&p, &cfg).unwrap();
                assert_eq!(a, f(&p, &cfg).unwrap());
                assert!(a.evaluations <= cap && a.evaluations + 100 > cap, "{}", a.evaluations);
                assert!(a.history.windows(2).all(|w| w[1].value < w[0].value));
                assert!(a.result.value >= a.history.last().unwrap().value);
            }
        }
    }

    #[test]
    fn seeded_optimum_survives() {
        let p = MinimaxProblem::l6();
        let mut cfg = CoevConfig::new(20_000, 4);
        cfg.seeded_x = vec![vec![1.0, 1.0]];
        for f in [run_coev_alternating, run_coev_parallel] {
            let t = f(&p, &cfg).unwrap();
            assert!(t.result.value <= 1.0 + 1e-9, "{}", t.result.value);
        }
    }

    #[test]
    fn no_variation_only_improves() {
        let p = MinimaxProblem::l5();
        let cfg = CoevConfig { mutation_prob: 0.0, tournament_size: 10, ..CoevConfig::new(5_000, 1) };
        let t = run_coev_parallel(&p, &cfg).unwrap();
        assert!(t.history.windows(2).all(|w| w[1].value <= w[0].value));
    }

    #[test]
    fn config_validation() {
        let p = MinimaxProblem::l1(3);
        assert!(CoevConfig::new(99, 0).validate(&p).is_err());
        assert!(CoevConfig { tournament_size: 11, ..CoevConfig::default() }.validate(&p).is_err());
        assert!(CoevConfig { mutation_prob: 1.5, ..CoevConfig::default() }.validate(&p).is_err());
        assert!(CoevConfig { seeded_x: vec![vec![1.0]], ..CoevConfig::default() }.validate(&p).is_err());
        CoevConfig::default().validate(&p).unwrap();
    }
}
