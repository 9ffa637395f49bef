//! Self-checks behind `minimax verify`: the budget-schedule table and the
//! agreement between the Monte Carlo descent direction and finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::es_core::descent_direction;
use crate::oracle::Oracle;
use crate::problems::MinimaxProblem;
use crate::reckless::{budget_schedule_with_populations, Schedule};
use crate::seeding::derive_seed;

/// `(total_fes, s, T, inner, outer)` at inner and outer population size 8.
pub const SCHEDULE_TABLE: [(u64, f64, u64, u64, u64); 10] = [
    (100, 0.1, 1, 90, 10),
    (100, 0.2, 1, 80, 20),
    (100, 0.3, 1, 70, 30),
    (100, 0.4, 1, 60, 40),
    (100, 0.5, 1, 50, 50),
    (100_000, 0.1, 41, 2195, 243),
    (100_000, 0.2, 38, 2105, 526),
    (100_000, 0.3, 36, 1944, 833),
    (100_000, 0.4, 34, 1764, 1176),
    (100_000, 0.5, 32, 1562, 1562),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCell {
    pub total_fes: u64,
    pub s: f64,
    pub expected: (u64, u64, u64),
    pub got: Option<Schedule>,
}

impl ScheduleCell {
    pub fn ok(&self) -> bool {
        self.got.is_some_and(|g| (g.iterations, g.inner_fes, g.outer_fes) == self.expected)
    }
}

pub fn schedule_cells() -> Vec<ScheduleCell> {
    SCHEDULE_TABLE
        .iter()
        .map(|&(total_fes, s, t, i, o)| ScheduleCell {
            total_fes,
            s,
            expected: (t, i, o),
            got: budget_schedule_with_populations(total_fes, s, 8, 8).ok(),
        })
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Central finite-difference gradient of `x -> L(x, y)`.
pub fn fd_gradient(problem: &MinimaxProblem, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(x.len());
    let mut p = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        p[i] = x[i] + h;
        let up = problem.value_unchecked(&p, y)?;
        p[i] = x[i] - h;
        let down = problem.value_unchecked(&p, y)?;
        p[i] = x[i];
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementCase {
    pub problem: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub cosine: f64,
}

/// At `points` uniform `x`, finds a worst-case `y` with the oracle and
/// compares the antithetic descent estimate of `x -> L(x, y)` with the
/// negated finite-difference gradient.
pub fn descent_agreement(
    problem: &MinimaxProblem,
    oracle: &Oracle,
    points: usize,
    sigma: f64,
    lambda: usize,
    seed: u64,
) -> Result<Vec<AgreementCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["agreement", problem.id()]));
    let mut out = Vec::with_capacity(points);
    for _ in 0..points {
        let x = problem.x_bounds().sample(&mut rng);
        let y = oracle.inner_max_uncached(problem, &x, None)?.argmax;
        let d = descent_direction(|p: &[f64]| problem.value_unchecked(p, &y), &x, sigma, lambda, true, &mut rng)?;
        let g: Vec<f64> = fd_gradient(problem, &x, &y)?.iter().map(|v| -v).collect();
        out.push(AgreementCase { problem: problem.id().to_string(), cosine: cosine(&d, &g), x, y });
    }
    Ok(out)
}
