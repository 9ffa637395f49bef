//! Evolution-strategy engines.
//!
//! * [`nes`]: the simplified natural ES (isotropic Gaussian, fixed sigma,
//!   stochastic gradient step on the mean) and the Monte Carlo descent
//!   direction built from the same perturbation estimator.
//! * [`cma`]: a (mu/mu_w, lambda) CMA-ES with rank-one and rank-mu updates.
//! * [`restart`]: budgeted search drivers, including the restarting
//!   maximizer used for inner maximization.
//!
//! All engines take an explicit RNG and an objective of the form
//! `FnMut(&[f64]) -> Result<f64, EvalError>`. A `Numeric` error counts as the
//! worst possible fitness; `BudgetExhausted` ends the search cleanly.

pub mod cma;
pub mod nes;
pub mod restart;
mod sampling;

use serde::{Deserialize, Serialize};

pub use cma::{CmaOptions, CmaState};
pub use nes::{descent_direction, nes_step, NesState};
pub use restart::{maximize_with_restarts, minimize_cma, minimize_nes, NesOptions, RestartPolicy, SearchResult, INITIAL_STEP};
pub use sampling::{sample_perturbations, standardize_fitness};

use crate::error::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Minimize,
    Maximize,
}

impl Mode {
    /// Fitness assigned to points the objective cannot evaluate.
    pub fn worst(self) -> f64 {
        match self {
            Mode::Minimize => f64::INFINITY,
            Mode::Maximize => f64::NEG_INFINITY,
        }
    }

    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Mode::Minimize => a < b,
            Mode::Maximize => a > b,
        }
    }
}

/// Default population size `4 + floor(3 ln n)`.
pub fn default_population_size(n: usize) -> usize {
    4 + (3.0 * (n.max(1) as f64).ln()).floor() as usize
}

/// Outcome of one objective call inside an engine.
pub(crate) enum Probe {
    Value(f64),
    Exhausted,
}

/// Calls the objective, mapping numeric failures to the worst fitness for `mode`.
pub(crate) fn probe<F>(f: &mut F, x: &[f64], mode: Mode) -> Result<Probe, EvalError>
where
    F: FnMut(&[f64]) -> Result<f64, EvalError>,
{
    match f(x) {
        Ok(v) => Ok(Probe::Value(v)),
        Err(EvalError::Numeric(_)) => Ok(Probe::Value(mode.worst())),
        Err(EvalError::BudgetExhausted) => Ok(Probe::Exhausted),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_size_uses_natural_log() {
        assert_eq!(default_population_size(1), 4);
        assert_eq!(default_population_size(2), 6);
        assert_eq!(default_population_size(3), 7);
        assert_eq!(default_population_size(5), 8);
        assert_eq!(default_population_size(9), 10);
        assert_eq!(default_population_size(50), 15);
    }
}
