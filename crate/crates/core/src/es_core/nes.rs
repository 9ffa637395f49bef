//! Simplified natural evolution strategy.
//!
//! The search distribution is `N(mu, sigma^2 I)` with fixed `sigma`; each
//! generation moves the mean along the Monte Carlo estimate of
//! `grad_mu E[f(mu + sigma eps)] = E[f(mu + sigma eps) eps] / sigma`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::sample_perturbations;
use crate::error::{Error, EvalError, Result};
use crate::problems::Bounds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NesState {
    pub mu: Vec<f64>,
    pub sigma: f64,
    pub eta: f64,
    pub lambda: usize,
    pub antithetic: bool,
}

impl NesState {
    pub fn new(mu: Vec<f64>, sigma: f64, eta: f64, lambda: usize, antithetic: bool) -> Result<Self> {
        if !(sigma > 0.0) || !(eta > 0.0) {
            return Err(Error::Config(format!("sigma and eta must be positive (got {sigma}, {eta})")));
        }
        if lambda < 2 || (antithetic && lambda % 2 != 0) {
            return Err(Error::Config(format!(
                "invalid population size {lambda} (antithetic: {antithetic})"
            )));
        }
        Ok(Self { mu, sigma, eta, lambda, antithetic })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// One gradient-ascent step on the mean:
/// `mu <- mu + eta / (lambda sigma) * sum f_i eps_i`, then projection onto `bounds`.
///
/// `fitnesses` are used as given (callers standardize them first). The step
/// averages over the batch actually supplied, so a truncated final batch is
/// accepted as long as both slices agree in length.
pub fn nes_step(state: &NesState, fitnesses: &[f64], perturbations: &[Vec<f64>], bounds: &Bounds) -> Result<NesState> {
    if fitnesses.len() != perturbations.len() {
        return Err(Error::Dimension {
            expected: perturbations.len(),
            got: fitnesses.len(),
        });
    }
    if fitnesses.is_empty() {
        return Ok(state.clone());
    }
    let n = state.dim();
    if let Some(bad) = perturbations.iter().find(|e| e.len() != n) {
        return Err(Error::Dimension { expected: n, got: bad.len() });
    }
    let scale = state.eta / (fitnesses.len() as f64 * state.sigma);
    let mut mu = state.mu.clone();
    for (f, eps) in fitnesses.iter().zip(perturbations) {
        for (m, e) in mu.iter_mut().zip(eps) {
            *m += scale * f * e;
        }
    }
    bounds.project(&mut mu);
    Ok(NesState { mu, ..state.clone() })
}

/// Monte Carlo descent direction `-(1 / (sigma lambda)) sum L(x + sigma eps_i) eps_i`
/// for `x -> max_y L(x, y)`, where `objective` is `L(., y*)` at an inner maximizer.
///
/// Every one of the `lambda` perturbed points is passed to `objective`
/// unprojected, so the caller decides how points outside the box are handled.
/// Mirrored sampling cancels the `L(x) eps` term exactly and is what makes the
/// estimate usable at small `sigma`.
pub fn descent_direction<F, R>(
    mut objective: F,
    x: &[f64],
    sigma: f64,
    lambda: usize,
    antithetic: bool,
    rng: &mut R,
) -> Result<Vec<f64>, Error>
where
    F: FnMut(&[f64]) -> Result<f64, EvalError>,
    R: Rng + ?Sized,
{
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let eps = sample_perturbations(rng, lambda, x.len(), antithetic)?;
    let mut direction = vec![0.0; x.len()];
    let mut point = vec![0.0; x.len()];
    for e in &eps {
        for ((p, xi), ei) in point.iter_mut().zip(x).zip(e) {
            *p = xi + sigma * ei;
        }
        let value = objective(&point)?;
        for (d, ei) in direction.iter_mut().zip(e) {
            *d += value * ei;
        }
    }
    let scale = -1.0 / (sigma * lambda as f64);
    direction.iter_mut().for_each(|d| *d *= scale);
    Ok(direction)
}
