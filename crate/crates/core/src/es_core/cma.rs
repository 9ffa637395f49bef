//! (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation.
//!
//! Strategy constants follow the usual defaults:
//!
//! ```text
//! w_i   = ln(mu + 1/2) - ln(i), normalized to sum 1      mu = floor(lambda / 2)
//! mu_eff = 1 / sum w_i^2
//! c_s   = (mu_eff + 2) / (n + mu_eff + 5)
//! d_s   = 1 + 2 max(0, sqrt((mu_eff - 1) / (n + 1)) - 1) + c_s
//! c_c   = (4 + mu_eff / n) / (n + 4 + 2 mu_eff / n)
//! c_1   = 2 / ((n + 1.3)^2 + mu_eff)
//! c_mu  = min(1 - c_1, 2 (mu_eff - 2 + 1 / mu_eff) / ((n + 2)^2 + mu_eff))
//! ```
//!
//! Sampled points are clamped onto the box and the update uses the clamped
//! points, so the mean stays a convex combination of feasible points.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{default_population_size, Mode};
use crate::error::{Error, Result};
use crate::problems::Bounds;

/// Relative floor on covariance eigenvalues (times `trace / n`).
const EIGEN_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaOptions {
    /// Population size; `None` selects `4 + floor(3 ln n)`.
    pub lambda: Option<usize>,
    /// Mirrored sampling: every second offspring is the reflection of the previous one.
    pub mirrored: bool,
}

impl Default for CmaOptions {
    fn default() -> Self {
        Self { lambda: None, mirrored: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Constants {
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Constants {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = (lambda / 2).max(1);
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self {
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

/// Full CMA-ES search state. Fitness values are never stored, which keeps
/// [`CmaState::tell`] a function of the ranking alone.
#[derive(Clone, Debug, PartialEq)]
pub struct CmaState {
    mean: DVector<f64>,
    step_size: f64,
    covariance: DMatrix<f64>,
    /// Eigenvectors of `covariance` (columns).
    basis: DMatrix<f64>,
    /// Square roots of the eigenvalues.
    scales: DVector<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    lambda: usize,
    mirrored: bool,
    generation: u64,
    eigen_generation: u64,
    constants: Constants,
    bounds: Bounds,
}

impl CmaState {
    pub fn new(mean: &[f64], step_size: f64, bounds: Bounds, options: &CmaOptions) -> Result<Self> {
        let n = mean.len();
        if n == 0 || n != bounds.dim() {
            return Err(Error::Dimension { expected: bounds.dim(), got: n });
        }
        if !(step_size > 0.0) {
            return Err(Error::Config(format!("step size must be positive, got {step_size}")));
        }
        let lambda = options.lambda.unwrap_or_else(|| default_population_size(n));
        if lambda < 2 {
            return Err(Error::Config(format!("population size must be at least 2, got {lambda}")));
        }
        Ok(Self {
            mean: DVector::from_vec(bounds.projected(mean)),
            step_size,
            covariance: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            lambda,
            mirrored: options.mirrored,
            generation: 0,
            eigen_generation: 0,
            constants: Constants::new(n, lambda),
            bounds,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Samples `lambda` points from `N(mean, step_size^2 C)`, clamped onto the bounds.
    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(self.lambda);
        let mut last = DVector::zeros(n);
        for k in 0..self.lambda {
            let z = if self.mirrored && k % 2 == 1 {
                -&last
            } else {
                DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
            };
            let y = &self.basis * z.component_mul(&self.scales);
            let mut x: Vec<f64> = (&self.mean + self.step_size * y).iter().copied().collect();
            self.bounds.project(&mut x);
            out.push(x);
            last = z;
        }
        out
    }

    /// Rank-based update of mean, paths, covariance and step size.
    pub fn tell(&mut self, points: &[Vec<f64>], fitnesses: &[f64], mode: Mode) -> Result<()> {
        if points.len() != self.lambda || fitnesses.len() != self.lambda {
            return Err(Error::Dimension {
                expected: self.lambda,
                got: points.len().min(fitnesses.len()),
            });
        }
        let n = self.dim();
        if let Some(bad) = points.iter().find(|p| p.len() != n) {
            return Err(Error::Dimension { expected: n, got: bad.len() });
        }
        let mut order: Vec<usize> = (0..self.lambda).collect();
        match mode {
            Mode::Minimize => order.sort_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b])),
            Mode::Maximize => order.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a])),
        }

        let c = &self.constants;
        let nf = n as f64;
        let steps: Vec<DVector<f64>> = order[..c.mu]
            .iter()
            .map(|&i| (DVector::from_column_slice(&points[i]) - &self.mean) / self.step_size)
            .collect();
        let mut y_w = DVector::zeros(n);
        for (w, y) in c.weights.iter().zip(&steps) {
            y_w.axpy(*w, y, 1.0);
        }
        self.mean.axpy(self.step_size, &y_w, 1.0);

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt_y = &self.basis * (self.basis.tr_mul(&y_w)).component_div(&self.scales);
        self.path_sigma *= 1.0 - c.c_sigma;
        self.path_sigma
            .axpy((c.c_sigma * (2.0 - c.c_sigma) * c.mu_eff).sqrt(), &inv_sqrt_y, 1.0);

        self.generation += 1;
        let ps_norm = self.path_sigma.norm();
        let decay = 1.0 - (1.0 - c.c_sigma).powf(2.0 * self.generation as f64);
        let h_sigma = if ps_norm / decay.sqrt() < (1.4 + 2.0 / (nf + 1.0)) * c.chi_n {
            1.0
        } else {
            0.0
        };
        self.path_c *= 1.0 - c.c_c;
        self.path_c
            .axpy(h_sigma * (c.c_c * (2.0 - c.c_c) * c.mu_eff).sqrt(), &y_w, 1.0);

        let old_weight = 1.0 - c.c_1 - c.c_mu + (1.0 - h_sigma) * c.c_1 * c.c_c * (2.0 - c.c_c);
        let mut cov = &self.covariance * old_weight;
        cov.ger(c.c_1, &self.path_c, &self.path_c, 1.0);
        for (w, y) in c.weights.iter().zip(&steps) {
            cov.ger(c.c_mu * w, y, y, 1.0);
        }
        self.covariance = cov;

        self.step_size *= ((c.c_sigma / c.d_sigma) * (ps_norm / c.chi_n - 1.0)).exp();

        let lag = self.lambda as f64 / ((c.c_1 + c.c_mu) * nf * 10.0);
        if (self.generation - self.eigen_generation) as f64 > lag {
            self.decompose();
        }
        Ok(())
    }

    /// Refreshes `B` and `D` from the covariance, flooring eigenvalues so the
    /// matrix stays positive definite.
    fn decompose(&mut self) {
        let n = self.dim();
        let sym = (&self.covariance + self.covariance.transpose()) * 0.5;
        let floor = EIGEN_FLOOR * (sym.trace() / n as f64).max(f64::MIN_POSITIVE);
        let eig = SymmetricEigen::new(sym);
        let mut values = eig.eigenvalues;
        let mut repaired = false;
        for v in values.iter_mut() {
            if !(*v >= floor) {
                *v = floor;
                repaired = true;
            }
        }
        self.basis = eig.eigenvectors;
        if repaired {
            self.covariance = &self.basis * DMatrix::from_diagonal(&values) * self.basis.transpose();
        } else {
            self.covariance = (&self.covariance + self.covariance.transpose()) * 0.5;
        }
        self.scales = values.map(f64::sqrt);
        self.eigen_generation = self.generation;
    }

    /// Smallest eigenvalue of the current covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.covariance + self.covariance.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.min()
    }
}
