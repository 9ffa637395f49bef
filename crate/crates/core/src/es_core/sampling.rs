use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Draws `lambda` standard-normal vectors of length `n`. With `antithetic`
/// the output is `[e1, -e1, e2, -e2, ...]`, which requires an even `lambda`.
pub fn sample_perturbations<R: Rng + ?Sized>(
    rng: &mut R,
    lambda: usize,
    n: usize,
    antithetic: bool,
) -> Result<Vec<Vec<f64>>> {
    if lambda < 2 {
        return Err(Error::Config(format!("population size must be at least 2, got {lambda}")));
    }
    if antithetic && lambda % 2 != 0 {
        return Err(Error::Config(format!(
            "antithetic sampling needs an even population size, got {lambda}"
        )));
    }
    let mut draw = || -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
    if !antithetic {
        return Ok((0..lambda).map(|_| draw()).collect());
    }
    let mut out = Vec::with_capacity(lambda);
    for _ in 0..lambda / 2 {
        let e = draw();
        let mirrored = e.iter().map(|v| -v).collect();
        out.push(e);
        out.push(mirrored);
    }
    Ok(out)
}

/// Shifts to zero mean and scales to unit (population) standard deviation.
/// A batch without spread carries no ranking information and maps to zeros.
pub fn standardize_fitness(f: &[f64]) -> Vec<f64> {
    if f.is_empty() {
        return Vec::new();
    }
    let n = f.len() as f64;
    let mean = f.iter().sum::<f64>() / n;
    let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) || !std.is_finite() {
        return vec![0.0; f.len()];
    }
    f.iter().map(|v| (v - mean) / std).collect()
}
