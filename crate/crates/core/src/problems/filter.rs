//! Digital filter design as a minimax problem.
//!
//! The design vector is `[A, a1, a2, b1, b2, c1, c2, d1, d2]` for a cascade of
//! two second-order sections. The adversary picks a normalized frequency
//! `psi` in `[0, 1]`, mapped to `theta = pi * psi`, and the target amplitude is
//! `|1 - 2 psi|`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, Result};

/// Number of second-order sections.
pub const SECTIONS: usize = 2;
/// Length of the flattened parameter vector.
pub const FILTER_DIM: usize = 1 + 4 * SECTIONS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub gain: f64,
    pub a: [f64; SECTIONS],
    pub b: [f64; SECTIONS],
    pub c: [f64; SECTIONS],
    pub d: [f64; SECTIONS],
}

impl FilterParams {
    /// Unit gain, all section coefficients zero: `|H| = 1` everywhere.
    pub fn identity() -> Self {
        Self {
            gain: 1.0,
            a: [0.0; SECTIONS],
            b: [0.0; SECTIONS],
            c: [0.0; SECTIONS],
            d: [0.0; SECTIONS],
        }
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != FILTER_DIM {
            return Err(Error::Dimension {
                expected: FILTER_DIM,
                got: x.len(),
            });
        }
        let pair = |i: usize| [x[i], x[i + 1]];
        Ok(Self {
            gain: x[0],
            a: pair(1),
            b: pair(3),
            c: pair(5),
            d: pair(7),
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(FILTER_DIM);
        v.push(self.gain);
        for part in [&self.a, &self.b, &self.c, &self.d] {
            v.extend_from_slice(part);
        }
        v
    }
}

/// `1 + p^2 + q^2 + 2q(2cos^2(theta) - 1) + 2p(1 + q)cos(theta)`, i.e. the squared
/// magnitude of one second-order factor on the unit circle.
fn section_factor(p: f64, q: f64, cos_theta: f64) -> f64 {
    1.0 + p * p + q * q + 2.0 * q * (2.0 * cos_theta * cos_theta - 1.0) + 2.0 * p * (1.0 + q) * cos_theta
}

/// Amplitude response `|H(x, theta)|`.
pub fn filter_amplitude(p: &FilterParams, theta: f64) -> Result<f64, EvalError> {
    let cos_theta = theta.cos();
    let mut amplitude = p.gain;
    for k in 0..SECTIONS {
        let num = section_factor(p.a[k], p.b[k], cos_theta);
        let den = section_factor(p.c[k], p.d[k], cos_theta);
        if !(den > 0.0) || !(num >= 0.0) {
            return Err(EvalError::Numeric(format!(
                "section {k}: factor {num}/{den} at theta={theta} is not a positive ratio"
            )));
        }
        amplitude *= (num / den).sqrt();
    }
    Ok(amplitude)
}

/// Map from the adversary's normalized frequency to the angle in radians.
pub fn psi_to_theta(psi: f64) -> f64 {
    PI * psi
}

/// Target amplitude `S(psi) = |1 - 2 psi|`.
pub fn target_amplitude(psi: f64) -> f64 {
    (1.0 - 2.0 * psi).abs()
}

/// Signed approximation error `e(x, psi) = |H(x, theta(psi))| - S(psi)`.
pub fn filter_error(p: &FilterParams, psi: f64) -> Result<f64, EvalError> {
    Ok(filter_amplitude(p, psi_to_theta(psi))? - target_amplitude(psi))
}
