//! Summary statistics, Friedman test and Nemenyi critical difference.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    pub runs: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptySlice("no values to summarize".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(Summary { mean, median: median(values), std, runs: values.len() })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ranks with 1 for the smallest value; tied values share the mean of their positions.
pub fn midranks(row: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && row[idx[j + 1]] == row[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Rows are evaluators (problems), columns algorithms; lower values rank better.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<f64>>,
}

impl RankMatrix {
    pub fn new(rows: Vec<String>, columns: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != rows.len() || values.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::Config("rank matrix shape does not match its labels".into()));
        }
        let ranks = values.iter().map(|r| midranks(r)).collect();
        Ok(Self { rows, columns, values, ranks })
    }

    pub fn average_ranks(&self) -> Vec<f64> {
        let n = self.ranks.len() as f64;
        (0..self.columns.len())
            .map(|j| self.ranks.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `12N / (k(k+1)) * (sum_j R_j^2 - k(k+1)^2 / 4)` on average ranks, with a
/// chi-square(k - 1) p-value.
pub fn friedman_test(m: &RankMatrix) -> Result<FriedmanResult> {
    let (n, k) = (m.rows.len(), m.columns.len());
    if k < 2 || n < 2 {
        return Err(Error::Config(format!("Friedman test needs k >= 2 and N >= 2 (got k = {k}, N = {n})")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = m.average_ranks().iter().map(|r| r * r).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).map_err(|e| Error::Config(e.to_string()))?;
    Ok(FriedmanResult { statistic, p_value: chi.sf(statistic) })
}

/// Two-tailed Nemenyi critical values `q_alpha` for k = 2..=10.
const Q_005: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_010: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

/// `q_alpha(k) * sqrt(k(k+1) / (6N))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    let table = if alpha == 0.05 {
        &Q_005
    } else if alpha == 0.10 {
        &Q_010
    } else {
        return Err(Error::Config(format!("unsupported alpha {alpha}; use 0.05 or 0.10")));
    };
    if !(2..=10).contains(&k) || n == 0 {
        return Err(Error::Config(format!("critical difference needs 2 <= k <= 10 and N >= 1 (got k = {k}, N = {n})")));
    }
    let kf = k as f64;
    Ok(table[k - 2] * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}
