//! Run records shared by all solvers.

use serde::{Deserialize, Serialize};

/// A pair `(x, y)`, its objective value, and the evaluations spent when it was recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    pub budget_used: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub seed: u64,
    pub cap: u64,
    pub evaluations: u64,
    /// Best-so-far records; values are non-increasing.
    pub history: Vec<SolutionRecord>,
    /// The solution the algorithm returns. For memoryless methods this can be
    /// worse than the best entry of `history`.
    pub result: SolutionRecord,
}

impl RunTrace {
    /// Appends `record` to the history when it improves on the last entry.
    pub(crate) fn offer(history: &mut Vec<SolutionRecord>, record: SolutionRecord) -> bool {
        if history.last().is_none_or(|b| record.value < b.value) {
            history.push(record);
            true
        } else {
            false
        }
    }
}
