use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Monotone count of objective calls against a fixed cap (#FEs).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetCounter {
    used: u64,
    cap: u64,
}

impl BudgetCounter {
    pub fn new(cap: u64) -> Self {
        assert!(cap > 0, "evaluation budget must be positive");
        Self { used: 0, cap }
    }

    /// A counter that never runs out in practice; used for metering oracle calls.
    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn remaining(&self) -> u64 {
        self.cap - self.used
    }

    pub fn is_exhausted(&self) -> bool {
        self.used >= self.cap
    }

    /// Accounts for one evaluation, or reports exhaustion without changing state.
    pub fn charge(&mut self) -> Result<(), EvalError> {
        if self.used >= self.cap {
            return Err(EvalError::BudgetExhausted);
        }
        self.used += 1;
        Ok(())
    }
}
