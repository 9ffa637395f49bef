//! Evolution-strategy solvers for continuous minimax problems.

pub mod coevolution;
pub mod error;
pub mod es_core;
pub mod harness;
pub mod mmde;
pub mod oracle;
pub mod problems;
pub mod reckless;
pub mod seeding;
pub mod trace;

pub use error::{Error, EvalError, Result};
