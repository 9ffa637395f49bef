//! Line-delimited JSON result store.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const RESULTS_FILE: &str = "results.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub problem: String,
    pub algorithm: String,
    pub budget: u64,
    pub seed: u64,
}

/// Outcome of one run. Contains nothing that varies between identical
/// invocations, so repeated sweeps produce identical lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    #[serde(flatten)]
    pub key: RunKey,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// The algorithm's own value for `(x, y)`.
    pub value: f64,
    /// Oracle estimate of `max_y L(x, y)`.
    pub inner_max: f64,
    pub regret: Option<f64>,
    pub evaluations: u64,
}

impl ResultRecord {
    /// Regret when `L*` is known, otherwise the inner-max value.
    pub fn score(&self) -> f64 {
        self.regret.unwrap_or(self.inner_max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    #[serde(flatten)]
    pub key: RunKey,
    pub wall_seconds: f64,
}

pub struct ResultStore {
    dir: PathBuf,
}

impl ResultStore {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn results_path(&self) -> PathBuf {
        self.dir.join(RESULTS_FILE)
    }

    /// All records; a missing file reads as empty, malformed lines are skipped.
    pub fn load(&self) -> Result<Vec<ResultRecord>> {
        let path = self.results_path();
        let f = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line) {
                Ok(r) => out.push(r),
                Err(e) => log::warn!("{}: skipping line {}: {e}", path.display(), i + 1),
            }
        }
        Ok(out)
    }

    pub fn completed(&self) -> Result<HashSet<RunKey>> {
        Ok(self.load()?.into_iter().map(|r| r.key).collect())
    }

    pub fn append(&self, records: &[ResultRecord], timings: &[TimingRecord]) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        append_lines(&self.results_path(), records)?;
        append_lines(&self.dir.join(TIMINGS_FILE), timings)
    }
}

fn append_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if items.is_empty() {
        return Ok(());
    }
    let mut buf = String::new();
    for it in items {
        buf.push_str(&serde_json::to_string(it)?);
        buf.push('\n');
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(buf.as_bytes())?;
    Ok(())
}
