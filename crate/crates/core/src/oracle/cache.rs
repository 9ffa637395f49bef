//! Append-only persistent memo of oracle values.
//!
//! One record per line: `problem<TAB>q1,q2,...<TAB>value`, where `qi` is
//! `round(x_i * 1e12)` and the value uses the shortest text that parses
//! back to the same `f64`.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::Result;

const QUANTUM: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub problem: String,
    pub x: Vec<i64>,
}

impl CacheKey {
    pub fn new(problem: &str, x: &[f64]) -> Self {
        Self {
            problem: problem.to_string(),
            x: x.iter().map(|v| (v * QUANTUM).round() as i64).collect(),
        }
    }

    fn encode_x(&self) -> String {
        self.x.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Default)]
pub struct OracleCache {
    entries: Mutex<HashMap<CacheKey, f64>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl OracleCache {
    /// In-memory cache only.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists and appends new records to it. A file that
    /// cannot be read is logged and ignored; malformed lines are skipped.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        match File::open(path) {
            Ok(f) => {
                for (lineno, line) in BufReader::new(f).lines().enumerate() {
                    let line = match line {
                        Ok(l) => l,
                        Err(e) => {
                            log::warn!("oracle cache {}: read error at line {}: {e}; ignoring the rest", path.display(), lineno + 1);
                            break;
                        }
                    };
                    match parse_line(&line) {
                        Some((k, v)) => merge(&mut entries, k, v),
                        None if line.trim().is_empty() => {}
                        None => log::warn!("oracle cache {}: skipping malformed line {}", path.display(), lineno + 1),
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => log::warn!("oracle cache {} unreadable ({e}); recomputing", path.display()),
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            entries: Mutex::new(entries),
            file: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, key: &CacheKey) -> Option<f64> {
        self.entries.lock().expect("cache lock").get(key).copied()
    }

    /// Records `value`; a key seen twice keeps the larger value, since every
    /// oracle value is a lower bound on the true maximum.
    pub fn store(&self, key: CacheKey, value: f64) -> Result<()> {
        let line = format!("{}\t{}\t{}\n", key.problem, key.encode_x(), value);
        merge(&mut self.entries.lock().expect("cache lock"), key, value);
        if let Some(f) = &self.file {
            let mut f = f.lock().expect("cache file lock");
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }
}

fn merge(map: &mut HashMap<CacheKey, f64>, key: CacheKey, value: f64) {
    let slot = map.entry(key).or_insert(value);
    if value > *slot {
        *slot = value;
    }
}

fn parse_line(line: &str) -> Option<(CacheKey, f64)> {
    let mut parts = line.split('\t');
    let problem = parts.next()?.to_string();
    let xs = parts.next()?;
    let value: f64 = parts.next()?.trim().parse().ok()?;
    if parts.next().is_some() || problem.is_empty() {
        return None;
    }
    let x = xs.split(',').map(|q| q.parse::<i64>().ok()).collect::<Option<Vec<_>>>()?;
    Some((CacheKey { problem, x }, value))
}
