//! Plot-ready CSV reports and the critical-difference summary.
//!
//! Aggregates are always recomputed from the raw records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::{friedman_test, nemenyi_cd, summarize, RankMatrix, Summary};
use super::store::ResultRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Convergence,
    Scalability,
    Variants,
    Cd,
}

impl FromStr for ReportKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(Self::Convergence),
            "scalability" => Ok(Self::Scalability),
            "variants" => Ok(Self::Variants),
            "cd" => Ok(Self::Cd),
            _ => Err(Error::Config(format!("unknown report kind {s:?}"))),
        }
    }
}

const HEADER: &str = "algorithm,mean_regret,std,median,runs";

fn row(first: impl std::fmt::Display, algorithm: &str, s: &Summary) -> String {
    format!("{first},{algorithm},{},{},{},{}\n", s.mean, s.std, s.median, s.runs)
}

/// `(family, dimension)` for ids like `L1` (dimension 3) or `L2-n20`.
fn scalable_family(problem: &str) -> Option<(&str, usize)> {
    match problem.split_once("-n") {
        Some((fam @ ("L1" | "L2"), n)) => n.parse().ok().map(|n| (fam, n)),
        None if problem == "L1" || problem == "L2" => Some((problem, 3)),
        _ => None,
    }
}

/// Scores grouped by `(group, first-column value, algorithm)`.
type Groups = BTreeMap<String, BTreeMap<(u64, String), Vec<f64>>>;

fn write_groups(groups: &Groups, dir: &Path, prefix: &str, first: &str) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (name, cells) in groups {
        let mut text = format!("{first},{HEADER}\n");
        for ((v, algo), scores) in cells {
            text.push_str(&row(v, algo, &summarize(scores)?));
        }
        let path = dir.join(format!("{prefix}_{name}.csv"));
        std::fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdSummary {
    pub budget: u64,
    pub alpha: f64,
    pub problems: Vec<String>,
    pub algorithms: Vec<String>,
    pub average_ranks: Vec<f64>,
    pub friedman_statistic: f64,
    pub p_value: f64,
    pub critical_difference: f64,
    /// `(a, b, significant)` for every pair, significant when the average
    /// ranks differ by more than the critical difference.
    pub pairs: Vec<(String, String, bool)>,
}

/// Friedman and Nemenyi summary over per-problem mean scores at the largest
/// budget. Problems missing any algorithm at that budget are left out.
pub fn cd_summary(records: &[ResultRecord], alpha: f64) -> Result<(CdSummary, RankMatrix)> {
    let budget = records
        .iter()
        .map(|r| r.key.budget)
        .max()
        .ok_or_else(|| Error::EmptySlice("cd report: no results".into()))?;
    let mut cells: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut algorithms = BTreeSet::new();
    for r in records.iter().filter(|r| r.key.budget == budget) {
        algorithms.insert(r.key.algorithm.clone());
        cells.entry(r.key.problem.clone()).or_default().entry(r.key.algorithm.clone()).or_default().push(r.score());
    }
    let algorithms: Vec<String> = algorithms.into_iter().collect();
    let mut problems = Vec::new();
    let mut values = Vec::new();
    for (p, by_algo) in &cells {
        if by_algo.len() == algorithms.len() {
            problems.push(p.clone());
            values.push(algorithms.iter().map(|a| summarize(&by_algo[a]).map(|s| s.mean)).collect::<Result<Vec<_>>>()?);
        }
    }
    if problems.is_empty() {
        return Err(Error::EmptySlice(format!("cd report: no problem has every algorithm at budget {budget}")));
    }
    let m = RankMatrix::new(problems.clone(), algorithms.clone(), values)?;
    let f = friedman_test(&m)?;
    let cd = nemenyi_cd(algorithms.len(), problems.len(), alpha)?;
    let avg = m.average_ranks();
    let mut pairs = Vec::new();
    for i in 0..algorithms.len() {
        for j in i + 1..algorithms.len() {
            pairs.push((algorithms[i].clone(), algorithms[j].clone(), (avg[i] - avg[j]).abs() > cd));
        }
    }
    let summary = CdSummary {
        budget,
        alpha,
        problems,
        algorithms,
        average_ranks: avg,
        friedman_statistic: f.statistic,
        p_value: f.p_value,
        critical_difference: cd,
        pairs,
    };
    Ok((summary, m))
}

/// Writes the report files for `kind` into `dir` and returns their paths.
pub fn emit_reports(records: &[ResultRecord], kind: ReportKind, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut groups: Groups = BTreeMap::new();
    let mut push = |group: &str, v: u64, r: &ResultRecord| {
        groups.entry(group.to_string()).or_default().entry((v, r.key.algorithm.clone())).or_default().push(r.score());
    };
    let paths = match kind {
        ReportKind::Convergence => {
            for r in records {
                push(&r.key.problem, r.key.budget, r);
            }
            write_groups(&groups, dir, "convergence", "budget")?
        }
        ReportKind::Variants => {
            for r in records.iter().filter(|r| r.key.algorithm.starts_with("reckless:")) {
                push(&r.key.problem, r.key.budget, r);
            }
            write_groups(&groups, dir, "variants", "budget")?
        }
        ReportKind::Scalability => {
            // The largest budget of each (problem, algorithm) stands for its dimension.
            let mut top: BTreeMap<(&str, &str), u64> = BTreeMap::new();
            for r in records {
                let e = top.entry((&r.key.problem, &r.key.algorithm)).or_insert(0);
                *e = (*e).max(r.key.budget);
            }
            for r in records {
                if let Some((fam, n)) = scalable_family(&r.key.problem) {
                    if top[&(r.key.problem.as_str(), r.key.algorithm.as_str())] == r.key.budget {
                        push(fam, n as u64, r);
                    }
                }
            }
            write_groups(&groups, dir, "scalability", "dimension")?
        }
        ReportKind::Cd => {
            let (summary, m) = cd_summary(records, 0.05)?;
            let mut text = String::from("problem,algorithm,mean_regret,rank\n");
            for (i, p) in m.rows.iter().enumerate() {
                for (j, a) in m.columns.iter().enumerate() {
                    writeln!(text, "{p},{a},{},{}", m.values[i][j], m.ranks[i][j]).expect("string write");
                }
            }
            let ranks = dir.join("cd_ranks.csv");
            std::fs::write(&ranks, text)?;
            let json = dir.join("cd.json");
            std::fs::write(&json, serde_json::to_string_pretty(&summary)? + "\n")?;
            vec![ranks, json]
        }
    };
    if paths.is_empty() {
        return Err(Error::EmptySlice(format!("{kind:?} report: no matching results")));
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::store::RunKey;

    fn rec(problem: &str, algorithm: &str, budget: u64, seed: u64, regret: f64) -> ResultRecord {
        ResultRecord {
            key: RunKey { problem: problem.into(), algorithm: algorithm.into(), budget, seed },
            x: vec![0.0],
            y: vec![0.0],
            value: 0.0,
            inner_max: regret,
            regret: Some(regret),
            evaluations: budget,
        }
    }

    #[test]
    fn convergence_rows_sorted_by_budget() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![rec("L1", "mmde", 10_000, 0, 1.0), rec("L1", "mmde", 1_000, 0, 2.0), rec("L1", "mmde", 100, 0, 4.0)];
        let paths = emit_reports(&recs, ReportKind::Convergence, dir.path()).unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        let budgets: Vec<u64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(budgets, vec![100, 1_000, 10_000]);
        assert!(text.lines().nth(1).unwrap().ends_with(",4,0,4,1"));
    }

    #[test]
    fn scalability_groups_by_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            rec("L1-n10", "mmde", 100_000, 0, 3.0),
            rec("L1-n10", "mmde", 1_000, 0, 9.0),
            rec("L1-n2", "mmde", 20_000, 0, 1.0),
            rec("L5", "mmde", 20_000, 0, 1.0),
        ];
        let paths = emit_reports(&recs, ReportKind::Scalability, dir.path()).unwrap();
        assert_eq!(paths.len(), 1);
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(text.lines().collect::<Vec<_>>(), vec!["dimension,algorithm,mean_regret,std,median,runs", "2,mmde,1,0,1,1", "10,mmde,3,0,3,1"]);
    }

    #[test]
    fn empty_slices_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_reports(&[], ReportKind::Cd, dir.path()), Err(Error::EmptySlice(_))));
        assert!(matches!(emit_reports(&[], ReportKind::Convergence, dir.path()), Err(Error::EmptySlice(_))));
        let only_mmde = vec![rec("L1", "mmde", 100, 0, 1.0)];
        assert!(matches!(emit_reports(&only_mmde, ReportKind::Variants, dir.path()), Err(Error::EmptySlice(_))));
    }

    #[test]
    fn cd_matches_direct_statistics() {
        let algos = ["a", "b", "c", "d"];
        let mut recs = Vec::new();
        for p in 0..6 {
            for (j, a) in algos.iter().enumerate() {
                for s in 0..3 {
                    recs.push(rec(&format!("P{p}"), a, 1000, s, (j * (p % 3 + 1)) as f64 + s as f64));
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&recs, ReportKind::Cd, dir.path()).unwrap();
        let got: CdSummary = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cd.json")).unwrap()).unwrap();
        let (direct, m) = cd_summary(&recs, 0.05).unwrap();
        assert_eq!(got, direct);
        let f = friedman_test(&m).unwrap();
        assert_eq!(got.friedman_statistic, f.statistic);
        assert_eq!(got.critical_difference, nemenyi_cd(4, 6, 0.05).unwrap());
        assert_eq!(got.pairs.len(), 6);
    }
}
