//! Benchmark cases, exact-match scoring, the runner and report rendering.

mod report;
mod run;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{Answer, Capability, FailureKind, Method, NlRequest, QueryType, StageTime};
use crate::table::{CatalogHints, TableError};
use crate::value::Value;

pub use report::{render_report, results_from_csv, results_to_csv, Report, CSV_HEADER, TIMING_COLUMNS};
pub use run::{run_benchmark, run_case, Backends, BenchConfig, Resources};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: case {index}: {message}")]
    Case {
        path: PathBuf,
        index: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("data for domain `{domain}`: {source}")]
    Data {
        domain: String,
        #[source]
        source: TableError,
    },
    #[error("case `{case_id}`: plan file {path} not found")]
    MissingPlan { case_id: String, path: PathBuf },
    #[error("{0}")]
    Config(String),
}

/// One benchmark question with its gold answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkCase {
    pub id: String,
    pub domain: String,
    pub query_type: QueryType,
    pub capability: Capability,
    pub request_text: String,
    /// Absent exactly for aggregation cases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<Value>>,
    /// Plan file stem under the plans directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_hints: Option<CatalogHints>,
}

impl BenchmarkCase {
    pub fn request(&self) -> NlRequest {
        NlRequest {
            text: self.request_text.clone(),
            query_type: self.query_type,
            capability: self.capability,
            domain: self.domain.clone(),
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.domain.trim().is_empty() {
            return Err("empty domain".into());
        }
        match (self.query_type, &self.gold) {
            (QueryType::Aggregation, Some(_)) => Err("aggregation cases carry no gold answer".into()),
            (q, None) if q.is_scored() => Err(format!("{q} case needs a gold answer")),
            _ => Ok(()),
        }
    }
}

/// Parses a JSON array of cases. Each case is validated and ids must be
/// unique.
pub fn parse_cases(text: &str, path: &Path) -> Result<Vec<BenchmarkCase>, BenchError> {
    let raw: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| BenchError::Format {
        path: path.to_path_buf(),
        message: format!("expected a JSON array of cases: {e}"),
    })?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for (index, v) in raw.into_iter().enumerate() {
        let fail = |message: String| BenchError::Case {
            path: path.to_path_buf(),
            index,
            message,
        };
        let case: BenchmarkCase = serde_json::from_value(v).map_err(|e| fail(e.to_string()))?;
        case.check().map_err(fail)?;
        if !seen.insert(case.id.clone()) {
            return Err(fail(format!("duplicate id `{}`", case.id)));
        }
        out.push(case);
    }
    Ok(out)
}

pub fn load_cases(path: &Path) -> Result<Vec<BenchmarkCase>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_cases(&text, path)
}

/// Normalization used by [`score_exact_match`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Compare text after trimming and lowercasing.
    pub fold_text: bool,
    /// Absolute tolerance for numbers.
    pub tolerance: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            fold_text: true,
            tolerance: 1e-6,
        }
    }
}

impl MatchConfig {
    pub fn strict() -> Self {
        MatchConfig {
            fold_text: false,
            tolerance: 0.0,
        }
    }

    pub fn values_equal(&self, a: &Value, b: &Value) -> bool {
        match (a, b) {
            (Value::Text(x), Value::Text(y)) if self.fold_text => x.trim().to_lowercase() == y.trim().to_lowercase(),
            (Value::Text(x), Value::Text(y)) => x == y,
            (Value::Bool(x), Value::Bool(y)) => x == y,
            (Value::Null, Value::Null) => true,
            _ => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x == y || (x - y).abs() <= self.tolerance,
                _ => false,
            },
        }
    }
}

/// Exact match: ranking answers compare as sequences, match and comparison
/// answers as multisets.
pub fn score_exact_match(pred: &[Value], gold: &[Value], query_type: QueryType, cfg: &MatchConfig) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    if query_type == QueryType::Ranking {
        return pred.iter().zip(gold).all(|(a, b)| cfg.values_equal(a, b));
    }
    perfect_matching(pred, gold, cfg)
}

/// Bipartite matching, so the tolerance never makes the result depend on
/// item order.
fn perfect_matching(pred: &[Value], gold: &[Value], cfg: &MatchConfig) -> bool {
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, adj, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> = pred
        .iter()
        .map(|p| (0..gold.len()).filter(|&j| cfg.values_equal(p, &gold[j])).collect())
        .collect();
    let mut owner = vec![None; gold.len()];
    (0..pred.len()).all(|i| augment(i, &adj, &mut vec![false; gold.len()], &mut owner))
}

/// Outcome of one (case, method) run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub case_id: String,
    pub method: Method,
    pub query_type: QueryType,
    pub capability: Capability,
    /// Absent for aggregation cases.
    pub correct: Option<bool>,
    pub execution_time_s: f64,
    pub stages: Vec<StageTime>,
    pub failure_kind: Option<FailureKind>,
    pub error: Option<String>,
    /// Absent when the run failed.
    pub answer: Option<Answer>,
}
