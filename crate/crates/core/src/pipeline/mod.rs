//! The three TAG stages (query synthesis, execution, answer generation), the
//! five evaluated methods, and the plan DSL behind hand-written pipelines.

mod answer;
mod methods;
mod plan;
mod prompts;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::LmError;
use crate::retrieval::RetrievalError;
use crate::semantic::SemanticError;
use crate::sql::SqlError;
use crate::table::TableError;
use crate::value::Value;

pub use answer::{parse_answer_list, table_to_values, AnswerParseError};
pub use methods::{
    generate_answer, generate_answer_for_table, run_handwritten, run_rag, run_retrieval_rank, run_text2sql,
    run_text2sql_lm, synthesize_sql, SqlVariant, RAG_TOP_K,
};
pub use plan::{evaluate_plan, Plan, PlanOp, PlanOutput, SortDir};
pub use prompts::{
    aggregation_answer_prompt, list_answer_prompt, schema_ddl, synthesis_prompt, AGGREGATION_ANSWER_INSTRUCTION,
    LIST_ANSWER_INSTRUCTION, ROW_RETRIEVAL_INSTRUCTION, SQL_ANSWER_INSTRUCTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryType {
    Match,
    Comparison,
    Ranking,
    Aggregation,
}

impl QueryType {
    pub const ALL: [QueryType; 4] = [
        QueryType::Match,
        QueryType::Comparison,
        QueryType::Ranking,
        QueryType::Aggregation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryType::Match => "match",
            QueryType::Comparison => "comparison",
            QueryType::Ranking => "ranking",
            QueryType::Aggregation => "aggregation",
        }
    }

    /// Whether exact-match accuracy is defined for this type.
    pub fn is_scored(self) -> bool {
        self != QueryType::Aggregation
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        QueryType::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| format!("unknown query type {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Knowledge,
    Reasoning,
}

impl Capability {
    pub fn name(self) -> &'static str {
        match self {
            Capability::Knowledge => "knowledge",
            Capability::Reasoning => "reasoning",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Capability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "knowledge" => Ok(Capability::Knowledge),
            "reasoning" => Ok(Capability::Reasoning),
            _ => Err(format!("unknown capability {s:?}")),
        }
    }
}

/// The evaluated methods, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "text2sql")]
    Text2Sql,
    #[serde(rename = "rag")]
    Rag,
    #[serde(rename = "retrieval_rank")]
    RetrievalRank,
    #[serde(rename = "text2sql_lm")]
    Text2SqlLm,
    #[serde(rename = "handwritten")]
    Handwritten,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Text2Sql,
        Method::Rag,
        Method::RetrievalRank,
        Method::Text2SqlLm,
        Method::Handwritten,
    ];

    /// Identifier used in case files, CSV output and on the command line.
    pub fn id(self) -> &'static str {
        match self {
            Method::Text2Sql => "text2sql",
            Method::Rag => "rag",
            Method::RetrievalRank => "retrieval_rank",
            Method::Text2SqlLm => "text2sql_lm",
            Method::Handwritten => "handwritten",
        }
    }

    /// Row label in rendered reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::Text2Sql => "Text2SQL",
            Method::Rag => "RAG",
            Method::RetrievalRank => "Retrieval + LM Rank",
            Method::Text2SqlLm => "Text2SQL + LM",
            Method::Handwritten => "Hand-written TAG",
        }
    }

    pub fn needs_index(self) -> bool {
        matches!(self, Method::Rag | Method::RetrievalRank)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL.into_iter().find(|m| m.id() == s).ok_or_else(|| {
            let ids: Vec<_> = Method::ALL.iter().map(|m| m.id()).collect();
            format!("unknown method {s:?} (expected one of {})", ids.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlRequest {
    pub text: String,
    pub query_type: QueryType,
    pub capability: Capability,
    pub domain: String,
}

/// A method's final answer: a list of values for scored query types, free
/// text for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Answer {
    ValueList { values: Vec<Value> },
    FreeText { text: String },
}

impl Answer {
    pub fn values(values: Vec<Value>) -> Self {
        Answer::ValueList { values }
    }

    pub fn text(text: impl Into<String>) -> Self {
        Answer::FreeText { text: text.into() }
    }

    pub fn as_values(&self) -> Option<&[Value]> {
        match self {
            Answer::ValueList { values } => Some(values),
            Answer::FreeText { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// Generated SQL did not parse, was outside the subset, or failed to run.
    Synthesis,
    ContextOverflow,
    /// The answer text could not be parsed as a list.
    Parse,
    Backend,
    /// A hand-written plan was missing or did not fit the catalog.
    Plan,
}

impl FailureKind {
    pub fn name(self) -> &'static str {
        match self {
            FailureKind::Synthesis => "synthesis",
            FailureKind::ContextOverflow => "context_overflow",
            FailureKind::Parse => "parse",
            FailureKind::Backend => "backend",
            FailureKind::Plan => "plan",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FailureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [
            FailureKind::Synthesis,
            FailureKind::ContextOverflow,
            FailureKind::Parse,
            FailureKind::Backend,
            FailureKind::Plan,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown failure kind {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("query synthesis failed: {message}")]
    Synthesis { sql: String, message: String },
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    AnswerParse(#[from] AnswerParseError),
    #[error("plan error: {0}")]
    Plan(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Table(#[from] TableError),
}

fn lm_kind(e: &LmError) -> FailureKind {
    match e {
        LmError::ContextOverflow { .. } => FailureKind::ContextOverflow,
        _ => FailureKind::Backend,
    }
}

impl PipelineError {
    pub fn synthesis(sql: impl Into<String>, err: &SqlError) -> Self {
        PipelineError::Synthesis {
            sql: sql.into(),
            message: err.to_string(),
        }
    }

    pub fn failure_kind(&self) -> FailureKind {
        match self {
            PipelineError::Synthesis { .. } => FailureKind::Synthesis,
            PipelineError::Lm(e) => lm_kind(e),
            PipelineError::AnswerParse(_) => FailureKind::Parse,
            PipelineError::Plan(_) | PipelineError::Table(_) => FailureKind::Plan,
            PipelineError::Retrieval(e) => match e {
                RetrievalError::Embed(e) | RetrievalError::Rerank { source: e, .. } => lm_kind(e),
                _ => FailureKind::Backend,
            },
            PipelineError::Semantic(e) => e.lm_error().map_or(FailureKind::Plan, lm_kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub answer: Answer,
    pub stages: Vec<StageTime>,
    pub warnings: Vec<String>,
}

/// Accumulates named stage timings for one run.
#[derive(Debug, Default)]
pub(crate) struct Stages(Vec<StageTime>);

impl Stages {
    pub(crate) fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add(stage, start.elapsed().as_secs_f64());
        out
    }

    pub(crate) fn add(&mut self, stage: &str, seconds: f64) {
        match self.0.iter_mut().find(|s| s.stage == stage) {
            Some(s) => s.seconds += seconds,
            None => self.0.push(StageTime {
                stage: stage.to_string(),
                seconds,
            }),
        }
    }

    pub(crate) fn finish(self, answer: Answer, warnings: Vec<String>) -> RunOutcome {
        RunOutcome {
            answer,
            stages: self.0,
            warnings,
        }
    }
}
