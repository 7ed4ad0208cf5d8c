//! The SQL subset used for query synthesis: parsing, validation against a
//! [`TableCatalog`](crate::table::TableCatalog), and nested-loop execution.
//!
//! Supported: `SELECT [DISTINCT]` over columns, `*`, `t.*` and the aggregates
//! `COUNT/SUM/AVG/MIN/MAX` (optionally `DISTINCT`); one `FROM` table with
//! optional alias; any number of `[INNER] JOIN .. ON a = b`; `WHERE` over
//! comparisons, `LIKE`, `IN (..)`, `BETWEEN`, `IS [NOT] NULL` with
//! `AND/OR/NOT`; `GROUP BY`; `ORDER BY .. ASC|DESC`; `LIMIT n`.
//!
//! Logic is two-valued: any comparison, `LIKE`, `IN` or `BETWEEN` (negated
//! forms included) with a `Null` operand is false, and `NOT` simply inverts,
//! so `NOT (x = 1)` holds when `x` is `Null`. `LIKE` is case-sensitive.

mod ast;
mod exec;
mod parser;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use exec::{execute_sql, validate};
pub use parser::{parse_sql, ParseError};

/// One problem found while resolving a query against a catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SemanticIssue {
    UnknownTable(String),
    UnknownColumn(String),
    AmbiguousColumn(String),
    DuplicateQualifier(String),
    /// A bare column next to aggregates that is not in `GROUP BY`.
    UngroupedColumn(String),
    Other(String),
}

impl fmt::Display for SemanticIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticIssue::UnknownTable(t) => write!(f, "unknown table `{t}`"),
            SemanticIssue::UnknownColumn(c) => write!(f, "unknown column `{c}`"),
            SemanticIssue::AmbiguousColumn(c) => write!(f, "ambiguous column `{c}`"),
            SemanticIssue::DuplicateQualifier(q) => write!(f, "table name or alias `{q}` used twice"),
            SemanticIssue::UngroupedColumn(c) => {
                write!(f, "column `{c}` must appear in GROUP BY or inside an aggregate")
            }
            SemanticIssue::Other(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum SqlError {
    #[error("SQL parse error {0}")]
    Parse(ParseError),
    #[error("unsupported SQL at byte {offset}: {construct}")]
    Unsupported { offset: usize, construct: String },
    #[error("{}", join_issues(.0))]
    Semantic(Vec<SemanticIssue>),
    #[error("type error: {0}")]
    Type(String),
    #[error("integer overflow in {0}")]
    Overflow(String),
}

fn join_issues(issues: &[SemanticIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl SqlError {
    /// True for failures of the text itself rather than of its meaning.
    pub fn is_syntax(&self) -> bool {
        matches!(self, SqlError::Parse(_) | SqlError::Unsupported { .. })
    }
}
