//! LM-backed relational operators: per-row filter, scored top-k, per-row
//! map and chunked whole-table aggregation.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::lm::{estimate_tokens, LanguageModel, LmError, LmRequest};
use crate::table::{data_point_blocks, Column, Schema, Table, TableError};
use crate::value::{Value, ValueType};

pub const FILTER_INSTRUCTION: &str = "Answer True or False.";
pub const TOPK_INSTRUCTION: &str =
    "Rate how well this item satisfies the criterion, 0.0 to 1.0. Respond with only the number.";

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("bad template {template:?}: {message}")]
    Template { template: String, message: String },
    #[error("template refers to unknown column {column:?}")]
    UnknownColumn { column: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("column {0:?} already exists")]
    DuplicateColumn(String),
    #[error("LM call failed on row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: LmError,
    },
    #[error("LM call failed: {0}")]
    Lm(#[source] LmError),
    #[error(transparent)]
    Table(#[from] TableError),
}

impl SemanticError {
    /// The underlying LM error, if this failure came from the backend.
    pub fn lm_error(&self) -> Option<&LmError> {
        match self {
            SemanticError::Row { source, .. } | SemanticError::Lm(source) => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Lit(String),
    Col(String),
}

/// Text with `{column}` placeholders. `{{` and `}}` stand for literal braces.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    raw: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn parse(raw: &str) -> Result<Self, SemanticError> {
        let err = |message: &str| SemanticError::Template {
            template: raw.to_string(),
            message: message.to_string(),
        };
        let mut pieces = Vec::new();
        let mut lit = String::new();
        let mut chars = raw.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    lit.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    lit.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some('{') | None => return Err(err("unclosed placeholder")),
                            Some(c) => name.push(c),
                        }
                    }
                    if name.trim().is_empty() {
                        return Err(err("empty placeholder"));
                    }
                    if !lit.is_empty() {
                        pieces.push(Piece::Lit(std::mem::take(&mut lit)));
                    }
                    pieces.push(Piece::Col(name));
                }
                '}' => return Err(err("unmatched '}'")),
                c => lit.push(c),
            }
        }
        if !lit.is_empty() {
            pieces.push(Piece::Lit(lit));
        }
        Ok(PromptTemplate {
            raw: raw.to_string(),
            pieces,
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Placeholder names in first-occurrence order, without repeats.
    pub fn referenced_columns(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.pieces {
            if let Piece::Col(c) = p {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
        out
    }

    /// The template with placeholders replaced by their bare column names.
    pub fn strip_braces(&self) -> String {
        self.pieces
            .iter()
            .map(|p| match p {
                Piece::Lit(s) | Piece::Col(s) => s.as_str(),
            })
            .collect()
    }

    /// Fails unless every placeholder names a column of `t`.
    pub fn check(&self, t: &Table) -> Result<(), SemanticError> {
        for c in self.referenced_columns() {
            if t.schema().index_of(&c).is_none() {
                return Err(SemanticError::UnknownColumn { column: c });
            }
        }
        Ok(())
    }

    pub fn instantiate(&self, t: &Table, row: usize) -> Result<String, SemanticError> {
        let values = t.row(row).ok_or(TableError::IndexOutOfRange {
            table: t.name().to_string(),
            index: row,
            len: t.len(),
        })?;
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Lit(s) => out.push_str(s),
                Piece::Col(c) => {
                    let i = t
                        .schema()
                        .index_of(c)
                        .ok_or_else(|| SemanticError::UnknownColumn { column: c.clone() })?;
                    out.push_str(&values[i].render());
                }
            }
        }
        Ok(out)
    }
}

/// First decimal number in `text` (optional sign, digits, optional
/// fraction), if any.
pub fn parse_first_decimal(text: &str) -> Option<f64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"-?(?:\d+(?:\.\d+)?|\.\d+)").unwrap());
    re.find(text)
        .and_then(|m| m.as_str().parse::<f64>().ok())
        .filter(|x| x.is_finite())
}

pub fn filter_prompt(claim: &str) -> String {
    format!("{FILTER_INSTRUCTION}\n\n{claim}")
}

pub fn topk_prompt(criterion: &str) -> String {
    format!("{TOPK_INSTRUCTION}\n\n{criterion}")
}

fn row_requests(
    t: &Table,
    tpl: &PromptTemplate,
    wrap: impl Fn(&str) -> String,
    max_tokens: u32,
) -> Result<Vec<LmRequest>, SemanticError> {
    tpl.check(t)?;
    (0..t.len())
        .map(|i| Ok(LmRequest::new(wrap(&tpl.instantiate(t, i)?)).with_max_tokens(max_tokens)))
        .collect()
}

fn row_texts(t: &Table, reqs: &[LmRequest], lm: &dyn LanguageModel) -> Result<Vec<String>, SemanticError> {
    debug_assert_eq!(t.len(), reqs.len());
    lm.complete_batch(reqs)
        .into_iter()
        .enumerate()
        .map(|(row, r)| r.map(|r| r.text).map_err(|source| SemanticError::Row { row, source }))
        .collect()
}

/// Keeps rows whose reply, trimmed and lowercased, starts with "true".
/// Row order and schema are preserved.
pub fn sem_filter(t: &Table, tpl: &PromptTemplate, lm: &dyn LanguageModel) -> Result<Table, SemanticError> {
    let reqs = row_requests(t, tpl, filter_prompt, 16)?;
    let keep: Vec<usize> = row_texts(t, &reqs, lm)?
        .iter()
        .enumerate()
        .filter(|(_, s)| s.trim().to_lowercase().starts_with("true"))
        .map(|(i, _)| i)
        .collect();
    Ok(t.select_rows(&keep))
}

#[derive(Debug, Clone)]
pub struct TopK {
    pub table: Table,
    /// Score of each output row, aligned with `table` rows.
    pub scores: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Scores each row independently and keeps the `k` best, highest first.
/// Equal scores keep input order. An unparseable reply scores 0.0 and adds
/// a warning.
pub fn sem_topk(t: &Table, tpl: &PromptTemplate, k: usize, lm: &dyn LanguageModel) -> Result<TopK, SemanticError> {
    if k == 0 {
        return Err(SemanticError::InvalidK);
    }
    let reqs = row_requests(t, tpl, topk_prompt, 16)?;
    let mut warnings = Vec::new();
    let mut scored: Vec<(usize, f64)> = row_texts(t, &reqs, lm)?
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let score = parse_first_decimal(s).unwrap_or_else(|| {
                warnings.push(format!("unparseable score for row {i}: {s:?}"));
                0.0
            });
            (i, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(k);
    let idx: Vec<usize> = scored.iter().map(|s| s.0).collect();
    Ok(TopK {
        table: t.select_rows(&idx),
        scores: scored.iter().map(|s| s.1).collect(),
        warnings,
    })
}

/// Appends a text column holding the trimmed reply for each row.
pub fn sem_map(t: &Table, tpl: &PromptTemplate, out_col: &str, lm: &dyn LanguageModel) -> Result<Table, SemanticError> {
    if t.schema().index_of(out_col).is_some() {
        return Err(SemanticError::DuplicateColumn(out_col.to_string()));
    }
    let reqs = row_requests(t, tpl, str::to_string, 256)?;
    let texts = row_texts(t, &reqs, lm)?;
    let mut cols = t.schema().columns().to_vec();
    cols.push(Column::new(out_col, ValueType::Text));
    let rows = t
        .rows()
        .iter()
        .zip(texts)
        .map(|(r, s)| {
            let mut r = r.clone();
            r.push(Value::Text(s.trim().to_string()));
            r
        })
        .collect();
    Ok(Table::new(t.name(), Schema::new(cols)?, rows)?)
}

/// Aggregation prompt: the instruction, then the data points.
pub fn agg_prompt<S: AsRef<str>>(instruction: &str, items: &[S]) -> String {
    if items.is_empty() {
        instruction.to_string()
    } else {
        format!("{instruction}\n\n{}", data_point_blocks(items))
    }
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

/// Greedily packs items into consecutive chunks whose `agg_prompt` fits
/// `budget` tokens. Returns the chunk boundaries.
fn pack(instruction: &str, items: &[String], budget: usize) -> Result<Vec<std::ops::Range<usize>>, LmError> {
    let base = instruction.chars().count() + 2;
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut chars = base;
    for (i, item) in items.iter().enumerate() {
        let n = i - start + 1;
        // "Data Point {n}:\n" plus the item, plus "\n\n" before every block but the first
        let block = 13 + digits(n) + item.chars().count() + if n > 1 { 2 } else { 0 };
        if estimate_tokens(chars + block) <= budget {
            chars += block;
            continue;
        }
        if n == 1 {
            return Err(LmError::ContextOverflow {
                estimated: estimate_tokens(chars + block),
                budget,
            });
        }
        chunks.push(start..i);
        start = i;
        chars = base + 13 + 1 + item.chars().count();
        if estimate_tokens(chars) > budget {
            return Err(LmError::ContextOverflow {
                estimated: estimate_tokens(chars),
                budget,
            });
        }
    }
    chunks.push(start..items.len());
    Ok(chunks)
}

/// Answers `instruction` over the whole table. When the rows do not fit the
/// backend's context budget they are split into chunks, each chunk is
/// answered, and the partial answers are folded with the same instruction
/// until one answer remains.
///
/// With `all_columns` false only the columns named by `{column}` placeholders
/// in the instruction are shown; if it names none, all columns are shown.
pub fn sem_agg(
    t: &Table,
    instruction: &str,
    lm: &dyn LanguageModel,
    all_columns: bool,
) -> Result<String, SemanticError> {
    let tpl = PromptTemplate::parse(instruction)?;
    tpl.check(t)?;
    let referenced = tpl.referenced_columns();
    let cols = (!all_columns && !referenced.is_empty()).then_some(referenced.as_slice());
    let instruction = tpl.strip_braces();
    let mut items = (0..t.len())
        .map(|i| t.serialize_row(i, cols))
        .collect::<Result<Vec<_>, _>>()?;
    let budget = lm.context_budget();
    let mut first = true;
    loop {
        let chunks = pack(&instruction, &items, budget).map_err(SemanticError::Lm)?;
        if !first && chunks.len() == items.len() && items.len() > 1 {
            // every partial answer needs its own prompt: folding cannot converge
            return Err(SemanticError::Lm(LmError::ContextOverflow {
                estimated: estimate_tokens(agg_prompt(&instruction, &items).chars().count()),
                budget,
            }));
        }
        let reqs: Vec<LmRequest> = chunks
            .iter()
            .map(|r| LmRequest::new(agg_prompt(&instruction, &items[r.clone()])).with_max_tokens(1024))
            .collect();
        let answers = lm
            .complete_batch(&reqs)
            .into_iter()
            .map(|r| r.map(|r| r.text.trim().to_string()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(SemanticError::Lm)?;
        if answers.len() == 1 {
            return Ok(answers.into_iter().next().unwrap());
        }
        items = answers.iter().map(|a| format!("- summary: {a}")).collect();
        first = false;
    }
}
