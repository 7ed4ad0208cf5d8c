//! Row-level embedding index over a catalog, exact cosine search, and
//! LM-scored reranking of retrieved rows.

use std::cmp::Ordering;
use std::time::Duration;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::lm::{fan_out, post_json, LanguageModel, LmError, LmRequest, RetryPolicy, DEFAULT_MAX_IN_FLIGHT};
use crate::semantic::parse_first_decimal;
use crate::table::{TableCatalog, TableError};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("embedding failed: {0}")]
    Embed(#[source] LmError),
    #[error("embedder returned {got} vectors for {expected} texts")]
    Misaligned { expected: usize, got: usize },
    #[error("embedding dimension {got} does not match index dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("catalog has no tables")]
    EmptyCatalog,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("rerank failed on {table} row {row}: {source}")]
    Rerank {
        table: String,
        row: usize,
        #[source]
        source: LmError,
    },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Maps texts to vectors. Output is positionally aligned with input and
/// every vector has the same dimension.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, LmError>;
}

impl<T: Embedder + ?Sized> Embedder for &T {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, LmError> {
        (**self).embed(texts)
    }
}

impl<T: Embedder + ?Sized> Embedder for std::sync::Arc<T> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, LmError> {
        (**self).embed(texts)
    }
}

/// Hashed bag-of-words embedder.
///
/// Text is lowercased and split on non-alphanumeric characters. Each token
/// is hashed with 64-bit FNV-1a over its UTF-8 bytes, the hash modulo
/// `dim` selects a bucket, bucket counts form the vector, and the vector
/// is L2-normalized. Text with no tokens embeds to the zero vector.
#[derive(Debug, Clone, Copy)]
pub struct MockEmbedder {
    pub dim: usize,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        MockEmbedder { dim: 256 }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl MockEmbedder {
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for tok in tokenize(text) {
            v[(fnv1a64(tok.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        normalize(&mut v);
        v
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, LmError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Client for an embeddings endpoint taking `{model, input}` and replying
/// with `data[i].embedding`.
#[derive(Debug)]
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    batch_size: usize,
    max_in_flight: usize,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
    ) -> Result<Self, LmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| LmError::Backend(format!("building HTTP client: {e}")))?;
        Ok(HttpEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            retry: RetryPolicy::default(),
            batch_size: 64,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            client,
        })
    }

    /// Reads `TAG_EMBED_ENDPOINT` and `TAG_EMBED_MODEL`; the bearer token
    /// comes from `TAG_LM_API_KEY` when set.
    pub fn from_env() -> Result<Self, LmError> {
        let endpoint = crate::lm::env_required("TAG_EMBED_ENDPOINT")?;
        let model = crate::lm::env_required("TAG_EMBED_MODEL")?;
        let key = std::env::var("TAG_LM_API_KEY").ok().filter(|k| !k.is_empty());
        HttpEmbedder::new(endpoint, model, key)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn embed_chunk(&self, chunk: &[String]) -> Result<Vec<Vec<f64>>, LmError> {
        let reply = post_json(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &json!({"model": self.model, "input": chunk}),
            &self.retry,
        )?;
        let data = reply
            .get("data")
            .and_then(Json::as_array)
            .ok_or_else(|| LmError::Backend("embedding response has no data array".into()))?;
        if data.len() != chunk.len() {
            return Err(LmError::Backend(format!(
                "embedding response has {} items for {} inputs",
                data.len(),
                chunk.len()
            )));
        }
        data.iter()
            .map(|d| {
                d.get("embedding")
                    .and_then(Json::as_array)
                    .and_then(|xs| xs.iter().map(Json::as_f64).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| LmError::Backend("malformed embedding".into()))
            })
            .collect()
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, LmError> {
        let chunks: Vec<&[String]> = texts.chunks(self.batch_size.max(1)).collect();
        let mut out = Vec::with_capacity(texts.len());
        for part in fan_out(&chunks, self.max_in_flight, |c| self.embed_chunk(c)) {
            out.extend(part?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub table_name: String,
    pub row_index: usize,
    /// Unit-normalized, or all zeros when the source vector was zero.
    pub vector: Vec<f64>,
}

/// Exact (brute-force) cosine index. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    entries: Vec<IndexEntry>,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRow {
    pub table_name: String,
    pub row_index: usize,
    pub score: f64,
}

fn check_dims(vectors: &[Vec<f64>]) -> Result<usize, RetrievalError> {
    let dim = vectors.first().map_or(0, Vec::len);
    match vectors.iter().find(|v| v.len() != dim) {
        Some(v) => Err(RetrievalError::DimMismatch {
            expected: dim,
            got: v.len(),
        }),
        None => Ok(dim),
    }
}

impl VectorIndex {
    /// Embeds `serialize_row` of every row of every table.
    pub fn build(catalog: &TableCatalog, embedder: &dyn Embedder) -> Result<Self, RetrievalError> {
        if catalog.is_empty() {
            return Err(RetrievalError::EmptyCatalog);
        }
        let mut keys = Vec::new();
        let mut texts = Vec::new();
        for t in catalog.tables() {
            for i in 0..t.len() {
                keys.push((t.name().to_string(), i));
                texts.push(t.serialize_row(i, None)?);
            }
        }
        let vectors = embedder.embed(&texts).map_err(RetrievalError::Embed)?;
        if vectors.len() != texts.len() {
            return Err(RetrievalError::Misaligned {
                expected: texts.len(),
                got: vectors.len(),
            });
        }
        let dim = check_dims(&vectors)?;
        let entries = keys
            .into_iter()
            .zip(vectors)
            .map(|((table_name, row_index), mut vector)| {
                normalize(&mut vector);
                IndexEntry {
                    table_name,
                    row_index,
                    vector,
                }
            })
            .collect();
        Ok(VectorIndex { entries, dim })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Top `k` entries by cosine similarity to `query`, highest first, ties
    /// ordered by (table name, row index). Scores are rounded to 12 decimal
    /// places before ranking.
    pub fn search(&self, query: &str, k: usize, embedder: &dyn Embedder) -> Result<Vec<ScoredRow>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let mut q = embedder
            .embed(&[query.to_string()])
            .map_err(RetrievalError::Embed)?
            .pop()
            .ok_or(RetrievalError::Misaligned { expected: 1, got: 0 })?;
        if q.len() != self.dim {
            return Err(RetrievalError::DimMismatch {
                expected: self.dim,
                got: q.len(),
            });
        }
        normalize(&mut q);
        let mut scored: Vec<ScoredRow> = self
            .entries
            .iter()
            .map(|e| ScoredRow {
                table_name: e.table_name.clone(),
                row_index: e.row_index,
                score: snap(e.vector.iter().zip(&q).map(|(a, b)| a * b).sum()),
            })
            .collect();
        scored.sort_by(rank_order);
        scored.truncate(k);
        Ok(scored)
    }
}

/// Rounds to 12 decimal places so mathematically equal similarities,
/// computed through different float paths, tie exactly.
fn snap(score: f64) -> f64 {
    (score * 1e12).round() / 1e12
}

fn rank_order(a: &ScoredRow, b: &ScoredRow) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.table_name.cmp(&b.table_name))
        .then_with(|| a.row_index.cmp(&b.row_index))
}

/// Instruction appended to each rerank prompt.
pub const RERANK_INSTRUCTION: &str =
    "On a scale from 0.0 to 1.0, how relevant is the row above to the request? Respond with only the number.";

pub fn rerank_prompt(request: &str, serialized_row: &str) -> String {
    format!("Request: {request}\n\nRow:\n{serialized_row}\n\n{RERANK_INSTRUCTION}")
}

#[derive(Debug, Clone, Default)]
pub struct Reranked {
    pub rows: Vec<ScoredRow>,
    pub warnings: Vec<String>,
}

/// Rescores each row with one LM call and stable-sorts by the new score,
/// descending. Scores are clamped to [0, 1]; an unparseable reply scores
/// 0.0 and adds a warning. No row is dropped.
pub fn lm_rerank(
    rows: &[ScoredRow],
    catalog: &TableCatalog,
    request: &str,
    lm: &dyn LanguageModel,
) -> Result<Reranked, RetrievalError> {
    let mut reqs = Vec::with_capacity(rows.len());
    for r in rows {
        let text = catalog.get(&r.table_name)?.serialize_row(r.row_index, None)?;
        reqs.push(LmRequest::new(rerank_prompt(request, &text)).with_max_tokens(16));
    }
    let mut out = Reranked::default();
    for (r, resp) in rows.iter().zip(lm.complete_batch(&reqs)) {
        let resp = resp.map_err(|source| RetrievalError::Rerank {
            table: r.table_name.clone(),
            row: r.row_index,
            source,
        })?;
        let score = match parse_first_decimal(&resp.text) {
            Some(s) => s.clamp(0.0, 1.0),
            None => {
                out.warnings.push(format!(
                    "unparseable rerank score for {} row {}: {:?}",
                    r.table_name, r.row_index, resp.text
                ));
                0.0
            }
        };
        out.rows.push(ScoredRow { score, ..r.clone() });
    }
    out.rows.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}
