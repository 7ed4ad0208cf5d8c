//! Table-augmented generation: answering natural-language questions over
//! tables by combining a deterministic relational engine with
//! language-model calls.
//!
//! The crate is organized bottom-up:
//!
//! * [`value`] and [`table`]: typed in-memory tables, CSV loading, and the
//!   `- {col}: {val}` row serialization every prompt uses.
//! * [`sql`]: parser and nested-loop executor for the SQL subset that query
//!   synthesis produces.
//! * [`lm`]: chat-completion backends (HTTP and a deterministic mock) with
//!   batching, retries and a context budget.
//! * [`semantic`]: LM-backed relational operators (filter, top-k, aggregate,
//!   map).
//! * [`retrieval`]: row embeddings, exact cosine search and LM reranking.
//! * [`pipeline`]: query synthesis, answer generation, the five answering
//!   methods and the plan format for hand-written pipelines.
//! * [`bench`]: case files, exact-match scoring, the benchmark runner and
//!   report rendering.

pub mod bench;
pub mod lm;
pub mod pipeline;
pub mod retrieval;
pub mod semantic;
pub mod sql;
pub mod table;
pub mod value;

pub use table::{Column, Schema, Table, TableCatalog};
pub use value::{Value, ValueType};
