use super::prompts::{
    aggregation_answer_prompt, list_answer_prompt, synthesis_prompt, ROW_RETRIEVAL_INSTRUCTION, SQL_ANSWER_INSTRUCTION,
};
use super::{
    evaluate_plan, parse_answer_list, table_to_values, Answer, NlRequest, PipelineError, Plan, QueryType, RunOutcome,
    Stages,
};
use crate::lm::{LanguageModel, LmRequest};
use crate::retrieval::{lm_rerank, Embedder, ScoredRow, VectorIndex};
use crate::sql::{execute_sql, parse_sql, Query};
use crate::table::{Table, TableCatalog};

/// Rows retrieved by the RAG and rerank baselines.
pub const RAG_TOP_K: usize = 10;

/// Which synthesis instruction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlVariant {
    /// The query computes the answer.
    Answer,
    /// The query fetches rows for a later generation step.
    RowRetrieval,
}

impl SqlVariant {
    fn instruction(self) -> &'static str {
        match self {
            SqlVariant::Answer => SQL_ANSWER_INSTRUCTION,
            SqlVariant::RowRetrieval => ROW_RETRIEVAL_INSTRUCTION,
        }
    }
}

/// Turns a completion of the prompt's trailing `SELECT` into a statement.
/// Code fences and a trailing `;` are removed; `SELECT ` is prepended unless
/// the completion already starts with it.
fn completion_to_sql(completion: &str) -> String {
    let mut s = completion.trim();
    if let Some(rest) = s.strip_prefix("```") {
        s = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        s = s.split("```").next().unwrap_or("");
        s = s.trim();
    }
    let s = s.trim_end_matches(|c: char| c == ';' || c.is_whitespace());
    let starts_with_select = s.get(..6).is_some_and(|p| p.eq_ignore_ascii_case("select"))
        && s[6..].chars().next().is_none_or(|c| !c.is_alphanumeric() && c != '_');
    if starts_with_select {
        s.to_string()
    } else {
        format!("SELECT {s}")
    }
}

/// Prompts the LM with the schema and question and parses its SQL.
pub fn synthesize_sql(
    req: &NlRequest,
    catalog: &TableCatalog,
    lm: &dyn LanguageModel,
    variant: SqlVariant,
) -> Result<(String, Query), PipelineError> {
    let prompt = synthesis_prompt(catalog, &req.text, variant.instruction());
    let resp = lm.complete(&LmRequest::new(prompt).with_max_tokens(512))?;
    let sql = completion_to_sql(&resp.text);
    let query = parse_sql(&sql).map_err(|e| PipelineError::synthesis(&sql, &e))?;
    Ok((sql, query))
}

fn synthesize_and_run(
    req: &NlRequest,
    catalog: &TableCatalog,
    lm: &dyn LanguageModel,
    variant: SqlVariant,
    stages: &mut Stages,
) -> Result<Table, PipelineError> {
    let (sql, query) = stages.time("syn", || synthesize_sql(req, catalog, lm, variant))?;
    stages.time("exec", || {
        execute_sql(&query, catalog).map_err(|e| PipelineError::synthesis(&sql, &e))
    })
}

/// Answers from already-serialized rows: a parsed list for scored query
/// types, the raw reply for aggregation.
pub fn generate_answer<S: AsRef<str>>(
    req: &NlRequest,
    rows: &[S],
    lm: &dyn LanguageModel,
) -> Result<Answer, PipelineError> {
    if req.query_type == QueryType::Aggregation {
        let prompt = aggregation_answer_prompt(rows, &req.text);
        let resp = lm.complete(&LmRequest::new(prompt).with_max_tokens(1024))?;
        return Ok(Answer::text(resp.text.trim()));
    }
    let prompt = list_answer_prompt(rows, &req.text);
    let resp = lm.complete(&LmRequest::new(prompt).with_max_tokens(512))?;
    Ok(Answer::values(parse_answer_list(&resp.text)?))
}

pub fn generate_answer_for_table(req: &NlRequest, t: &Table, lm: &dyn LanguageModel) -> Result<Answer, PipelineError> {
    let rows = (0..t.len())
        .map(|i| t.serialize_row(i, None))
        .collect::<Result<Vec<_>, _>>()?;
    generate_answer(req, &rows, lm)
}

/// SQL computes the answer directly. For aggregation the result table is
/// returned as serialized data points.
pub fn run_text2sql(
    req: &NlRequest,
    catalog: &TableCatalog,
    lm: &dyn LanguageModel,
) -> Result<RunOutcome, PipelineError> {
    let mut stages = Stages::default();
    let t = synthesize_and_run(req, catalog, lm, SqlVariant::Answer, &mut stages)?;
    let answer = if req.query_type == QueryType::Aggregation {
        Answer::text(t.serialize_table(None))
    } else {
        Answer::values(table_to_values(&t))
    };
    Ok(stages.finish(answer, Vec::new()))
}

/// SQL fetches rows, the LM answers over them.
pub fn run_text2sql_lm(
    req: &NlRequest,
    catalog: &TableCatalog,
    lm: &dyn LanguageModel,
) -> Result<RunOutcome, PipelineError> {
    let mut stages = Stages::default();
    let t = synthesize_and_run(req, catalog, lm, SqlVariant::RowRetrieval, &mut stages)?;
    let answer = stages.time("gen", || generate_answer_for_table(req, &t, lm))?;
    Ok(stages.finish(answer, Vec::new()))
}

fn serialize_hits(hits: &[ScoredRow], catalog: &TableCatalog) -> Result<Vec<String>, PipelineError> {
    hits.iter()
        .map(|h| Ok(catalog.get(&h.table_name)?.serialize_row(h.row_index, None)?))
        .collect()
}

/// Top rows by embedding similarity, then generation.
pub fn run_rag(
    req: &NlRequest,
    catalog: &TableCatalog,
    index: &VectorIndex,
    lm: &dyn LanguageModel,
    embedder: &dyn Embedder,
) -> Result<RunOutcome, PipelineError> {
    let mut stages = Stages::default();
    let hits = stages.time("retrieve", || index.search(&req.text, RAG_TOP_K, embedder))?;
    let rows = serialize_hits(&hits, catalog)?;
    let answer = stages.time("gen", || generate_answer(req, &rows, lm))?;
    Ok(stages.finish(answer, Vec::new()))
}

/// Top rows by embedding similarity, reordered by LM relevance scores, then
/// generation.
pub fn run_retrieval_rank(
    req: &NlRequest,
    catalog: &TableCatalog,
    index: &VectorIndex,
    lm: &dyn LanguageModel,
    embedder: &dyn Embedder,
) -> Result<RunOutcome, PipelineError> {
    let mut stages = Stages::default();
    let hits = stages.time("retrieve", || index.search(&req.text, RAG_TOP_K, embedder))?;
    let reranked = stages.time("rerank", || lm_rerank(&hits, catalog, &req.text, lm))?;
    let rows = serialize_hits(&reranked.rows, catalog)?;
    let answer = stages.time("gen", || generate_answer(req, &rows, lm))?;
    Ok(stages.finish(answer, reranked.warnings))
}

/// Runs a hand-written plan. Aggregation requests need a `sem_agg`
/// terminal and the other types an `extract` terminal.
pub fn run_handwritten(
    plan: &Plan,
    req: &NlRequest,
    catalog: &TableCatalog,
    lm: &dyn LanguageModel,
) -> Result<RunOutcome, PipelineError> {
    let out = evaluate_plan(plan, catalog, lm)?;
    let free_text = matches!(out.answer, Answer::FreeText { .. });
    if free_text != (req.query_type == QueryType::Aggregation) {
        return Err(PipelineError::Plan(format!(
            "plan `{}` yields the wrong answer kind for a {} query",
            plan.case_id, req.query_type
        )));
    }
    Ok(out)
}
