//! The bundled mini-suite, its hand-computed expectations and backend
//! setups.

use std::path::PathBuf;
use std::sync::Arc;

use tag_core::bench::{load_cases, Backends, BenchConfig, BenchmarkCase, EvalResult};
use tag_core::lm::{HttpLm, HttpLmConfig, LanguageModel, LmRequest, MockConfig, MockLm, RetryPolicy};
use tag_core::pipeline::Method;
use tag_core::retrieval::{HttpEmbedder, MockEmbedder};

use super::checks::{report_row, BY_CAPABILITY, BY_TYPE};
use super::stub::{Responder, StubServer};

pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata/mini_suite")
}

pub fn cases() -> Vec<BenchmarkCase> {
    load_cases(&dir().join("cases.json")).expect("mini-suite cases")
}

pub fn config() -> BenchConfig {
    let mut cfg = BenchConfig::new(dir().join("data"));
    cfg.plans_dir = Some(dir().join("plans"));
    cfg
}

pub fn mock_lm() -> MockLm {
    let text = std::fs::read_to_string(dir().join("mock_rules.json")).expect("mock rules");
    MockLm::from_config(MockConfig::from_json(&text).expect("mock rules parse"))
}

pub fn mock_backends() -> Backends {
    Backends {
        lm: Arc::new(mock_lm()),
        embedder: Arc::new(MockEmbedder::default()),
    }
}

/// Stub-server replies following the mini-suite mock rules.
pub fn mock_responder() -> Responder {
    let lm = mock_lm();
    Arc::new(move |prompt: &str| lm.complete(&LmRequest::new(prompt)).map(|r| r.text).unwrap_or_default())
}

/// HTTP backends pointed at `server`.
pub fn http_backends(server: &StubServer, retry: RetryPolicy) -> Backends {
    let mut cfg = HttpLmConfig::new(server.chat_url(), "stub-model");
    cfg.retry = retry.clone();
    cfg.api_key = Some("test-key".into());
    Backends {
        lm: Arc::new(HttpLm::new(cfg).unwrap()),
        embedder: Arc::new(
            HttpEmbedder::new(server.embeddings_url(), "stub-embed", Some("test-key".into()))
                .unwrap()
                .with_retry(retry),
        ),
    }
}

/// Case ids each method answers correctly.
pub const EXPECTED_CORRECT: [(Method, &[&str]); 5] = [
    (Method::Text2Sql, &["c1", "m1"]),
    (Method::Rag, &[]),
    (Method::RetrievalRank, &[]),
    (Method::Text2SqlLm, &["r1"]),
    (Method::Handwritten, &["c1", "c2", "m1", "m2", "r1", "r2"]),
];

/// Accuracy cells: overall, match, comparison, ranking, aggregation, then
/// knowledge and reasoning.
pub const EXPECTED_EM: [(Method, [&str; 7]); 5] = [
    (
        Method::Text2Sql,
        ["0.33", "0.50", "0.50", "0.00", "N/A", "0.67", "0.00"],
    ),
    (Method::Rag, ["0.00", "0.00", "0.00", "0.00", "N/A", "0.00", "0.00"]),
    (
        Method::RetrievalRank,
        ["0.00", "0.00", "0.00", "0.00", "N/A", "0.00", "0.00"],
    ),
    (
        Method::Text2SqlLm,
        ["0.17", "0.00", "0.00", "0.50", "N/A", "0.00", "0.33"],
    ),
    (
        Method::Handwritten,
        ["1.00", "1.00", "1.00", "1.00", "N/A", "1.00", "1.00"],
    ),
];

pub fn correct_ids(results: &[EvalResult], m: Method) -> Vec<String> {
    results
        .iter()
        .filter(|r| r.method == m && r.correct == Some(true))
        .map(|r| r.case_id.clone())
        .collect()
}

pub fn check_outcomes(results: &[EvalResult]) -> Result<(), String> {
    if results.len() != 40 {
        return Err(format!("{} results, expected 40", results.len()));
    }
    for (m, ids) in EXPECTED_CORRECT {
        let got = correct_ids(results, m);
        if got != ids {
            return Err(format!("{m}: correct on {got:?}, expected {ids:?}"));
        }
    }
    Ok(())
}

pub fn check_report_em(text: &str) -> Result<(), String> {
    for (m, cells) in EXPECTED_EM {
        let by_type = report_row(text, BY_TYPE, m.label()).ok_or(format!("no row for {m}"))?;
        let by_cap = report_row(text, BY_CAPABILITY, m.label()).ok_or(format!("no row for {m}"))?;
        let got: Vec<&str> = [1, 3, 5, 7, 9]
            .iter()
            .map(|&i| by_type[i].as_str())
            .chain([1, 3].iter().map(|&i| by_cap[i].as_str()))
            .collect();
        if got != cells {
            return Err(format!("{m}: accuracy cells {got:?}, expected {cells:?}"));
        }
    }
    Ok(())
}
