//! Oracle checks shared by the integration tests and the acceptance
//! target. Each returns `Err` with a description of the first mismatch.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use tag_core::bench::{EvalResult, TIMING_COLUMNS};
use tag_core::lm::{MockLm, MockRule};
use tag_core::pipeline::{
    generate_answer_for_table, run_text2sql, run_text2sql_lm, Answer, Capability, Method, NlRequest, QueryType,
    StageTime,
};
use tag_core::retrieval::{lm_rerank, MockEmbedder, ScoredRow, VectorIndex};
use tag_core::semantic::{sem_agg, sem_filter, sem_map, sem_topk, PromptTemplate};
use tag_core::sql::{execute_sql, parse_sql};
use tag_core::table::parse_csv;
use tag_core::{Column, Schema, Table, TableCatalog, Value, ValueType};

use super::sqlgen;

// ---- SQL executor vs reference evaluator ----

pub fn sql_oracle_case(seed: u64) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let tables = sqlgen::random_catalog(&mut rng);
    let catalog = sqlgen::to_catalog(&tables);
    let q = sqlgen::random_query(&mut rng, &tables);
    let sql = sqlgen::to_sql(&mut rng, &tables, &q);
    let expected = sqlgen::reference_eval(&tables, &q);
    let got = parse_sql(&sql)
        .map_err(|e| e.to_string())
        .and_then(|ast| execute_sql(&ast, &catalog).map_err(|e| e.to_string()));
    match got {
        Ok(t) if sqlgen::same_multiset(t.rows(), &expected) && t.rows() == expected.as_slice() => Ok(()),
        other => Err(format!("seed {seed}: {sql}\n  got {other:?}\n  want {expected:?}")),
    }
}

// ---- vector search vs brute-force scan ----

const VOCAB: [&str; 12] = [
    "palo", "alto", "fresno", "san", "jose", "k-8", "9-12", "boost", "Ada", "NETWORK", "r", "42",
];

/// FNV-1a 64 written out independently of the library.
pub fn fnv(s: &str) -> u64 {
    s.bytes().fold(14695981039346656037u64, |h, b| {
        (h ^ b as u64).wrapping_mul(1099511628211)
    })
}

fn counts(text: &str) -> HashMap<u64, u128> {
    let mut m = HashMap::new();
    let lower = text.to_lowercase();
    for tok in lower
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        *m.entry(fnv(tok) % 256).or_insert(0) += 1;
    }
    m
}

struct OracleRow {
    table: String,
    row: usize,
    dot: u128,
    norm2: u128,
    score: f64,
}

/// Exact ordering over integer counts: cos_a > cos_b iff
/// dot_a^2 * |b|^2 > dot_b^2 * |a|^2, the query norm being shared.
/// Rows with no tokens score 0.
fn oracle_cmp(a: &OracleRow, b: &OracleRow) -> Ordering {
    let key = |r: &OracleRow, other: &OracleRow| match (r.norm2, other.norm2) {
        (0, _) => 0,
        (_, 0) => r.dot,
        _ => r.dot * r.dot * other.norm2,
    };
    key(b, a)
        .cmp(&key(a, b))
        .then_with(|| a.table.cmp(&b.table))
        .then_with(|| a.row.cmp(&b.row))
}

fn random_words(rng: &mut StdRng) -> String {
    let n = rng.gen_range(0..4);
    (0..n)
        .map(|_| *VOCAB.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random text catalog plus each row's serialization, written out by hand.
pub fn random_text_catalog(rng: &mut StdRng) -> (TableCatalog, Vec<(String, usize, String)>) {
    let mut tables = Vec::new();
    let mut texts = Vec::new();
    for t in 0..rng.gen_range(1..=3) {
        let name = format!("t{t}");
        let ncols = rng.gen_range(1..=3);
        let schema = Schema::new(
            (0..ncols)
                .map(|c| Column::new(format!("c{c}"), ValueType::Text))
                .collect(),
        )
        .unwrap();
        let rows: Vec<Vec<Value>> = (0..rng.gen_range(1..=20))
            .map(|_| (0..ncols).map(|_| Value::Text(random_words(rng))).collect())
            .collect();
        for (i, r) in rows.iter().enumerate() {
            let text = r
                .iter()
                .enumerate()
                .map(|(c, v)| format!("- c{c}: {}", v.as_text().unwrap()))
                .collect::<Vec<_>>()
                .join("\n");
            texts.push((name.clone(), i, text));
        }
        tables.push(Table::new(name, schema, rows).unwrap());
    }
    (TableCatalog::from_tables("d", tables).unwrap(), texts)
}

pub const SCORE_TOLERANCE: f64 = 1e-9;

pub fn vector_search_case(seed: u64) -> Result<(), String> {
    let embedder = MockEmbedder::default();
    let mut rng = StdRng::seed_from_u64(seed);
    let (catalog, texts) = random_text_catalog(&mut rng);
    let index = VectorIndex::build(&catalog, &embedder).map_err(|e| e.to_string())?;
    if index.len() != texts.len() {
        return Err(format!("seed {seed}: {} entries for {} rows", index.len(), texts.len()));
    }
    let query = if rng.gen_bool(0.2) {
        texts.choose(&mut rng).unwrap().2.clone()
    } else {
        random_words(&mut rng)
    };
    let k = rng.gen_range(1..=texts.len() + 3);
    let q = counts(&query);
    let qn2: u128 = q.values().map(|v| v * v).sum();
    let mut oracle: Vec<OracleRow> = texts
        .iter()
        .map(|(table, row, text)| {
            let c = counts(text);
            let norm2: u128 = c.values().map(|v| v * v).sum();
            let dot: u128 = c.iter().map(|(b, v)| v * q.get(b).copied().unwrap_or(0)).sum();
            let score = if norm2 == 0 || qn2 == 0 {
                0.0
            } else {
                dot as f64 / ((norm2 as f64).sqrt() * (qn2 as f64).sqrt())
            };
            OracleRow {
                table: table.clone(),
                row: *row,
                dot,
                norm2,
                score,
            }
        })
        .collect();
    oracle.sort_by(oracle_cmp);
    oracle.truncate(k);
    let got = index.search(&query, k, &embedder).map_err(|e| e.to_string())?;
    if got.len() != oracle.len() {
        return Err(format!(
            "seed {seed}: {} results, oracle has {}",
            got.len(),
            oracle.len()
        ));
    }
    for (g, o) in got.iter().zip(&oracle) {
        if (&g.table_name, g.row_index) != (&o.table, o.row) || (g.score - o.score).abs() > SCORE_TOLERANCE {
            return Err(format!(
                "seed {seed}, query {query:?}: got ({}, {}, {}) where oracle has ({}, {}, {})",
                g.table_name, g.row_index, g.score, o.table, o.row, o.score
            ));
        }
    }
    Ok(())
}

// ---- semantic operator invariants ----

/// `n` rows with a unique `<r{i}>` name and their position.
pub fn items(n: usize) -> Table {
    let schema = Schema::new(vec![
        Column::new("name", ValueType::Text),
        Column::new("pos", ValueType::Int),
    ])
    .unwrap();
    let rows = (0..n)
        .map(|i| vec![Value::Text(format!("<r{i}>")), Value::Int(i as i64)])
        .collect();
    Table::new("items", schema, rows).unwrap()
}

pub fn positions(t: &Table) -> Vec<i64> {
    t.rows()
        .iter()
        .map(|r| match r.get(1) {
            Some(Value::Int(i)) => *i,
            _ => -1,
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn check_filter(verdicts: &[bool]) -> Result<(), String> {
    let t = items(verdicts.len());
    let rules = verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| MockRule::new(format!("<r{i}>"), if *v { " True, because" } else { "false" }))
        .collect();
    let lm = MockLm::new(rules, None);
    let out = sem_filter(&t, &PromptTemplate::parse("{name} qualifies").unwrap(), &lm).map_err(|e| e.to_string())?;
    let expected: Vec<i64> = (0..verdicts.len()).filter(|&i| verdicts[i]).map(|i| i as i64).collect();
    ensure(positions(&out) == expected, || {
        format!("filter kept {:?}, expected {expected:?}", positions(&out))
    })?;
    ensure(out.schema() == t.schema(), || "filter changed the schema".into())?;
    ensure(lm.calls() == verdicts.len(), || {
        format!("filter made {} calls for {} rows", lm.calls(), verdicts.len())
    })
}

/// Scores are `s / 4` for `s` in `scores`, so ties are frequent.
pub fn check_topk(scores: &[u8], k: usize) -> Result<(), String> {
    let t = items(scores.len());
    let rules = scores
        .iter()
        .enumerate()
        .map(|(i, s)| MockRule::new(format!("<r{i}>"), format!("{}", *s as f64 / 4.0)))
        .collect();
    let lm = MockLm::new(rules, None);
    let out =
        sem_topk(&t, &PromptTemplate::parse("How good is {name}?").unwrap(), k, &lm).map_err(|e| e.to_string())?;
    // selection by repeated maximum, the earliest position winning ties
    let mut left: Vec<usize> = (0..scores.len()).collect();
    let mut expected = Vec::new();
    while expected.len() < k && !left.is_empty() {
        let mut best = left[0];
        for &i in &left {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        left.retain(|&i| i != best);
        expected.push(best as i64);
    }
    ensure(positions(&out.table) == expected, || {
        format!("topk returned {:?}, expected {expected:?}", positions(&out.table))
    })?;
    ensure(out.table.len() == k.min(scores.len()), || "topk size".into())?;
    ensure(lm.calls() == scores.len(), || {
        format!("topk made {} calls for {} rows", lm.calls(), scores.len())
    })
}

pub fn check_map(n: usize) -> Result<(), String> {
    let t = items(n);
    let rules = (0..n)
        .map(|i| MockRule::new(format!("<r{i}>"), format!("  tag{}  ", i * 7)))
        .collect();
    let lm = MockLm::new(rules, None);
    let out = sem_map(&t, &PromptTemplate::parse("Label {name}").unwrap(), "label", &lm).map_err(|e| e.to_string())?;
    ensure(out.schema().len() == 3, || "map schema".into())?;
    ensure(positions(&out) == (0..n as i64).collect::<Vec<_>>(), || {
        "map reordered rows".into()
    })?;
    for (i, r) in out.rows().iter().enumerate() {
        ensure(r[2] == Value::Text(format!("tag{}", i * 7)), || {
            format!("map row {i}: {:?}", r[2])
        })?;
    }
    ensure(lm.calls() == n, || {
        format!("map made {} calls for {n} rows", lm.calls())
    })
}

fn padded(n: usize) -> Table {
    let schema = Schema::new(vec![Column::new("c", ValueType::Text)]).unwrap();
    let rows = (0..n).map(|i| vec![Value::Text(format!("{i:0>20}"))]).collect();
    Table::new("t", schema, rows).unwrap()
}

/// Greedy chunking computed from the literal prompt text.
pub fn oracle_chunks(instruction: &str, rows: &[String], budget: usize) -> Vec<Vec<String>> {
    let prompt = |chunk: &[String]| {
        let blocks: Vec<String> = chunk
            .iter()
            .enumerate()
            .map(|(i, r)| format!("Data Point {}:\n{r}", i + 1))
            .collect();
        format!("{instruction}\n\n{}", blocks.join("\n\n"))
    };
    let fits = |chunk: &[String]| prompt(chunk).chars().count().div_ceil(4) <= budget;
    let mut out: Vec<Vec<String>> = vec![Vec::new()];
    for r in rows {
        let mut trial = out.last().unwrap().clone();
        trial.push(r.clone());
        if fits(&trial) {
            *out.last_mut().unwrap() = trial;
        } else {
            out.push(vec![r.clone()]);
        }
    }
    out
}

/// 100 rows of 25 characters under a 360-token budget pack into chunks of
/// 34, 34 and 32 rows; the three partial answers fold in one more call.
pub fn check_agg_fold() -> Result<(), String> {
    let rows: Vec<String> = (0..100).map(|i| format!("- c: {i:0>20}")).collect();
    let sizes: Vec<usize> = oracle_chunks("Summarize", &rows, 360).iter().map(Vec::len).collect();
    ensure(sizes == [34, 34, 32], || format!("oracle chunks {sizes:?}"))?;
    let lm = MockLm::constant("S").with_budget(360);
    let out = sem_agg(&padded(100), "Summarize", &lm, true).map_err(|e| e.to_string())?;
    ensure(out == "S", || format!("answer {out:?}"))?;
    ensure(lm.calls() == 4, || format!("{} calls, expected 4", lm.calls()))?;
    let prompts = lm.prompts();
    ensure(prompts[0].ends_with(&format!("Data Point 34:\n{}", rows[33])), || {
        "first chunk boundary".into()
    })?;
    ensure(
        prompts[2].starts_with(&format!("Summarize\n\nData Point 1:\n{}", rows[68])),
        || "third chunk start".into(),
    )?;
    let fold = "Summarize\n\nData Point 1:\n- summary: S\n\nData Point 2:\n- summary: S\n\nData Point 3:\n- summary: S";
    ensure(prompts[3] == fold, || format!("fold prompt {:?}", prompts[3]))
}

/// Random inputs for the three per-row operators.
pub fn semantic_case(seed: u64) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(0..30);
    let verdicts: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    let scores: Vec<u8> = (0..n).map(|_| rng.gen_range(0..5)).collect();
    let k = rng.gen_range(1..40);
    check_filter(&verdicts)
        .and_then(|_| check_topk(&scores, k))
        .and_then(|_| check_map(n))
}

// ---- prompt snapshots ----

pub const SYNTHESIS_QUESTION: &str =
    "Among the schools with the average score in Math over 560 in the SAT test, how many schools are in the bay area?";

pub fn golden(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("testdata/golden")
        .join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn golden_schools() -> Table {
    parse_csv(
        "schools",
        "School,City,Longitude\nGunn High,Palo Alto,-122.13\nFresno High,Fresno,-119.8\n",
        None,
    )
    .unwrap()
}

fn golden_comments() -> Table {
    parse_csv(
        "comments",
        "PostId,Text\n7,Gentle boosting uses Newton steps.\n7,See the Friedman paper.\n",
        None,
    )
    .unwrap()
}

fn golden_catalog() -> TableCatalog {
    let sat = parse_csv("satscores", "cds,AvgScrMath\n1,600\n", None).unwrap();
    TableCatalog::from_tables("california_schools", [golden_schools(), sat]).unwrap()
}

fn nl(text: &str, query_type: QueryType) -> NlRequest {
    NlRequest {
        text: text.into(),
        query_type,
        capability: Capability::Reasoning,
        domain: "california_schools".into(),
    }
}

/// Every prompt kind as actually sent to the backend, paired with the name
/// of its golden file.
pub fn captured_prompts() -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    let first = |lm: &MockLm| lm.prompts().into_iter().next().unwrap_or_default();

    let lm = MockLm::constant("* FROM schools");
    let _ = run_text2sql(&nl(SYNTHESIS_QUESTION, QueryType::Match), &golden_catalog(), &lm);
    out.push(("synthesis_answer.txt", first(&lm)));

    let lm = MockLm::constant("* FROM schools");
    let _ = run_text2sql_lm(&nl(SYNTHESIS_QUESTION, QueryType::Match), &golden_catalog(), &lm);
    out.push(("synthesis_rows.txt", first(&lm)));

    let lm = MockLm::constant("[]");
    let _ = generate_answer_for_table(&nl(SYNTHESIS_QUESTION, QueryType::Match), &golden_schools(), &lm);
    out.push(("list_answer.txt", first(&lm)));

    let agg_q = "Summarize the comments made on the post titled \"How does gentle boosting differ from AdaBoost?\" to answer the original question.";
    let lm = MockLm::constant("summary");
    let _ = generate_answer_for_table(&nl(agg_q, QueryType::Aggregation), &golden_comments(), &lm);
    out.push(("aggregation_answer.txt", first(&lm)));

    out.push((
        "row_serialization.txt",
        golden_schools().serialize_row(0, None).unwrap(),
    ));

    let cities = parse_csv("c", "City\nPalo Alto\n", None).unwrap();
    let lm = MockLm::constant("True");
    let _ = sem_filter(
        &cities,
        &PromptTemplate::parse("{City} is a city in the Silicon Valley region").unwrap(),
        &lm,
    );
    out.push(("sem_filter.txt", first(&lm)));

    let posts = parse_csv("posts", "Title\nHow does gentle boosting differ from AdaBoost?\n", None).unwrap();
    let lm = MockLm::constant("0.5");
    let _ = sem_topk(
        &posts,
        &PromptTemplate::parse("What {Title} is most technical?").unwrap(),
        5,
        &lm,
    );
    out.push(("sem_topk.txt", first(&lm)));

    let lm = MockLm::constant("S");
    let _ = sem_agg(&golden_comments(), "Summarize the comments", &lm, true);
    out.push(("sem_agg.txt", first(&lm)));

    let lm = MockLm::constant("0.5");
    let rows = [ScoredRow {
        table_name: "schools".into(),
        row_index: 0,
        score: 0.3,
    }];
    let _ = lm_rerank(
        &rows,
        &golden_catalog(),
        "Which Silicon Valley school has the highest longitude?",
        &lm,
    );
    out.push(("rerank.txt", first(&lm)));
    out
}

// ---- report shape ----

/// Published benchmark rows: method, then EM/ET pairs for overall, match,
/// comparison, ranking and aggregation.
pub const PUBLISHED: [(Method, [&str; 10]); 5] = [
    (
        Method::Text2Sql,
        [
            "0.17", "5.63", "0.20", "4.72", "0.20", "4.01", "0.10", "7.26", "N/A", "6.53",
        ],
    ),
    (
        Method::Rag,
        [
            "0.00", "3.23", "0.00", "3.73", "0.00", "2.29", "0.00", "2.01", "N/A", "4.89",
        ],
    ),
    (
        Method::RetrievalRank,
        [
            "0.02", "4.82", "0.00", "6.20", "0.05", "4.19", "0.00", "3.42", "N/A", "5.46",
        ],
    ),
    (
        Method::Text2SqlLm,
        [
            "0.13", "9.08", "0.10", "11.25", "0.10", "3.89", "0.20", "11.80", "N/A", "9.38",
        ],
    ),
    (
        Method::Handwritten,
        [
            "0.55", "2.94", "0.60", "1.70", "0.65", "5.05", "0.40", "2.50", "N/A", "2.50",
        ],
    ),
];

/// Twenty results per query type and method whose per-type accuracy and
/// constant per-type time equal the published cells.
pub fn published_results() -> Vec<EvalResult> {
    let mut out = Vec::new();
    for (method, cells) in PUBLISHED {
        for (t, q) in QueryType::ALL.into_iter().enumerate() {
            let et: f64 = cells[3 + 2 * t].parse().unwrap();
            let correct = if q.is_scored() {
                (cells[2 + 2 * t].parse::<f64>().unwrap() * 20.0).round() as usize
            } else {
                0
            };
            for i in 0..20 {
                out.push(EvalResult {
                    case_id: format!("{}{i:02}", q.name()),
                    method,
                    query_type: q,
                    capability: if i % 2 == 0 {
                        Capability::Knowledge
                    } else {
                        Capability::Reasoning
                    },
                    correct: q.is_scored().then_some(i < correct),
                    execution_time_s: et,
                    stages: vec![StageTime {
                        stage: "total".into(),
                        seconds: et,
                    }],
                    failure_kind: None,
                    error: None,
                    answer: Some(if q.is_scored() {
                        Answer::values(vec![])
                    } else {
                        Answer::text("summary")
                    }),
                });
            }
        }
    }
    out
}

/// Cells of the markdown row starting with `label` in the table under
/// `heading`.
pub fn report_row(text: &str, heading: &str, label: &str) -> Option<Vec<String>> {
    let section = text.split("## ").find(|s| s.starts_with(heading))?;
    let line = section.lines().find(|l| l.starts_with(&format!("| {label} ")))?;
    Some(
        line.trim_matches('|')
            .split('|')
            .map(|c| c.trim().to_string())
            .collect(),
    )
}

pub const BY_TYPE: &str = "Exact match and execution time by query type";
pub const BY_CAPABILITY: &str = "Exact match and execution time by capability";

pub fn check_published_report(text: &str) -> Result<(), String> {
    for (method, cells) in PUBLISHED {
        let row = report_row(text, BY_TYPE, method.label()).ok_or(format!("no row for {}", method.label()))?;
        ensure(row[1..] == cells, || {
            format!("{}: rendered {:?}, published {cells:?}", method.label(), &row[1..])
        })?;
    }
    Ok(())
}

// ---- CSV ----

/// The CSV with timing columns removed.
pub fn strip_timing(csv_text: &str) -> String {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&i| !TIMING_COLUMNS.contains(&&header[i]))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(keep.iter().map(|&i| &header[i])).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        w.write_record(keep.iter().map(|&i| &rec[i])).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
