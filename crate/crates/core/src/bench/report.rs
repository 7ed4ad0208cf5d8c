use super::EvalResult;
use crate::pipeline::{Answer, Capability, FailureKind, Method, QueryType, StageTime};

pub const CSV_HEADER: [&str; 10] = [
    "case_id",
    "method",
    "query_type",
    "capability",
    "correct",
    "failure_kind",
    "execution_time_s",
    "stages",
    "error",
    "answer",
];

/// Columns that vary between otherwise identical runs.
pub const TIMING_COLUMNS: [&str; 2] = ["execution_time_s", "stages"];

/// Rendered tables plus the per-result CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Two markdown tables: by query type, then by capability.
    pub text: String,
    pub csv: String,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn em<'a>(rs: impl Iterator<Item = &'a EvalResult>) -> String {
    cell(mean(rs.filter_map(|r| r.correct).map(|c| if c { 1.0 } else { 0.0 })))
}

fn et<'a>(rs: impl Iterator<Item = &'a EvalResult>) -> String {
    cell(mean(rs.map(|r| r.execution_time_s)))
}

fn type_label(q: QueryType) -> &'static str {
    match q {
        QueryType::Match => "Match-based",
        QueryType::Comparison => "Comparison",
        QueryType::Ranking => "Ranking",
        QueryType::Aggregation => "Aggregation",
    }
}

fn markdown(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("| {} |", padded.join(" | "))
    };
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let mut out = vec![line(header), line(&rule)];
    out.extend(rows.iter().map(|r| line(r)));
    out.join("\n")
}

fn methods_present(results: &[EvalResult]) -> Vec<Method> {
    Method::ALL
        .into_iter()
        .filter(|m| results.iter().any(|r| r.method == *m))
        .collect()
}

fn by_type_table(results: &[EvalResult]) -> String {
    let mut header = vec!["Method".to_string(), "Overall EM".into(), "Overall ET (s)".into()];
    for q in QueryType::ALL {
        header.push(format!("{} EM", type_label(q)));
        header.push(format!("{} ET (s)", type_label(q)));
    }
    let rows: Vec<Vec<String>> = methods_present(results)
        .into_iter()
        .map(|m| {
            let of = || results.iter().filter(move |r| r.method == m);
            let mut row = vec![
                m.label().to_string(),
                em(of().filter(|r| r.query_type.is_scored())),
                et(of()),
            ];
            for q in QueryType::ALL {
                row.push(if q.is_scored() {
                    em(of().filter(|r| r.query_type == q))
                } else {
                    "N/A".to_string()
                });
                row.push(et(of().filter(|r| r.query_type == q)));
            }
            row
        })
        .collect();
    markdown(&header, &rows)
}

fn by_capability_table(results: &[EvalResult]) -> String {
    let caps = [Capability::Knowledge, Capability::Reasoning];
    let mut header = vec!["Method".to_string()];
    for c in caps {
        let label = match c {
            Capability::Knowledge => "Knowledge",
            Capability::Reasoning => "Reasoning",
        };
        header.push(format!("{label} EM"));
        header.push(format!("{label} ET (s)"));
    }
    let rows: Vec<Vec<String>> = methods_present(results)
        .into_iter()
        .map(|m| {
            let mut row = vec![m.label().to_string()];
            for c in caps {
                let of = || results.iter().filter(move |r| r.method == m && r.capability == c);
                row.push(em(of().filter(|r| r.query_type.is_scored())));
                row.push(et(of()));
            }
            row
        })
        .collect();
    markdown(&header, &rows)
}

/// Renders the two summary tables and the per-result CSV. Accuracy is the
/// mean of the correct flags over scored (non-aggregation) results of a
/// group; ET is the mean wall-clock time over all results of the group.
pub fn render_report(results: &[EvalResult]) -> Report {
    let text = format!(
        "## Exact match and execution time by query type\n\n{}\n\n\
         EM excludes aggregation queries; their answers are kept in the CSV for manual review.\n\n\
         ## Exact match and execution time by capability\n\n{}\n",
        by_type_table(results),
        by_capability_table(results)
    );
    Report {
        text,
        csv: results_to_csv(results),
    }
}

fn stages_cell(stages: &[StageTime]) -> String {
    stages
        .iter()
        .map(|s| format!("{}={}", s.stage, s.seconds))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn results_to_csv(results: &[EvalResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("write to memory");
    for r in results {
        let answer = r
            .answer
            .as_ref()
            .map(|a| serde_json::to_string(a).expect("answers serialize"))
            .unwrap_or_default();
        w.write_record([
            r.case_id.clone(),
            r.method.id().to_string(),
            r.query_type.name().to_string(),
            r.capability.name().to_string(),
            r.correct.map(|c| c.to_string()).unwrap_or_default(),
            r.failure_kind.map(|k| k.name().to_string()).unwrap_or_default(),
            r.execution_time_s.to_string(),
            stages_cell(&r.stages),
            r.error.clone().unwrap_or_default(),
            answer,
        ])
        .expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8")
}

fn opt(s: &str) -> Option<&str> {
    (!s.is_empty()).then_some(s)
}

/// Parses CSV produced by [`results_to_csv`].
pub fn results_from_csv(text: &str) -> Result<Vec<EvalResult>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let at = |e: String| format!("record {}: {e}", line + 1);
        let f = |i: usize| rec.get(i).unwrap_or("");
        let stages = opt(f(7))
            .map(|s| {
                s.split(';')
                    .map(|kv| {
                        let (k, v) = kv.split_once('=').ok_or(format!("bad stage {kv:?}"))?;
                        Ok(StageTime {
                            stage: k.to_string(),
                            seconds: v.parse().map_err(|e| format!("{e}"))?,
                        })
                    })
                    .collect::<Result<Vec<_>, String>>()
            })
            .transpose()
            .map_err(at)?
            .unwrap_or_default();
        out.push(EvalResult {
            case_id: f(0).to_string(),
            method: f(1).parse::<Method>().map_err(at)?,
            query_type: f(2).parse::<QueryType>().map_err(at)?,
            capability: f(3).parse::<Capability>().map_err(at)?,
            correct: opt(f(4))
                .map(|s| s.parse::<bool>().map_err(|e| at(e.to_string())))
                .transpose()?,
            failure_kind: opt(f(5)).map(|s| s.parse::<FailureKind>().map_err(at)).transpose()?,
            execution_time_s: f(6).parse().map_err(|e| at(format!("{e}")))?,
            stages,
            error: opt(f(8)).map(str::to_string),
            answer: opt(f(9))
                .map(|s| serde_json::from_str::<Answer>(s).map_err(|e| at(e.to_string())))
                .transpose()?,
        });
    }
    Ok(out)
}
