use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use super::{score_exact_match, BenchError, BenchmarkCase, EvalResult, MatchConfig};
use crate::lm::{fan_out, LanguageModel};
use crate::pipeline::{
    run_handwritten, run_rag, run_retrieval_rank, run_text2sql, run_text2sql_lm, FailureKind, Method, PipelineError,
    Plan, RunOutcome,
};
use crate::retrieval::{Embedder, VectorIndex};
use crate::table::{CatalogHints, TableCatalog};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Holds one sub-directory of CSV files per domain.
    pub data_dir: PathBuf,
    /// Holds `<plan_ref>.json` files for the hand-written method.
    pub plans_dir: Option<PathBuf>,
    pub methods: Vec<Method>,
    /// Cases run concurrently.
    pub workers: usize,
    pub matching: MatchConfig,
}

impl BenchConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        BenchConfig {
            data_dir: data_dir.into(),
            plans_dir: None,
            methods: Method::ALL.to_vec(),
            workers: 1,
            matching: MatchConfig::default(),
        }
    }
}

#[derive(Clone)]
pub struct Backends {
    pub lm: Arc<dyn LanguageModel>,
    pub embedder: Arc<dyn Embedder>,
}

/// Catalogs, plans and indexes shared by all runs of a benchmark.
#[derive(Default)]
pub struct Resources {
    catalogs: HashMap<String, Arc<TableCatalog>>,
    plans: HashMap<String, Result<Arc<Plan>, String>>,
    indexes: HashMap<String, Result<Arc<VectorIndex>, (FailureKind, String)>>,
}

fn merge_hints(domain: &str, into: &mut CatalogHints, from: &CatalogHints) -> Result<(), BenchError> {
    for (table, cols) in from {
        let slot = into.entry(table.clone()).or_default();
        for (col, ty) in cols {
            match slot.insert(col.clone(), *ty) {
                Some(prev) if prev != *ty => {
                    return Err(BenchError::Config(format!(
                        "conflicting type hints for {domain}.{table}.{col}: {prev} vs {ty}"
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

impl Resources {
    /// Loads every domain's tables and every referenced plan, and builds
    /// per-domain indexes when a retrieval method is selected. Missing data
    /// directories and plan files are fatal; other per-domain problems are
    /// recorded and reported against each affected case.
    pub fn prepare(cases: &[BenchmarkCase], cfg: &BenchConfig, backends: &Backends) -> Result<Self, BenchError> {
        let mut hints: HashMap<&str, CatalogHints> = HashMap::new();
        for c in cases {
            let h = hints.entry(c.domain.as_str()).or_default();
            if let Some(th) = &c.type_hints {
                merge_hints(&c.domain, h, th)?;
            }
        }
        let mut res = Resources::default();
        let mut domains: Vec<&str> = hints.keys().copied().collect();
        domains.sort_unstable();
        for d in &domains {
            let dir = cfg.data_dir.join(d);
            if !dir.is_dir() {
                return Err(BenchError::Config(format!(
                    "data directory {} not found",
                    dir.display()
                )));
            }
            let h = &hints[d];
            let cat = TableCatalog::load_dir(&cfg.data_dir, d, (!h.is_empty()).then_some(h)).map_err(|source| {
                BenchError::Data {
                    domain: d.to_string(),
                    source,
                }
            })?;
            res.catalogs.insert(d.to_string(), Arc::new(cat));
        }
        if cfg.methods.contains(&Method::Handwritten) {
            for c in cases {
                let Some(r) = &c.plan_ref else { continue };
                if res.plans.contains_key(r) {
                    continue;
                }
                let dir = cfg.plans_dir.as_ref().ok_or_else(|| {
                    BenchError::Config("hand-written method selected without a plans directory".into())
                })?;
                let path = dir.join(format!("{r}.json"));
                let text = std::fs::read_to_string(&path).map_err(|_| BenchError::MissingPlan {
                    case_id: c.id.clone(),
                    path: path.clone(),
                })?;
                res.plans.insert(
                    r.clone(),
                    Plan::from_json(&text).map(Arc::new).map_err(|e| e.to_string()),
                );
            }
        }
        if cfg.methods.iter().any(|m| m.needs_index()) {
            for d in &domains {
                let built = VectorIndex::build(&res.catalogs[*d], backends.embedder.as_ref())
                    .map(Arc::new)
                    .map_err(|e| {
                        let e = PipelineError::from(e);
                        (e.failure_kind(), e.to_string())
                    });
                res.indexes.insert(d.to_string(), built);
            }
        }
        Ok(res)
    }

    pub fn catalog(&self, domain: &str) -> Option<&Arc<TableCatalog>> {
        self.catalogs.get(domain)
    }
}

struct Failed(FailureKind, String);

impl From<PipelineError> for Failed {
    fn from(e: PipelineError) -> Self {
        Failed(e.failure_kind(), e.to_string())
    }
}

fn dispatch(case: &BenchmarkCase, method: Method, res: &Resources, b: &Backends) -> Result<RunOutcome, Failed> {
    let req = case.request();
    let catalog = res
        .catalogs
        .get(&case.domain)
        .ok_or_else(|| Failed(FailureKind::Plan, format!("domain `{}` not loaded", case.domain)))?;
    let lm = b.lm.as_ref();
    let index = || match res.indexes.get(&case.domain) {
        Some(Ok(ix)) => Ok(ix.clone()),
        Some(Err((k, m))) => Err(Failed(*k, m.clone())),
        None => Err(Failed(FailureKind::Backend, "index not built".into())),
    };
    Ok(match method {
        Method::Text2Sql => run_text2sql(&req, catalog, lm)?,
        Method::Text2SqlLm => run_text2sql_lm(&req, catalog, lm)?,
        Method::Rag => run_rag(&req, catalog, &*index()?, lm, b.embedder.as_ref())?,
        Method::RetrievalRank => run_retrieval_rank(&req, catalog, &*index()?, lm, b.embedder.as_ref())?,
        Method::Handwritten => {
            let r = case
                .plan_ref
                .as_ref()
                .ok_or_else(|| Failed(FailureKind::Plan, "case has no plan_ref".into()))?;
            let plan = match res.plans.get(r) {
                Some(Ok(p)) => p.clone(),
                Some(Err(m)) => return Err(Failed(FailureKind::Plan, m.clone())),
                None => return Err(Failed(FailureKind::Plan, format!("plan `{r}` not loaded"))),
            };
            run_handwritten(&plan, &req, catalog, lm)?
        }
    })
}

/// Runs one method on one case. Failures become part of the result.
pub fn run_case(
    case: &BenchmarkCase,
    method: Method,
    res: &Resources,
    backends: &Backends,
    matching: &MatchConfig,
) -> EvalResult {
    let start = Instant::now();
    let outcome = dispatch(case, method, res, backends);
    let execution_time_s = start.elapsed().as_secs_f64();
    let mut r = EvalResult {
        case_id: case.id.clone(),
        method,
        query_type: case.query_type,
        capability: case.capability,
        correct: None,
        execution_time_s,
        stages: Vec::new(),
        failure_kind: None,
        error: None,
        answer: None,
    };
    match outcome {
        Ok(out) => {
            for w in &out.warnings {
                log::warn!("{} / {}: {w}", case.id, method);
            }
            r.correct = case.gold.as_ref().map(|g| {
                out.answer
                    .as_values()
                    .is_some_and(|v| score_exact_match(v, g, case.query_type, matching))
            });
            r.stages = out.stages;
            r.answer = Some(out.answer);
        }
        Err(Failed(kind, msg)) => {
            log::info!("{} / {} failed ({kind}): {msg}", case.id, method);
            r.correct = case.gold.as_ref().map(|_| false);
            r.failure_kind = Some(kind);
            r.error = Some(msg);
        }
    }
    r
}

/// Runs every selected method on every case and returns results sorted by
/// (case id, method).
pub fn run_benchmark(
    cases: &[BenchmarkCase],
    cfg: &BenchConfig,
    backends: &Backends,
) -> Result<Vec<EvalResult>, BenchError> {
    if cfg.methods.is_empty() {
        return Err(BenchError::Config("no methods selected".into()));
    }
    let res = Resources::prepare(cases, cfg, backends)?;
    let jobs: Vec<(&BenchmarkCase, Method)> = cases
        .iter()
        .flat_map(|c| cfg.methods.iter().map(move |&m| (c, m)))
        .collect();
    let mut results = fan_out(&jobs, cfg.workers.max(1), |&(c, m)| {
        run_case(c, m, &res, backends, &cfg.matching)
    });
    results.sort_by(|a, b| a.case_id.cmp(&b.case_id).then(a.method.cmp(&b.method)));
    Ok(results)
}
