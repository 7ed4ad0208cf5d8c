use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tag_core::bench::{
    load_cases, render_report, run_benchmark, run_case, Backends, BenchConfig, MatchConfig, Resources,
};
use tag_core::lm::{HttpLm, HttpLmConfig, MockConfig, MockLm};
use tag_core::pipeline::{evaluate_plan, Method, Plan};
use tag_core::retrieval::{HttpEmbedder, MockEmbedder};
use tag_core::TableCatalog;

/// Table-augmented generation benchmark harness.
#[derive(Parser)]
#[command(name = "tag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run methods over a case file and write the report.
    Bench(BenchArgs),
    /// Run one method on one case and print the outcome.
    Run(RunArgs),
    /// Hand-written plan commands.
    Plan {
        #[command(subcommand)]
        command: PlanCommand,
    },
}

#[derive(Subcommand)]
enum PlanCommand {
    /// Evaluate a plan file against a domain's tables.
    Exec(PlanExecArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Mode {
    /// Deterministic mock LM and hashed bag-of-words embedder.
    #[arg(long)]
    mock: bool,
    /// HTTP backends configured by TAG_LM_ENDPOINT, TAG_LM_MODEL,
    /// TAG_LM_API_KEY, TAG_EMBED_ENDPOINT and TAG_EMBED_MODEL.
    #[arg(long)]
    live: bool,
}

#[derive(Args)]
struct BackendArgs {
    #[command(flatten)]
    mode: Mode,
    /// Mock rule file (JSON: {"rules": [{"pattern", "response", "priority"}], "default"}).
    #[arg(long, requires = "mock")]
    mock_rules: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Case file (JSON array).
    #[arg(long)]
    cases: PathBuf,
    /// Directory with one sub-directory of CSV files per domain.
    #[arg(long)]
    data_dir: PathBuf,
    /// Directory of `<plan_ref>.json` files for the hand-written method.
    #[arg(long)]
    plans: Option<PathBuf>,
    /// Compare text exactly and numbers without tolerance.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Comma-separated method ids.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "text2sql,rag,retrieval_rank,text2sql_lm,handwritten"
    )]
    methods: Vec<Method>,
    #[command(flatten)]
    backend: BackendArgs,
    /// Markdown report path; the per-result CSV is written next to it.
    #[arg(long)]
    report: PathBuf,
    /// Cases run concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    #[arg(long)]
    method: Method,
    /// Case id.
    #[arg(long = "case")]
    case_id: String,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct PlanExecArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    domain: String,
    #[arg(long)]
    data_dir: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

fn backends(args: &BackendArgs, needs_embedder: bool) -> Result<Backends> {
    if args.mode.mock {
        let lm = match &args.mock_rules {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let cfg = MockConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?;
                MockLm::from_config(cfg)
            }
            None => MockLm::constant("[]"),
        };
        return Ok(Backends {
            lm: Arc::new(lm),
            embedder: Arc::new(MockEmbedder::default()),
        });
    }
    let lm = HttpLm::new(HttpLmConfig::from_env()?)?;
    // the embedder is only called when a retrieval method runs
    let embedder: Arc<dyn tag_core::retrieval::Embedder> = if needs_embedder {
        Arc::new(HttpEmbedder::from_env()?)
    } else {
        Arc::new(MockEmbedder::default())
    };
    Ok(Backends {
        lm: Arc::new(lm),
        embedder,
    })
}

fn bench_config(suite: &SuiteArgs, methods: Vec<Method>, workers: usize) -> BenchConfig {
    let mut cfg = BenchConfig::new(&suite.data_dir);
    cfg.plans_dir = suite.plans.clone();
    cfg.methods = methods;
    cfg.workers = workers;
    if suite.strict {
        cfg.matching = MatchConfig::strict();
    }
    cfg
}

fn csv_path(report: &Path) -> Result<PathBuf> {
    let csv = report.with_extension("csv");
    if csv == report {
        bail!("report path {} must not end in .csv", report.display());
    }
    Ok(csv)
}

fn bench(args: BenchArgs) -> Result<()> {
    if args.methods.is_empty() {
        bail!("no methods selected");
    }
    let csv = csv_path(&args.report)?;
    let cases = load_cases(&args.suite.cases)?;
    let needs_embedder = args.methods.iter().any(|m| m.needs_index());
    let backends = backends(&args.backend, needs_embedder)?;
    let cfg = bench_config(&args.suite, args.methods, args.workers);
    log::info!("running {} cases x {} methods", cases.len(), cfg.methods.len());
    let results = run_benchmark(&cases, &cfg, &backends)?;
    let report = render_report(&results);
    if let Some(parent) = args.report.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(&args.report, &report.text).with_context(|| format!("writing {}", args.report.display()))?;
    std::fs::write(&csv, &report.csv).with_context(|| format!("writing {}", csv.display()))?;
    print!("{}", report.text);
    eprintln!("wrote {} and {}", args.report.display(), csv.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let cases = load_cases(&args.suite.cases)?;
    let case = cases
        .into_iter()
        .find(|c| c.id == args.case_id)
        .with_context(|| format!("no case `{}` in {}", args.case_id, args.suite.cases.display()))?;
    let backends = backends(&args.backend, args.method.needs_index())?;
    let cfg = bench_config(&args.suite, vec![args.method], 1);
    let res = Resources::prepare(std::slice::from_ref(&case), &cfg, &backends)?;
    let r = run_case(&case, args.method, &res, &backends, &cfg.matching);
    let stages: Vec<_> = r
        .stages
        .iter()
        .map(|s| serde_json::json!({"stage": s.stage, "seconds": s.seconds}))
        .collect();
    let out = serde_json::json!({
        "case_id": r.case_id,
        "method": r.method.id(),
        "correct": r.correct,
        "execution_time_s": r.execution_time_s,
        "stages": stages,
        "failure_kind": r.failure_kind.map(|k| k.name()),
        "error": r.error,
        "answer": r.answer,
        "gold": case.gold,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn plan_exec(args: PlanExecArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.plan).with_context(|| format!("reading {}", args.plan.display()))?;
    let plan = Plan::from_json(&text).with_context(|| format!("loading {}", args.plan.display()))?;
    let catalog = TableCatalog::load_dir(&args.data_dir, &args.domain, None)?;
    let backends = backends(&args.backend, false)?;
    let out = evaluate_plan(&plan, &catalog, backends.lm.as_ref())?;
    for w in &out.warnings {
        log::warn!("{w}");
    }
    println!("{}", serde_json::to_string_pretty(&out.answer)?);
    Ok(())
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    let mut last = out.clone();
    for cause in e.chain().skip(1) {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            out = format!("{out}: {msg}");
        }
        last = msg;
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let outcome = match Cli::parse().command {
        Command::Bench(a) => bench(a),
        Command::Run(a) => run(a),
        Command::Plan {
            command: PlanCommand::Exec(a),
        } => plan_exec(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
