//! Declarative hand-written pipelines.
//!
//! A plan file is a JSON document:
//!
//! ```json
//! {"case_id": "m1", "ops": [
//!   {"op": "read", "table": "schools"},
//!   {"op": "is_in", "col": "City", "plan": [
//!     {"op": "read", "table": "schools"},
//!     {"op": "unique", "col": "City"},
//!     {"op": "sem_filter", "tpl": "{City} is a city in the Silicon Valley region"}]},
//!   {"op": "sort", "col": "Longitude", "dir": "desc", "by_absolute": true},
//!   {"op": "limit", "n": 1},
//!   {"op": "extract", "cols": ["GSoffered"]}]}
//! ```
//!
//! Ops run left to right on one table. A top-level plan starts with `read`
//! and ends with exactly one terminal (`extract` or `sem_agg`); nested plans
//! (`is_in`, `join`) start with `read` and have no terminal.
//!
//! Relational ops follow the SQL engine: `filter` and `join` never match
//! `Null`, and `sort` orders `Null` first ascending and last descending.
//! `sort` is stable. `unique` yields a one-column table of distinct values
//! in first-appearance order. `join` keeps left columns then right columns;
//! the right key is dropped when both keys share a name, and other shared
//! names get `_x`/`_y` suffixes. `is_in` tests membership in column
//! `plan_col` of the nested result, defaulting to `col` when present there
//! and otherwise to its only column.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Answer, PipelineError, RunOutcome, Stages};
use crate::lm::LanguageModel;
use crate::semantic::{sem_agg, sem_filter, sem_map, sem_topk, PromptTemplate};
use crate::sql::CmpOp;
use crate::table::{Column, Schema, Table, TableCatalog};
use crate::value::Value;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortDir {
    #[default]
    Asc,
    Desc,
}

mod cmp_serde {
    use super::*;

    pub fn serialize<S: Serializer>(op: &CmpOp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(op.symbol())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CmpOp, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanOp {
    Read {
        table: String,
    },
    Project {
        cols: Vec<String>,
    },
    Filter {
        col: String,
        #[serde(with = "cmp_serde")]
        cmp: CmpOp,
        value: Value,
    },
    IsIn {
        col: String,
        plan: Vec<PlanOp>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        plan_col: Option<String>,
    },
    Unique {
        col: String,
    },
    Sort {
        col: String,
        #[serde(default)]
        dir: SortDir,
        #[serde(default)]
        by_absolute: bool,
    },
    Limit {
        n: usize,
    },
    Join {
        plan: Vec<PlanOp>,
        left_col: String,
        right_col: String,
    },
    SemFilter {
        tpl: String,
    },
    SemTopk {
        tpl: String,
        k: usize,
    },
    SemAgg {
        instruction: String,
        #[serde(default)]
        all_cols: bool,
    },
    SemMap {
        tpl: String,
        out_col: String,
    },
    Extract {
        cols: Vec<String>,
    },
}

impl PlanOp {
    pub fn is_terminal(&self) -> bool {
        matches!(self, PlanOp::Extract { .. } | PlanOp::SemAgg { .. })
    }

    fn is_semantic(&self) -> bool {
        matches!(
            self,
            PlanOp::SemFilter { .. } | PlanOp::SemTopk { .. } | PlanOp::SemAgg { .. } | PlanOp::SemMap { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub case_id: String,
    pub ops: Vec<PlanOp>,
}

fn plan_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Plan(msg.into())
}

fn check_shape(ops: &[PlanOp], top: bool) -> Result<(), PipelineError> {
    match ops.first() {
        Some(PlanOp::Read { .. }) => {}
        Some(_) => return Err(plan_err("plan must start with read")),
        None => return Err(plan_err("empty plan")),
    }
    for (i, op) in ops.iter().enumerate() {
        if i > 0 && matches!(op, PlanOp::Read { .. }) {
            return Err(plan_err("read may only appear first"));
        }
        if op.is_terminal() && !(top && i + 1 == ops.len()) {
            return Err(plan_err(if top {
                "terminal op must be last"
            } else {
                "nested plan may not contain a terminal op"
            }));
        }
        if let PlanOp::IsIn { plan, .. } | PlanOp::Join { plan, .. } = op {
            check_shape(plan, false)?;
        }
    }
    if top && !ops.last().is_some_and(PlanOp::is_terminal) {
        return Err(plan_err("plan must end with extract or sem_agg"));
    }
    Ok(())
}

impl Plan {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let plan: Plan = serde_json::from_str(text).map_err(|e| plan_err(format!("invalid plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    /// Checks the structural rules; column and table names are checked
    /// when the plan runs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        check_shape(&self.ops, true)
    }
}

/// Result of evaluating an op sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutput {
    Table(Table),
    Answer(Answer),
}

struct Evaluator<'a> {
    catalog: &'a TableCatalog,
    lm: &'a dyn LanguageModel,
    stages: Stages,
    warnings: Vec<String>,
}

fn col_index(t: &Table, col: &str) -> Result<usize, PipelineError> {
    t.schema()
        .index_of(col)
        .ok_or_else(|| plan_err(format!("table `{}` has no column `{col}`", t.name())))
}

fn matches(a: &Value, b: &Value, cmp: CmpOp) -> Result<bool, PipelineError> {
    match a.compare(b) {
        Ok(Some(ord)) => Ok(cmp.holds(ord)),
        Ok(None) => Ok(false),
        Err((x, y)) => Err(plan_err(format!("cannot compare {} with {}", x.name(), y.name()))),
    }
}

impl Evaluator<'_> {
    fn run(&mut self, ops: &[PlanOp]) -> Result<PlanOutput, PipelineError> {
        let mut cur: Option<Table> = None;
        for op in ops {
            let input = cur.take();
            let started = std::time::Instant::now();
            let out = self.step(op, input)?;
            let stage = if op.is_semantic() { "semantic" } else { "relational" };
            self.stages.add(stage, started.elapsed().as_secs_f64());
            match out {
                PlanOutput::Table(t) => cur = Some(t),
                answer @ PlanOutput::Answer(_) => return Ok(answer),
            }
        }
        cur.map(PlanOutput::Table).ok_or_else(|| plan_err("empty plan"))
    }

    fn sub_table(&mut self, ops: &[PlanOp]) -> Result<Table, PipelineError> {
        match self.run(ops)? {
            PlanOutput::Table(t) => Ok(t),
            PlanOutput::Answer(_) => Err(plan_err("nested plan produced an answer")),
        }
    }

    fn step(&mut self, op: &PlanOp, input: Option<Table>) -> Result<PlanOutput, PipelineError> {
        if let PlanOp::Read { table } = op {
            let t = self
                .catalog
                .find(table)
                .ok_or_else(|| plan_err(format!("unknown table `{table}`")))?;
            return Ok(PlanOutput::Table(t.as_ref().clone()));
        }
        let t = input.ok_or_else(|| plan_err("plan must start with read"))?;
        let table = match op {
            PlanOp::Read { .. } => unreachable!(),
            PlanOp::Project { cols } => t.project(cols)?,
            PlanOp::Filter { col, cmp, value } => {
                let i = col_index(&t, col)?;
                let mut keep = Vec::new();
                for (r, row) in t.rows().iter().enumerate() {
                    if matches(&row[i], value, *cmp)? {
                        keep.push(r);
                    }
                }
                t.select_rows(&keep)
            }
            PlanOp::IsIn { col, plan, plan_col } => {
                let i = col_index(&t, col)?;
                let sub = self.sub_table(plan)?;
                let j = match plan_col {
                    Some(c) => col_index(&sub, c)?,
                    None => match sub.schema().index_of(col) {
                        Some(j) => j,
                        None if sub.schema().len() == 1 => 0,
                        None => return Err(plan_err(format!("is_in: nested result has no column `{col}`"))),
                    },
                };
                let set: Vec<&Value> = sub.rows().iter().map(|r| &r[j]).filter(|v| !v.is_null()).collect();
                let keep: Vec<usize> = t
                    .rows()
                    .iter()
                    .enumerate()
                    .filter(|(_, row)| !row[i].is_null() && set.contains(&&row[i]))
                    .map(|(r, _)| r)
                    .collect();
                t.select_rows(&keep)
            }
            PlanOp::Unique { col } => {
                let t = t.project(std::slice::from_ref(col))?;
                let mut seen: Vec<&Value> = Vec::new();
                let mut keep = Vec::new();
                for (r, row) in t.rows().iter().enumerate() {
                    if !seen.contains(&&row[0]) {
                        seen.push(&row[0]);
                        keep.push(r);
                    }
                }
                t.select_rows(&keep)
            }
            PlanOp::Sort { col, dir, by_absolute } => {
                let i = col_index(&t, col)?;
                let key = |v: &Value| -> Result<Value, PipelineError> {
                    Ok(match (by_absolute, v) {
                        (false, v) | (true, v @ Value::Null) => v.clone(),
                        (true, Value::Int(x)) => Value::Int(x.saturating_abs()),
                        (true, Value::Float(x)) => Value::Float(x.abs()),
                        (true, _) => return Err(plan_err(format!("sort by_absolute on non-numeric column `{col}`"))),
                    })
                };
                let keys = t.rows().iter().map(|r| key(&r[i])).collect::<Result<Vec<_>, _>>()?;
                let mut order: Vec<usize> = (0..t.len()).collect();
                order.sort_by(|&a, &b| {
                    let o = keys[a].total_cmp(&keys[b]);
                    if *dir == SortDir::Desc {
                        o.reverse()
                    } else {
                        o
                    }
                });
                t.select_rows(&order)
            }
            PlanOp::Limit { n } => {
                let keep: Vec<usize> = (0..t.len().min(*n)).collect();
                t.select_rows(&keep)
            }
            PlanOp::Join {
                plan,
                left_col,
                right_col,
            } => {
                let right = self.sub_table(plan)?;
                join(&t, &right, left_col, right_col)?
            }
            PlanOp::SemFilter { tpl } => sem_filter(&t, &PromptTemplate::parse(tpl)?, self.lm)?,
            PlanOp::SemTopk { tpl, k } => {
                let out = sem_topk(&t, &PromptTemplate::parse(tpl)?, *k, self.lm)?;
                self.warnings.extend(out.warnings);
                out.table
            }
            PlanOp::SemMap { tpl, out_col } => sem_map(&t, &PromptTemplate::parse(tpl)?, out_col, self.lm)?,
            PlanOp::SemAgg { instruction, all_cols } => {
                return Ok(PlanOutput::Answer(Answer::text(sem_agg(
                    &t,
                    instruction,
                    self.lm,
                    *all_cols,
                )?)));
            }
            PlanOp::Extract { cols } => {
                let t = t.project(cols)?;
                return Ok(PlanOutput::Answer(Answer::values(super::table_to_values(&t))));
            }
        };
        Ok(PlanOutput::Table(table))
    }
}

fn join(left: &Table, right: &Table, left_col: &str, right_col: &str) -> Result<Table, PipelineError> {
    let li = col_index(left, left_col)?;
    let ri = col_index(right, right_col)?;
    let drop_right_key = left_col == right_col;
    let right_keep: Vec<usize> = (0..right.schema().len())
        .filter(|&j| !(drop_right_key && j == ri))
        .collect();
    let lnames: Vec<&str> = left.schema().names().collect();
    let rnames: Vec<&str> = right_keep
        .iter()
        .map(|&j| right.schema().columns()[j].name.as_str())
        .collect();
    let mut cols: Vec<Column> = left
        .schema()
        .columns()
        .iter()
        .map(|c| {
            let mut c = c.clone();
            if rnames.contains(&c.name.as_str()) {
                c.name = format!("{}_x", c.name);
            }
            c
        })
        .collect();
    for &j in &right_keep {
        let mut c = right.schema().columns()[j].clone();
        if lnames.contains(&c.name.as_str()) {
            c.name = format!("{}_y", c.name);
        }
        cols.push(c);
    }
    let mut rows = Vec::new();
    for l in left.rows() {
        for r in right.rows() {
            if matches(&l[li], &r[ri], CmpOp::Eq)? {
                let mut row = l.clone();
                row.extend(right_keep.iter().map(|&j| r[j].clone()));
                rows.push(row);
            }
        }
    }
    Ok(Table::new(left.name(), Schema::new(cols)?, rows)?)
}

/// Runs a plan against `catalog`. Stage timings are reported as
/// `relational` and `semantic`.
pub fn evaluate_plan(plan: &Plan, catalog: &TableCatalog, lm: &dyn LanguageModel) -> Result<RunOutcome, PipelineError> {
    plan.validate()?;
    let mut ev = Evaluator {
        catalog,
        lm,
        stages: Stages::default(),
        warnings: Vec::new(),
    };
    match ev.run(&plan.ops)? {
        PlanOutput::Answer(a) => Ok(ev.stages.finish(a, ev.warnings)),
        PlanOutput::Table(_) => Err(plan_err("plan ended without a terminal op")),
    }
}
