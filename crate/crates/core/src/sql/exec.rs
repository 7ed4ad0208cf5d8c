//! Name resolution, validation and nested-loop execution.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use crate::table::{Column, Row, Schema, Table, TableCatalog};
use crate::value::{Value, ValueType};

use super::ast::*;
use super::{SemanticIssue, SqlError};

struct Source {
    table: Arc<Table>,
    qualifier: String,
    offset: usize,
}

struct Scope {
    sources: Vec<Source>,
}

impl Scope {
    /// Resolves a column against the first `visible` sources. Exact name
    /// matches win over case-insensitive ones.
    fn resolve(&self, c: &ColumnRef, visible: usize) -> Result<usize, SemanticIssue> {
        let sources = &self.sources[..visible];
        let candidates: Vec<&Source> = match &c.table {
            Some(q) => {
                let exact: Vec<&Source> = sources.iter().filter(|s| s.qualifier == *q).collect();
                let found = if exact.is_empty() {
                    sources.iter().filter(|s| s.qualifier.eq_ignore_ascii_case(q)).collect()
                } else {
                    exact
                };
                if found.is_empty() {
                    return Err(SemanticIssue::UnknownTable(q.clone()));
                }
                found
            }
            None => sources.iter().collect(),
        };
        let display = || match &c.table {
            Some(t) => format!("{t}.{}", c.column),
            None => c.column.clone(),
        };
        for exact in [true, false] {
            let hits: Vec<usize> = candidates
                .iter()
                .flat_map(|s| {
                    s.table
                        .schema()
                        .columns()
                        .iter()
                        .enumerate()
                        .filter(move |(_, col)| {
                            if exact {
                                col.name == c.column
                            } else {
                                col.name.eq_ignore_ascii_case(&c.column)
                            }
                        })
                        .map(move |(i, _)| s.offset + i)
                })
                .collect();
            match hits.len() {
                0 => continue,
                1 => return Ok(hits[0]),
                _ => return Err(SemanticIssue::AmbiguousColumn(display())),
            }
        }
        Err(SemanticIssue::UnknownColumn(display()))
    }

    fn column(&self, idx: usize) -> (&Source, &Column) {
        let s = self
            .sources
            .iter()
            .rev()
            .find(|s| s.offset <= idx)
            .expect("resolved index");
        (s, &s.table.schema().columns()[idx - s.offset])
    }

    fn column_type(&self, idx: usize) -> ValueType {
        self.column(idx).1.ty
    }

    fn width(&self) -> usize {
        self.sources.last().map_or(0, |s| s.offset + s.table.schema().len())
    }
}

#[derive(Debug, Clone)]
enum BOperand {
    Col(usize),
    Lit(Value),
}

impl BOperand {
    fn get<'a>(&'a self, row: &'a [Value]) -> &'a Value {
        match self {
            BOperand::Col(i) => &row[*i],
            BOperand::Lit(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
enum BExpr {
    Compare(BOperand, CmpOp, BOperand),
    Like(BOperand, Vec<char>, bool),
    In(BOperand, Vec<Value>, bool),
    Between(BOperand, BOperand, BOperand, bool),
    IsNull(BOperand, bool),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
    Not(Box<BExpr>),
}

#[derive(Debug, Clone)]
struct BAgg {
    func: AggFunc,
    distinct: bool,
    arg: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
enum BScalar {
    Col(usize),
    Agg(usize),
}

#[derive(Debug, Clone, Copy)]
enum OrderKey {
    Output(usize),
    Source(BScalar),
}

struct OutCol {
    name: String,
    qualifier: Option<String>,
    ty: ValueType,
    src: BScalar,
}

struct Bound {
    scope: Scope,
    joins: Vec<(usize, usize)>,
    filter: Option<BExpr>,
    grouped: bool,
    group_by: Vec<usize>,
    aggs: Vec<BAgg>,
    outputs: Vec<OutCol>,
    order: Vec<(OrderKey, bool)>,
    distinct: bool,
    limit: Option<u64>,
}

/// Resolves every table and column name and checks aggregate/grouping
/// consistency and operand types.
pub fn validate(query: &Query, catalog: &TableCatalog) -> Result<(), SqlError> {
    bind(query, catalog).map(|_| ())
}

/// Executes a query. Joins are inner equality joins evaluated left to
/// right by nested loops; without `ORDER BY` rows come out in that
/// enumeration order. `ORDER BY` is a stable sort, `DISTINCT` keeps the
/// first occurrence after sorting, and `LIMIT` takes a prefix.
pub fn execute_sql(query: &Query, catalog: &TableCatalog) -> Result<Table, SqlError> {
    let b = bind(query, catalog)?;
    run(&b)
}

fn bind(q: &Query, catalog: &TableCatalog) -> Result<Bound, SqlError> {
    let mut issues = Vec::new();
    let mut sources: Vec<Source> = Vec::new();
    let mut offset = 0;
    for tr in std::iter::once(&q.from).chain(q.joins.iter().map(|j| &j.table)) {
        match catalog.find(&tr.name) {
            Some(t) => {
                let qualifier = tr.alias.clone().unwrap_or_else(|| t.name().to_string());
                if sources.iter().any(|s| s.qualifier == qualifier) {
                    issues.push(SemanticIssue::DuplicateQualifier(qualifier.clone()));
                }
                sources.push(Source {
                    table: Arc::clone(t),
                    qualifier,
                    offset,
                });
                offset += t.schema().len();
            }
            None => issues.push(SemanticIssue::UnknownTable(tr.name.clone())),
        }
    }
    if !issues.is_empty() {
        return Err(SqlError::Semantic(issues));
    }
    let scope = Scope { sources };
    let all = scope.sources.len();
    let resolve = |c: &ColumnRef, visible: usize, issues: &mut Vec<SemanticIssue>| {
        scope.resolve(c, visible).map_err(|e| issues.push(e)).ok()
    };

    let mut joins = Vec::new();
    for (j, join) in q.joins.iter().enumerate() {
        let l = resolve(&join.left, j + 2, &mut issues);
        let r = resolve(&join.right, j + 2, &mut issues);
        if let (Some(l), Some(r)) = (l, r) {
            joins.push((l, r));
        }
    }

    let filter = q
        .where_clause
        .as_ref()
        .map(|e| bind_expr(e, &mut |c| resolve(c, all, &mut issues)));

    let group_by: Vec<usize> = q.group_by.iter().filter_map(|c| resolve(c, all, &mut issues)).collect();
    let has_agg = q.select.iter().any(|s| {
        matches!(
            s,
            SelectItem::Expr {
                expr: Scalar::Aggregate(_),
                ..
            }
        )
    }) || q.order_by.iter().any(|o| matches!(o.key, Scalar::Aggregate(_)));
    let grouped = has_agg || !q.group_by.is_empty();

    let mut aggs: Vec<BAgg> = Vec::new();
    let mut agg_types: Vec<ValueType> = Vec::new();
    let mut outputs: Vec<OutCol> = Vec::new();
    let mut aliases: Vec<Option<String>> = Vec::new();
    let mut type_errors = Vec::new();

    let bind_agg = |a: &Aggregate,
                    issues: &mut Vec<SemanticIssue>,
                    aggs: &mut Vec<BAgg>,
                    agg_types: &mut Vec<ValueType>,
                    type_errors: &mut Vec<String>|
     -> Option<(usize, ValueType)> {
        let arg = match &a.arg {
            Some(c) => Some(scope.resolve(c, all).map_err(|e| issues.push(e)).ok()?),
            None => None,
        };
        let arg_ty = arg.map(|i| scope.column_type(i));
        let ty = match (a.func, arg_ty) {
            (AggFunc::Count, _) => ValueType::Int,
            (AggFunc::Avg, Some(t)) if t.is_numeric() => ValueType::Float,
            (AggFunc::Sum, Some(t)) if t.is_numeric() => t,
            (AggFunc::Min | AggFunc::Max, Some(t)) => t,
            (f, t) => {
                type_errors.push(format!(
                    "{} over non-numeric column of type {}",
                    f.name(),
                    t.map_or("?".into(), |t| t.to_string())
                ));
                ValueType::Float
            }
        };
        aggs.push(BAgg {
            func: a.func,
            distinct: a.distinct,
            arg,
        });
        agg_types.push(ty);
        Some((aggs.len() - 1, ty))
    };

    for item in &q.select {
        match item {
            SelectItem::Wildcard | SelectItem::QualifiedWildcard(_) => {
                if grouped {
                    issues.push(SemanticIssue::UngroupedColumn("*".into()));
                    continue;
                }
                let chosen: Vec<&Source> = match item {
                    SelectItem::QualifiedWildcard(q) => {
                        let found: Vec<&Source> = scope.sources.iter().filter(|s| s.qualifier == *q).collect();
                        let found = if found.is_empty() {
                            scope
                                .sources
                                .iter()
                                .filter(|s| s.qualifier.eq_ignore_ascii_case(q))
                                .collect()
                        } else {
                            found
                        };
                        if found.is_empty() {
                            issues.push(SemanticIssue::UnknownTable(q.clone()));
                        }
                        found
                    }
                    _ => scope.sources.iter().collect(),
                };
                for s in chosen {
                    for (i, col) in s.table.schema().columns().iter().enumerate() {
                        outputs.push(OutCol {
                            name: col.name.clone(),
                            qualifier: Some(s.qualifier.clone()),
                            ty: col.ty,
                            src: BScalar::Col(s.offset + i),
                        });
                        aliases.push(None);
                    }
                }
            }
            SelectItem::Expr { expr, alias } => match expr {
                Scalar::Column(c) => {
                    if let Some(i) = resolve(c, all, &mut issues) {
                        if grouped && !group_by.contains(&i) {
                            issues.push(SemanticIssue::UngroupedColumn(c.to_string()));
                        }
                        let (src, col) = scope.column(i);
                        outputs.push(OutCol {
                            name: alias.clone().unwrap_or_else(|| col.name.clone()),
                            qualifier: alias.is_none().then(|| src.qualifier.clone()),
                            ty: col.ty,
                            src: BScalar::Col(i),
                        });
                        aliases.push(alias.clone());
                    }
                }
                Scalar::Aggregate(a) => {
                    if let Some((k, ty)) = bind_agg(a, &mut issues, &mut aggs, &mut agg_types, &mut type_errors) {
                        outputs.push(OutCol {
                            name: alias.clone().unwrap_or_else(|| a.output_name()),
                            qualifier: None,
                            ty,
                            src: BScalar::Agg(k),
                        });
                        aliases.push(alias.clone());
                    }
                }
            },
        }
    }

    let mut order = Vec::new();
    for o in &q.order_by {
        let key = match &o.key {
            Scalar::Column(c) => {
                let alias_hit = c.table.is_none().then(|| {
                    aliases
                        .iter()
                        .position(|a| a.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(&c.column)))
                });
                if let Some(Some(i)) = alias_hit {
                    Some(OrderKey::Output(i))
                } else {
                    match scope.resolve(c, all) {
                        Ok(i) => {
                            if grouped && !group_by.contains(&i) {
                                issues.push(SemanticIssue::UngroupedColumn(c.to_string()));
                            }
                            Some(OrderKey::Source(BScalar::Col(i)))
                        }
                        Err(e) => {
                            let by_name = c
                                .table
                                .is_none()
                                .then(|| outputs.iter().position(|o| o.name == c.column));
                            match by_name {
                                Some(Some(i)) => Some(OrderKey::Output(i)),
                                _ => {
                                    issues.push(e);
                                    None
                                }
                            }
                        }
                    }
                }
            }
            Scalar::Aggregate(a) => bind_agg(a, &mut issues, &mut aggs, &mut agg_types, &mut type_errors)
                .map(|(k, _)| OrderKey::Source(BScalar::Agg(k))),
        };
        if let Some(k) = key {
            order.push((k, o.desc));
        }
    }

    if !issues.is_empty() {
        return Err(SqlError::Semantic(issues));
    }
    let filter = filter.map(|f| f.expect("all names resolved"));

    for &(l, r) in &joins {
        let (lt, rt) = (scope.column_type(l), scope.column_type(r));
        if !lt.comparable_with(rt) {
            type_errors.push(format!("join compares {lt} with {rt}"));
        }
    }
    if let Some(f) = &filter {
        check_types(f, &scope, &mut type_errors);
    }
    if let Some(e) = type_errors.into_iter().next() {
        return Err(SqlError::Type(e));
    }

    name_outputs(&mut outputs);
    Ok(Bound {
        scope,
        joins,
        filter,
        grouped,
        group_by,
        aggs,
        outputs,
        order,
        distinct: q.distinct,
        limit: q.limit,
    })
}

/// Makes output names unique: colliding names are qualified with their
/// table (`T1.id`), and anything still colliding gets `_2`, `_3`, ...
fn name_outputs(outputs: &mut [OutCol]) {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for o in outputs.iter() {
        *counts.entry(o.name.clone()).or_default() += 1;
    }
    for o in outputs.iter_mut() {
        if counts[&o.name] > 1 {
            if let Some(q) = &o.qualifier {
                o.name = format!("{q}.{}", o.name);
            }
        }
    }
    let mut seen: HashMap<String, usize> = HashMap::new();
    for o in outputs.iter_mut() {
        let n = seen.entry(o.name.clone()).or_default();
        *n += 1;
        if *n > 1 {
            o.name = format!("{}_{}", o.name, n);
        }
    }
}

fn bind_operand(o: &Operand, resolve: &mut dyn FnMut(&ColumnRef) -> Option<usize>) -> Option<BOperand> {
    match o {
        Operand::Column(c) => resolve(c).map(BOperand::Col),
        Operand::Literal(v) => Some(BOperand::Lit(v.clone())),
    }
}

// Returns None (after recording issues through `resolve`) when any name
// fails to resolve; every operand is still visited so all issues surface.
fn bind_expr(e: &Expr, resolve: &mut dyn FnMut(&ColumnRef) -> Option<usize>) -> Option<BExpr> {
    Some(match e {
        Expr::Compare { left, op, right } => {
            let l = bind_operand(left, resolve);
            let r = bind_operand(right, resolve);
            BExpr::Compare(l?, *op, r?)
        }
        Expr::Like { expr, pattern, negated } => {
            BExpr::Like(bind_operand(expr, resolve)?, pattern.chars().collect(), *negated)
        }
        Expr::InList { expr, list, negated } => BExpr::In(bind_operand(expr, resolve)?, list.clone(), *negated),
        Expr::Between {
            expr,
            low,
            high,
            negated,
        } => {
            let e = bind_operand(expr, resolve);
            let lo = bind_operand(low, resolve);
            let hi = bind_operand(high, resolve);
            BExpr::Between(e?, lo?, hi?, *negated)
        }
        Expr::IsNull { expr, negated } => BExpr::IsNull(bind_operand(expr, resolve)?, *negated),
        Expr::And(l, r) => {
            let l = bind_expr(l, resolve);
            let r = bind_expr(r, resolve);
            BExpr::And(Box::new(l?), Box::new(r?))
        }
        Expr::Or(l, r) => {
            let l = bind_expr(l, resolve);
            let r = bind_expr(r, resolve);
            BExpr::Or(Box::new(l?), Box::new(r?))
        }
        Expr::Not(inner) => BExpr::Not(Box::new(bind_expr(inner, resolve)?)),
    })
}

fn operand_type(o: &BOperand, scope: &Scope) -> Option<ValueType> {
    match o {
        BOperand::Col(i) => Some(scope.column_type(*i)),
        BOperand::Lit(v) => v.value_type(),
    }
}

fn check_types(e: &BExpr, scope: &Scope, errors: &mut Vec<String>) {
    let mut pair = |a: &BOperand, b: &BOperand, what: &str| {
        if let (Some(x), Some(y)) = (operand_type(a, scope), operand_type(b, scope)) {
            if !x.comparable_with(y) {
                errors.push(format!("{what} compares {x} with {y}"));
            }
        }
    };
    match e {
        BExpr::Compare(l, op, r) => pair(l, r, op.symbol()),
        BExpr::Like(o, _, _) => match operand_type(o, scope) {
            Some(ValueType::Text) | None => {}
            Some(t) => errors.push(format!("LIKE applied to {t}")),
        },
        BExpr::In(o, list, _) => {
            for v in list {
                pair(o, &BOperand::Lit(v.clone()), "IN");
            }
        }
        BExpr::Between(o, lo, hi, _) => {
            pair(o, lo, "BETWEEN");
            pair(o, hi, "BETWEEN");
        }
        BExpr::IsNull(..) => {}
        BExpr::And(l, r) | BExpr::Or(l, r) => {
            check_types(l, scope, errors);
            check_types(r, scope, errors);
        }
        BExpr::Not(inner) => check_types(inner, scope, errors),
    }
}

fn cmp(a: &Value, b: &Value) -> Option<Ordering> {
    // Types were checked at bind time; an incomparable pair can only be a
    // Null, which fails the predicate anyway.
    a.compare(b).ok().flatten()
}

fn eval(e: &BExpr, row: &[Value]) -> bool {
    match e {
        BExpr::Compare(l, op, r) => cmp(l.get(row), r.get(row)).is_some_and(|o| op.holds(o)),
        BExpr::Like(o, pattern, negated) => match o.get(row) {
            Value::Text(s) => like_match(pattern, &s.chars().collect::<Vec<_>>()) != *negated,
            _ => false,
        },
        BExpr::In(o, list, negated) => {
            let v = o.get(row);
            if v.is_null() {
                return false;
            }
            let hit = list.iter().any(|x| cmp(v, x) == Some(Ordering::Equal));
            hit != *negated
        }
        BExpr::Between(o, lo, hi, negated) => match (cmp(o.get(row), lo.get(row)), cmp(o.get(row), hi.get(row))) {
            (Some(a), Some(b)) => (a != Ordering::Less && b != Ordering::Greater) != *negated,
            _ => false,
        },
        BExpr::IsNull(o, negated) => o.get(row).is_null() != *negated,
        BExpr::And(l, r) => eval(l, row) && eval(r, row),
        BExpr::Or(l, r) => eval(l, row) || eval(r, row),
        BExpr::Not(inner) => !eval(inner, row),
    }
}

/// SQL `LIKE` with `%` (any run) and `_` (one character), case-sensitive.
pub(crate) fn like_match(pattern: &[char], text: &[char]) -> bool {
    let (mut p, mut t) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while t < text.len() {
        if p < pattern.len() && (pattern[p] == '_' || (pattern[p] != '%' && pattern[p] == text[t])) {
            p += 1;
            t += 1;
        } else if p < pattern.len() && pattern[p] == '%' {
            star = Some((p, t));
            p += 1;
        } else if let Some((sp, st)) = star {
            p = sp + 1;
            t = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    pattern[p..].iter().all(|&c| c == '%')
}

/// Hashable stand-in for a value with the same equality as `Value`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum KeyPart {
    Null,
    Bool(bool),
    Num(u64),
    Text(String),
}

pub(crate) fn key_part(v: &Value) -> KeyPart {
    match v {
        Value::Null => KeyPart::Null,
        Value::Bool(b) => KeyPart::Bool(*b),
        Value::Text(s) => KeyPart::Text(s.clone()),
        Value::Int(_) | Value::Float(_) => {
            let f = v.as_f64().unwrap();
            let f = if f == 0.0 {
                0.0
            } else if f.is_nan() {
                f64::NAN
            } else {
                f
            };
            KeyPart::Num(f.to_bits())
        }
    }
}

fn aggregate(agg: &BAgg, rows: &[&Row]) -> Result<Value, SqlError> {
    let Some(arg) = agg.arg else {
        return Ok(Value::Int(rows.len() as i64));
    };
    let mut values: Vec<&Value> = rows.iter().map(|r| &r[arg]).filter(|v| !v.is_null()).collect();
    if agg.distinct {
        let mut seen = std::collections::HashSet::new();
        values.retain(|v| seen.insert(key_part(v)));
    }
    Ok(match agg.func {
        AggFunc::Count => Value::Int(values.len() as i64),
        _ if values.is_empty() => Value::Null,
        AggFunc::Sum => {
            if values.iter().all(|v| matches!(v, Value::Int(_))) {
                let mut acc: i64 = 0;
                for v in &values {
                    if let Value::Int(i) = v {
                        acc = acc.checked_add(*i).ok_or_else(|| SqlError::Overflow("SUM".into()))?;
                    }
                }
                Value::Int(acc)
            } else {
                Value::Float(values.iter().map(|v| v.as_f64().unwrap_or(0.0)).sum())
            }
        }
        AggFunc::Avg => {
            let sum: f64 = values.iter().map(|v| v.as_f64().unwrap_or(0.0)).sum();
            Value::Float(sum / values.len() as f64)
        }
        AggFunc::Min => (*values.iter().min_by(|a, b| a.total_cmp(b)).unwrap()).clone(),
        AggFunc::Max => (*values.iter().rev().max_by(|a, b| a.total_cmp(b)).unwrap()).clone(),
    })
}

fn run(b: &Bound) -> Result<Table, SqlError> {
    let sources = &b.scope.sources;
    let mut rows: Vec<Row> = sources[0].table.rows().to_vec();
    for (j, &(l, r)) in b.joins.iter().enumerate() {
        let src = &sources[j + 1];
        let mut next = Vec::new();
        for left in &rows {
            for right in src.table.rows() {
                let get = |i: usize| {
                    if i < src.offset {
                        &left[i]
                    } else {
                        &right[i - src.offset]
                    }
                };
                if cmp(get(l), get(r)) == Some(Ordering::Equal) {
                    let mut combined = left.clone();
                    combined.extend(right.iter().cloned());
                    next.push(combined);
                }
            }
        }
        rows = next;
    }
    debug_assert!(rows.iter().all(|r| r.len() == b.scope.width()));
    if let Some(f) = &b.filter {
        rows.retain(|r| eval(f, r));
    }

    // (output row, sort keys)
    let mut produced: Vec<(Row, Vec<Value>)> = Vec::new();
    let sort_keys = |out: &Row, get: &dyn Fn(BScalar) -> Result<Value, SqlError>| {
        b.order
            .iter()
            .map(|(k, _)| match k {
                OrderKey::Output(i) => Ok(out[*i].clone()),
                OrderKey::Source(s) => get(*s),
            })
            .collect::<Result<Vec<_>, SqlError>>()
    };
    if b.grouped {
        let mut groups: Vec<Vec<&Row>> = Vec::new();
        if b.group_by.is_empty() {
            groups.push(rows.iter().collect());
        } else {
            let mut index: HashMap<Vec<KeyPart>, usize> = HashMap::new();
            for r in &rows {
                let key: Vec<KeyPart> = b.group_by.iter().map(|&i| key_part(&r[i])).collect();
                let g = *index.entry(key).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].push(r);
            }
        }
        for g in &groups {
            let get = |s: BScalar| match s {
                BScalar::Col(i) => Ok(g.first().map_or(Value::Null, |r| r[i].clone())),
                BScalar::Agg(k) => aggregate(&b.aggs[k], g),
            };
            let out = b.outputs.iter().map(|o| get(o.src)).collect::<Result<Row, _>>()?;
            let keys = sort_keys(&out, &get)?;
            produced.push((out, keys));
        }
    } else {
        for r in &rows {
            let get = |s: BScalar| match s {
                BScalar::Col(i) => Ok(r[i].clone()),
                BScalar::Agg(_) => unreachable!("aggregates imply grouping"),
            };
            let out = b.outputs.iter().map(|o| get(o.src)).collect::<Result<Row, _>>()?;
            let keys = sort_keys(&out, &get)?;
            produced.push((out, keys));
        }
    }

    if !b.order.is_empty() {
        produced.sort_by(|(_, ka), (_, kb)| {
            for ((x, y), (_, desc)) in ka.iter().zip(kb).zip(&b.order) {
                let o = x.total_cmp(y);
                let o = if *desc { o.reverse() } else { o };
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        });
    }
    let mut out_rows: Vec<Row> = produced.into_iter().map(|(r, _)| r).collect();
    if b.distinct {
        let mut seen = std::collections::HashSet::new();
        out_rows.retain(|r| seen.insert(r.iter().map(key_part).collect::<Vec<_>>()));
    }
    if let Some(n) = b.limit {
        out_rows.truncate(n.min(usize::MAX as u64) as usize);
    }
    let schema = Schema::new(b.outputs.iter().map(|o| Column::new(o.name.clone(), o.ty)).collect())
        .map_err(|e| SqlError::Semantic(vec![SemanticIssue::Other(e.to_string())]))?;
    Table::new("result", schema, out_rows).map_err(|e| SqlError::Semantic(vec![SemanticIssue::Other(e.to_string())]))
}
