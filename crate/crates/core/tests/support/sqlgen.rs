//! Random catalogs and queries for the SQL subset, plus a brute-force
//! reference evaluator that works on its own query representation (never on
//! the engine's AST).

use std::cmp::Ordering;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use tag_core::table::{Column, Schema, Table, TableCatalog};
use tag_core::{Value, ValueType};

/// Group key and the joined rows in the group.
type Group<'a> = (Vec<Value>, Vec<Vec<&'a Vec<Value>>>);

#[derive(Debug, Clone)]
pub struct GenTable {
    pub name: String,
    pub cols: Vec<(String, ValueType)>,
    pub rows: Vec<Vec<Value>>,
}

/// A column of the `pos`-th table in the FROM/JOIN list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColId {
    pub pos: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone)]
pub enum Rhs {
    Lit(Value),
    Col(ColId),
}

#[derive(Debug, Clone)]
pub enum Pred {
    Cmp(ColId, Op, Rhs),
    Like(ColId, String, bool),
    In(ColId, Vec<Value>, bool),
    Between(ColId, Value, Value, bool),
    IsNull(ColId, bool),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func {
    CountStar,
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy)]
pub enum Item {
    Col(ColId),
    Agg(Func, Option<ColId>, bool),
}

#[derive(Debug, Clone)]
pub enum Shape {
    Star,
    Cols(Vec<ColId>),
    Grouped { group: Vec<ColId>, items: Vec<Item> },
}

#[derive(Debug, Clone)]
pub struct GenQuery {
    /// Indices into the catalog's table list: FROM first, then joins.
    pub tables: Vec<usize>,
    /// For join `j` (joining `tables[j + 1]`): equal columns.
    pub joins: Vec<(ColId, ColId)>,
    pub pred: Option<Pred>,
    pub shape: Shape,
    /// Keys are items of the same kind as the select list (columns or
    /// aggregates).
    pub order: Vec<(Item, bool)>,
    pub distinct: bool,
    pub limit: Option<usize>,
}

const TYPES: [ValueType; 4] = [ValueType::Int, ValueType::Float, ValueType::Text, ValueType::Bool];
const TEXTS: [&str; 6] = ["a", "ab", "b", "Ba", "abc", "%x"];
const FLOATS: [f64; 6] = [-1.5, 0.0, 0.5, 2.0, 2.5, 3.25];
const PATTERNS: [&str; 7] = ["a%", "%b", "_", "%a%", "B%", "a_", "%"];

fn random_value(rng: &mut StdRng, ty: ValueType) -> Value {
    match ty {
        ValueType::Int => Value::Int(rng.gen_range(-3..5)),
        ValueType::Float => Value::Float(*FLOATS.choose(rng).unwrap()),
        ValueType::Text => Value::Text(TEXTS.choose(rng).unwrap().to_string()),
        ValueType::Bool => Value::Bool(rng.gen()),
    }
}

fn random_cell(rng: &mut StdRng, ty: ValueType) -> Value {
    if rng.gen_bool(0.15) {
        Value::Null
    } else {
        random_value(rng, ty)
    }
}

pub fn random_catalog(rng: &mut StdRng) -> Vec<GenTable> {
    let n_tables = rng.gen_range(1..=3);
    (0..n_tables)
        .map(|t| {
            let n_cols = rng.gen_range(1..=4);
            // Column names repeat across tables so qualification matters.
            let cols: Vec<(String, ValueType)> = (0..n_cols)
                .map(|c| (format!("c{c}"), *TYPES.choose(rng).unwrap()))
                .collect();
            let n_rows = rng.gen_range(0..=8);
            let rows = (0..n_rows)
                .map(|_| cols.iter().map(|(_, ty)| random_cell(rng, *ty)).collect())
                .collect();
            GenTable {
                name: format!("t{t}"),
                cols,
                rows,
            }
        })
        .collect()
}

pub fn to_catalog(tables: &[GenTable]) -> TableCatalog {
    TableCatalog::from_tables(
        "gen",
        tables.iter().map(|t| {
            let schema = Schema::new(t.cols.iter().map(|(n, ty)| Column::new(n.clone(), *ty)).collect()).unwrap();
            Table::new(t.name.clone(), schema, t.rows.clone()).unwrap()
        }),
    )
    .unwrap()
}

fn col_type(tables: &[GenTable], q: &GenQuery, c: ColId) -> ValueType {
    tables[q.tables[c.pos]].cols[c.col].1
}

pub fn all_cols(tables: &[GenTable], chosen: &[usize], upto: usize) -> Vec<ColId> {
    (0..upto)
        .flat_map(|pos| (0..tables[chosen[pos]].cols.len()).map(move |col| ColId { pos, col }))
        .collect()
}

fn comparable(a: ValueType, b: ValueType) -> bool {
    a == b || (is_num(a) && is_num(b))
}

fn is_num(t: ValueType) -> bool {
    matches!(t, ValueType::Int | ValueType::Float)
}

pub fn random_pred(rng: &mut StdRng, tables: &[GenTable], q: &GenQuery, cols: &[ColId], depth: u32) -> Pred {
    if depth > 0 && rng.gen_bool(0.35) {
        let l = Box::new(random_pred(rng, tables, q, cols, depth - 1));
        return match rng.gen_range(0..3) {
            0 => Pred::And(l, Box::new(random_pred(rng, tables, q, cols, depth - 1))),
            1 => Pred::Or(l, Box::new(random_pred(rng, tables, q, cols, depth - 1))),
            _ => Pred::Not(l),
        };
    }
    let c = *cols.choose(rng).unwrap();
    let ty = col_type(tables, q, c);
    match rng.gen_range(0..6) {
        0 if ty == ValueType::Text => Pred::Like(c, PATTERNS.choose(rng).unwrap().to_string(), rng.gen()),
        1 => {
            let n = rng.gen_range(1..=3);
            Pred::In(c, (0..n).map(|_| random_value(rng, ty)).collect(), rng.gen())
        }
        2 if ty != ValueType::Bool => Pred::Between(c, random_value(rng, ty), random_value(rng, ty), rng.gen()),
        3 => Pred::IsNull(c, rng.gen()),
        _ => {
            let op = *[Op::Eq, Op::Ne, Op::Lt, Op::Le, Op::Gt, Op::Ge].choose(rng).unwrap();
            let partners: Vec<ColId> = cols
                .iter()
                .copied()
                .filter(|&o| o != c && comparable(ty, col_type(tables, q, o)))
                .collect();
            let rhs = if !partners.is_empty() && rng.gen_bool(0.3) {
                Rhs::Col(*partners.choose(rng).unwrap())
            } else if ty == ValueType::Float && rng.gen_bool(0.3) {
                Rhs::Lit(Value::Int(rng.gen_range(-2..4)))
            } else {
                Rhs::Lit(random_value(rng, ty))
            };
            Pred::Cmp(c, op, rhs)
        }
    }
}

fn random_agg(rng: &mut StdRng, tables: &[GenTable], q: &GenQuery, cols: &[ColId]) -> Item {
    let c = *cols.choose(rng).unwrap();
    let numeric = is_num(col_type(tables, q, c));
    let func = loop {
        let f = *[Func::CountStar, Func::Count, Func::Sum, Func::Avg, Func::Min, Func::Max]
            .choose(rng)
            .unwrap();
        if !matches!(f, Func::Sum | Func::Avg) || numeric {
            break f;
        }
    };
    match func {
        Func::CountStar => Item::Agg(func, None, false),
        _ => Item::Agg(func, Some(c), rng.gen_bool(0.25)),
    }
}

pub fn random_query(rng: &mut StdRng, tables: &[GenTable]) -> GenQuery {
    let mut order_of_tables: Vec<usize> = (0..tables.len()).collect();
    order_of_tables.shuffle(rng);
    let n = rng.gen_range(1..=tables.len());
    let mut q = GenQuery {
        tables: order_of_tables[..n].to_vec(),
        joins: Vec::new(),
        pred: None,
        shape: Shape::Star,
        order: Vec::new(),
        distinct: false,
        limit: None,
    };
    // Joins: pick comparable columns; drop the table if none exist.
    let mut kept = vec![q.tables[0]];
    for &t in &q.tables[1..] {
        let pos = kept.len();
        let mut trial = q.clone();
        trial.tables = kept.iter().copied().chain([t]).collect();
        let left = all_cols(tables, &trial.tables, pos);
        let right: Vec<ColId> = (0..tables[t].cols.len()).map(|col| ColId { pos, col }).collect();
        let pairs: Vec<(ColId, ColId)> = left
            .iter()
            .flat_map(|&l| right.iter().map(move |&r| (l, r)))
            .filter(|&(l, r)| comparable(col_type(tables, &trial, l), col_type(tables, &trial, r)))
            .collect();
        if let Some(&(l, r)) = pairs.choose(rng) {
            kept.push(t);
            q.joins.push(if rng.gen() { (l, r) } else { (r, l) });
        }
    }
    q.tables = kept;
    let cols = all_cols(tables, &q.tables, q.tables.len());

    if rng.gen_bool(0.7) {
        q.pred = Some(random_pred(rng, tables, &q, &cols, 2));
    }
    match rng.gen_range(0..3) {
        0 => q.shape = Shape::Star,
        1 => {
            let k = rng.gen_range(1..=cols.len().min(3));
            q.shape = Shape::Cols(cols.choose_multiple(rng, k).copied().collect());
        }
        _ => {
            let g = rng.gen_range(0..=cols.len().min(2));
            let group: Vec<ColId> = cols.choose_multiple(rng, g).copied().collect();
            let mut items: Vec<Item> = group.iter().map(|&c| Item::Col(c)).collect();
            for _ in 0..rng.gen_range(1..=2) {
                items.push(random_agg(rng, tables, &q, &cols));
            }
            items.shuffle(rng);
            q.shape = Shape::Grouped { group, items };
        }
    }
    if rng.gen_bool(0.6) {
        for _ in 0..rng.gen_range(1..=2) {
            let key = match &q.shape {
                Shape::Grouped { group, .. } => {
                    if !group.is_empty() && rng.gen() {
                        Item::Col(*group.choose(rng).unwrap())
                    } else {
                        random_agg(rng, tables, &q, &cols)
                    }
                }
                _ => Item::Col(*cols.choose(rng).unwrap()),
            };
            q.order.push((key, rng.gen()));
        }
    }
    q.distinct = rng.gen_bool(0.2);
    if rng.gen_bool(0.4) {
        q.limit = Some(rng.gen_range(0..5));
    }
    q
}

// ---------------------------------------------------------------------------
// SQL text

fn kw(rng: &mut StdRng, word: &str) -> String {
    if rng.gen() {
        word.to_string()
    } else {
        word.to_lowercase()
    }
}

fn lit(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Bool(b) => if *b { "TRUE" } else { "FALSE" }.into(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format!("{f:?}"),
        Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
    }
}

fn alias(pos: usize) -> String {
    format!("T{}", pos + 1)
}

fn colref(tables: &[GenTable], q: &GenQuery, c: ColId) -> String {
    format!("{}.{}", alias(c.pos), tables[q.tables[c.pos]].cols[c.col].0)
}

fn op_text(op: Op) -> &'static str {
    match op {
        Op::Eq => "=",
        Op::Ne => "<>",
        Op::Lt => "<",
        Op::Le => "<=",
        Op::Gt => ">",
        Op::Ge => ">=",
    }
}

fn pred_text(p: &Pred, tables: &[GenTable], q: &GenQuery) -> String {
    let c = |id| colref(tables, q, id);
    let not = |n: bool| if n { "NOT " } else { "" };
    match p {
        Pred::Cmp(l, op, r) => {
            let r = match r {
                Rhs::Lit(v) => lit(v),
                Rhs::Col(id) => c(*id),
            };
            format!("{} {} {r}", c(*l), op_text(*op))
        }
        Pred::Like(l, pat, n) => format!("{} {}LIKE '{pat}'", c(*l), not(*n)),
        Pred::In(l, vals, n) => format!(
            "{} {}IN ({})",
            c(*l),
            not(*n),
            vals.iter().map(lit).collect::<Vec<_>>().join(", ")
        ),
        Pred::Between(l, lo, hi, n) => {
            format!("{} {}BETWEEN {} AND {}", c(*l), not(*n), lit(lo), lit(hi))
        }
        Pred::IsNull(l, n) => format!("{} IS {}NULL", c(*l), not(*n)),
        Pred::And(a, b) => format!("({}) AND ({})", pred_text(a, tables, q), pred_text(b, tables, q)),
        Pred::Or(a, b) => format!("({}) OR ({})", pred_text(a, tables, q), pred_text(b, tables, q)),
        Pred::Not(a) => format!("NOT ({})", pred_text(a, tables, q)),
    }
}

fn item_text(i: &Item, tables: &[GenTable], q: &GenQuery) -> String {
    match i {
        Item::Col(c) => colref(tables, q, *c),
        Item::Agg(Func::CountStar, _, _) => "COUNT(*)".into(),
        Item::Agg(f, Some(c), d) => {
            let name = match f {
                Func::Count => "COUNT",
                Func::Sum => "SUM",
                Func::Avg => "AVG",
                Func::Min => "MIN",
                Func::Max => "MAX",
                Func::CountStar => unreachable!(),
            };
            format!("{name}({}{})", if *d { "DISTINCT " } else { "" }, colref(tables, q, *c))
        }
        Item::Agg(_, None, _) => unreachable!(),
    }
}

pub fn to_sql(rng: &mut StdRng, tables: &[GenTable], q: &GenQuery) -> String {
    let mut s = kw(rng, "SELECT");
    if q.distinct {
        s += &format!(" {}", kw(rng, "DISTINCT"));
    }
    let items = match &q.shape {
        Shape::Star => "*".to_string(),
        Shape::Cols(cols) => cols
            .iter()
            .map(|&c| colref(tables, q, c))
            .collect::<Vec<_>>()
            .join(", "),
        Shape::Grouped { items, .. } => items
            .iter()
            .map(|i| item_text(i, tables, q))
            .collect::<Vec<_>>()
            .join(", "),
    };
    s += &format!(" {items} {} {}", kw(rng, "FROM"), tables[q.tables[0]].name);
    s += &if rng.gen() {
        format!(" AS {}", alias(0))
    } else {
        format!(" {}", alias(0))
    };
    for (j, (l, r)) in q.joins.iter().enumerate() {
        let pos = j + 1;
        let join = if rng.gen() { "INNER JOIN" } else { "JOIN" };
        s += &format!(
            " {} {} AS {} {} {} = {}",
            kw(rng, join),
            tables[q.tables[pos]].name,
            alias(pos),
            kw(rng, "ON"),
            colref(tables, q, *l),
            colref(tables, q, *r)
        );
    }
    if let Some(p) = &q.pred {
        s += &format!(" {} {}", kw(rng, "WHERE"), pred_text(p, tables, q));
    }
    if let Shape::Grouped { group, .. } = &q.shape {
        if !group.is_empty() {
            s += &format!(
                " {} {}",
                kw(rng, "GROUP BY"),
                group
                    .iter()
                    .map(|&c| colref(tables, q, c))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
    }
    if !q.order.is_empty() {
        let keys: Vec<String> = q
            .order
            .iter()
            .map(|(i, desc)| {
                let dir = if *desc {
                    " DESC"
                } else if rng.gen() {
                    " ASC"
                } else {
                    ""
                };
                format!("{}{dir}", item_text(i, tables, q))
            })
            .collect();
        s += &format!(" {} {}", kw(rng, "ORDER BY"), keys.join(", "));
    }
    if let Some(n) = q.limit {
        s += &format!(" {} {n}", kw(rng, "LIMIT"));
    }
    s
}

// ---------------------------------------------------------------------------
// Reference evaluator

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

/// `None` when either side is Null.
fn ref_cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Null, _) | (_, Value::Null) => None,
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Text(x), Value::Text(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => num(a)?.partial_cmp(&num(b)?),
    }
}

/// Sort order: Null first, then by value.
fn sort_cmp(a: &Value, b: &Value) -> Ordering {
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => ref_cmp(a, b).expect("same-typed column"),
    }
}

fn ref_like(p: &[char], t: &[char]) -> bool {
    match p.first() {
        None => t.is_empty(),
        Some('%') => (0..=t.len()).any(|k| ref_like(&p[1..], &t[k..])),
        Some('_') => !t.is_empty() && ref_like(&p[1..], &t[1..]),
        Some(c) => t.first() == Some(c) && ref_like(&p[1..], &t[1..]),
    }
}

fn eval_pred(p: &Pred, row: &[&Vec<Value>]) -> bool {
    let get = |c: &ColId| &row[c.pos][c.col];
    match p {
        Pred::Cmp(l, op, r) => {
            let rv = match r {
                Rhs::Lit(v) => v,
                Rhs::Col(c) => get(c),
            };
            match ref_cmp(get(l), rv) {
                None => false,
                Some(o) => match op {
                    Op::Eq => o == Ordering::Equal,
                    Op::Ne => o != Ordering::Equal,
                    Op::Lt => o == Ordering::Less,
                    Op::Le => o != Ordering::Greater,
                    Op::Gt => o == Ordering::Greater,
                    Op::Ge => o != Ordering::Less,
                },
            }
        }
        Pred::Like(c, pat, neg) => match get(c) {
            Value::Text(s) => {
                let p: Vec<char> = pat.chars().collect();
                let t: Vec<char> = s.chars().collect();
                ref_like(&p, &t) != *neg
            }
            _ => false,
        },
        Pred::In(c, vals, neg) => {
            let v = get(c);
            if v.is_null() {
                return false;
            }
            vals.iter().any(|x| ref_cmp(v, x) == Some(Ordering::Equal)) != *neg
        }
        Pred::Between(c, lo, hi, neg) => {
            let v = get(c);
            match (ref_cmp(v, lo), ref_cmp(v, hi)) {
                (Some(a), Some(b)) => (a != Ordering::Less && b != Ordering::Greater) != *neg,
                _ => false,
            }
        }
        Pred::IsNull(c, neg) => get(c).is_null() != *neg,
        Pred::And(a, b) => eval_pred(a, row) && eval_pred(b, row),
        Pred::Or(a, b) => eval_pred(a, row) || eval_pred(b, row),
        Pred::Not(a) => !eval_pred(a, row),
    }
}

fn eval_agg(f: Func, arg: Option<ColId>, distinct: bool, group: &[Vec<&Vec<Value>>]) -> Value {
    if f == Func::CountStar {
        return Value::Int(group.len() as i64);
    }
    let c = arg.unwrap();
    let mut vals: Vec<Value> = Vec::new();
    for row in group {
        let v = &row[c.pos][c.col];
        if v.is_null() {
            continue;
        }
        if distinct && vals.iter().any(|x| x == v) {
            continue;
        }
        vals.push(v.clone());
    }
    if f == Func::Count {
        return Value::Int(vals.len() as i64);
    }
    if vals.is_empty() {
        return Value::Null;
    }
    match f {
        Func::Sum => {
            if let Value::Int(_) = vals[0] {
                Value::Int(vals.iter().map(|v| if let Value::Int(i) = v { *i } else { 0 }).sum())
            } else {
                let mut s = 0.0;
                for v in &vals {
                    s += num(v).unwrap();
                }
                Value::Float(s)
            }
        }
        Func::Avg => {
            let mut s = 0.0;
            for v in &vals {
                s += num(v).unwrap();
            }
            Value::Float(s / vals.len() as f64)
        }
        Func::Min => {
            let mut best = vals[0].clone();
            for v in &vals[1..] {
                if sort_cmp(v, &best) == Ordering::Less {
                    best = v.clone();
                }
            }
            best
        }
        Func::Max => {
            let mut best = vals[0].clone();
            for v in &vals[1..] {
                if sort_cmp(v, &best) == Ordering::Greater {
                    best = v.clone();
                }
            }
            best
        }
        Func::CountStar | Func::Count => unreachable!(),
    }
}

/// Evaluates by enumerating the full cartesian product (first table
/// outermost), then filtering joins and WHERE, grouping, sorting,
/// de-duplicating and truncating.
pub fn reference_eval(tables: &[GenTable], q: &GenQuery) -> Vec<Vec<Value>> {
    let sources: Vec<&GenTable> = q.tables.iter().map(|&i| &tables[i]).collect();
    let mut product: Vec<Vec<&Vec<Value>>> = vec![Vec::new()];
    for t in &sources {
        let mut next = Vec::new();
        for prefix in &product {
            for r in &t.rows {
                let mut p = prefix.clone();
                p.push(r);
                next.push(p);
            }
        }
        product = next;
    }
    let rows: Vec<Vec<&Vec<Value>>> = product
        .into_iter()
        .filter(|row| {
            q.joins
                .iter()
                .all(|(l, r)| ref_cmp(&row[l.pos][l.col], &row[r.pos][r.col]) == Some(Ordering::Equal))
        })
        .filter(|row| q.pred.as_ref().is_none_or(|p| eval_pred(p, row)))
        .collect();

    let mut produced: Vec<(Vec<Value>, Vec<Value>)> = Vec::new();
    match &q.shape {
        Shape::Star | Shape::Cols(_) => {
            for row in &rows {
                let out: Vec<Value> = match &q.shape {
                    Shape::Star => row.iter().flat_map(|r| r.iter().cloned()).collect(),
                    Shape::Cols(cols) => cols.iter().map(|c| row[c.pos][c.col].clone()).collect(),
                    _ => unreachable!(),
                };
                let keys = q
                    .order
                    .iter()
                    .map(|(k, _)| match k {
                        Item::Col(c) => row[c.pos][c.col].clone(),
                        Item::Agg(..) => unreachable!(),
                    })
                    .collect();
                produced.push((out, keys));
            }
        }
        Shape::Grouped { group, items } => {
            let mut groups: Vec<Group<'_>> = Vec::new();
            if group.is_empty() {
                groups.push((Vec::new(), rows.clone()));
            } else {
                for row in &rows {
                    let key: Vec<Value> = group.iter().map(|c| row[c.pos][c.col].clone()).collect();
                    match groups.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, members)) => members.push(row.clone()),
                        None => groups.push((key, vec![row.clone()])),
                    }
                }
            }
            let value_of = |i: &Item, members: &[Vec<&Vec<Value>>]| match i {
                Item::Col(c) => members[0][c.pos][c.col].clone(),
                Item::Agg(f, arg, d) => eval_agg(*f, *arg, *d, members),
            };
            for (_, members) in &groups {
                let out = items.iter().map(|i| value_of(i, members)).collect();
                let keys = q.order.iter().map(|(k, _)| value_of(k, members)).collect();
                produced.push((out, keys));
            }
        }
    }
    // Stable insertion sort keeps equal keys in input order.
    let mut sorted: Vec<(Vec<Value>, Vec<Value>)> = Vec::new();
    for item in produced {
        let pos = sorted
            .iter()
            .position(|(_, k)| {
                let mut o = Ordering::Equal;
                for (idx, (a, b)) in item.1.iter().zip(k).enumerate() {
                    let c = sort_cmp(a, b);
                    let c = if q.order[idx].1 { c.reverse() } else { c };
                    if c != Ordering::Equal {
                        o = c;
                        break;
                    }
                }
                o == Ordering::Less
            })
            .unwrap_or(sorted.len());
        sorted.insert(pos, item);
    }
    let mut out: Vec<Vec<Value>> = Vec::new();
    for (row, _) in sorted {
        if q.distinct && out.contains(&row) {
            continue;
        }
        out.push(row);
    }
    if let Some(n) = q.limit {
        out.truncate(n);
    }
    out
}

/// Multiset equality with a 1e-9 tolerance on floats.
pub fn same_multiset(a: &[Vec<Value>], b: &[Vec<Value>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let close = |x: &Vec<Value>, y: &Vec<Value>| {
        x.len() == y.len()
            && x.iter().zip(y).all(|(u, v)| match (num(u), num(v)) {
                (Some(p), Some(q)) => (p - q).abs() <= 1e-9,
                _ => u == v,
            })
    };
    let mut used = vec![false; b.len()];
    a.iter()
        .all(|x| match (0..b.len()).find(|&j| !used[j] && close(x, &b[j])) {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        })
}
