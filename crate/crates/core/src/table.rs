//! Typed in-memory tables, CSV ingestion and the row/table text
//! serialization shared by every prompt builder.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::value::{parse_bool, parse_float, parse_int, Value, ValueType};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed CSV in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown column `{column}` in table `{table}`")]
    UnknownColumn { table: String, column: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("row index {index} out of range for table `{table}` with {len} rows")]
    IndexOutOfRange { table: String, index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ValueType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ValueType) -> Self {
        Column { name: name.into(), ty }
    }
}

/// Ordered list of uniquely named, typed columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self, TableError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(TableError::Schema(format!("duplicate column name `{}`", c.name)));
            }
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

pub type Row = Vec<Value>;

/// An immutable relation: a named schema plus rows in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    name: String,
    schema: Schema,
    rows: Vec<Row>,
}

impl Table {
    /// Builds a table, checking arity and that each cell matches its column
    /// type (or is `Null`). An `Int` cell in a `Float` column is widened.
    pub fn new(name: impl Into<String>, schema: Schema, rows: Vec<Row>) -> Result<Self, TableError> {
        let name = name.into();
        let mut rows = rows;
        for (r, row) in rows.iter_mut().enumerate() {
            if row.len() != schema.len() {
                return Err(TableError::Schema(format!(
                    "row {r} of `{name}` has {} cells, schema has {} columns",
                    row.len(),
                    schema.len()
                )));
            }
            for (cell, col) in row.iter_mut().zip(schema.columns()) {
                match (cell.value_type(), col.ty) {
                    (None, _) => {}
                    (Some(ValueType::Int), ValueType::Float) => {
                        if let Value::Int(i) = *cell {
                            *cell = Value::Float(i as f64);
                        }
                    }
                    (Some(t), ty) if t == ty => {}
                    (Some(t), ty) => {
                        return Err(TableError::Schema(format!(
                            "row {r} of `{name}`: column `{}` is {ty} but cell is {t}",
                            col.name
                        )))
                    }
                }
            }
        }
        Ok(Table { name, schema, rows })
    }

    pub fn empty(name: impl Into<String>, schema: Schema) -> Self {
        Table {
            name: name.into(),
            schema,
            rows: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> Option<&Row> {
        self.rows.get(index)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn column_index(&self, name: &str) -> Result<usize, TableError> {
        self.schema.index_of(name).ok_or_else(|| TableError::UnknownColumn {
            table: self.name.clone(),
            column: name.to_string(),
        })
    }

    pub fn column_values(&self, name: &str) -> Result<Vec<Value>, TableError> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i].clone()).collect())
    }

    /// Same schema, rows chosen (and possibly reordered or repeated) by index.
    pub fn select_rows(&self, indices: &[usize]) -> Table {
        Table {
            name: self.name.clone(),
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Keeps the requested columns in the requested order.
    pub fn project<S: AsRef<str>>(&self, cols: &[S]) -> Result<Table, TableError> {
        let idx = cols
            .iter()
            .map(|c| self.column_index(c.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let schema = Schema::new(idx.iter().map(|&i| self.schema.columns[i].clone()).collect())?;
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
            .collect();
        Ok(Table {
            name: self.name.clone(),
            schema,
            rows,
        })
    }

    /// Renders one row as `- {column}: {value}` lines.
    pub fn serialize_row(&self, row_index: usize, cols: Option<&[String]>) -> Result<String, TableError> {
        let row = self.row(row_index).ok_or_else(|| TableError::IndexOutOfRange {
            table: self.name.clone(),
            index: row_index,
            len: self.rows.len(),
        })?;
        let idx: Vec<usize> = match cols {
            Some(cols) => cols.iter().map(|c| self.column_index(c)).collect::<Result<_, _>>()?,
            None => (0..self.schema.len()).collect(),
        };
        Ok(idx
            .iter()
            .map(|&i| format!("- {}: {}", self.schema.columns[i].name, row[i].render()))
            .collect::<Vec<_>>()
            .join("\n"))
    }

    /// Renders rows as numbered `Data Point {n}:` blocks separated by a
    /// blank line, optionally truncated to the first `max_rows` rows.
    pub fn serialize_table(&self, max_rows: Option<usize>) -> String {
        let n = max_rows.map_or(self.rows.len(), |m| m.min(self.rows.len()));
        let blocks: Vec<String> = (0..n)
            .map(|i| self.serialize_row(i, None).expect("index in range"))
            .collect();
        data_point_blocks(&blocks)
    }

    /// Writes the table as RFC-4180 CSV with a header row; `Null` becomes an
    /// empty cell.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.schema.names()).expect("write to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::render)).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
    }
}

/// Formats already-serialized rows as numbered data-point blocks.
pub fn data_point_blocks<S: AsRef<str>>(rows: &[S]) -> String {
    rows.iter()
        .enumerate()
        .map(|(i, r)| format!("Data Point {}:\n{}", i + 1, r.as_ref()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Loads a CSV file. See [`parse_csv`].
pub fn load_csv(path: &Path, type_hints: Option<&HashMap<String, ValueType>>) -> Result<Table, TableError> {
    let text = fs::read_to_string(path).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&name, &text, type_hints).map_err(|e| match e {
        TableError::Csv { message, .. } => TableError::Csv {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parses CSV text with a mandatory header row.
///
/// Column types are inferred per column: `Int` if every non-empty cell is an
/// integer, else `Float` if every one is numeric, else `Bool` if every one is
/// `true`/`false` (any case), else `Text`. Empty cells become `Null`. A type
/// hint overrides inference and must parse every non-empty cell.
pub fn parse_csv(name: &str, text: &str, type_hints: Option<&HashMap<String, ValueType>>) -> Result<Table, TableError> {
    let csv_err = |e: csv::Error| TableError::Csv {
        path: PathBuf::from(name),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(TableError::Schema(format!("`{name}` has no header row")));
    }
    let mut raw: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        raw.push(rec.iter().map(str::to_string).collect());
    }

    let mut columns = Vec::with_capacity(header.len());
    for (c, col_name) in header.iter().enumerate() {
        let cells = raw.iter().map(|r| r[c].as_str()).filter(|s| !s.is_empty());
        let ty = match type_hints.and_then(|h| h.get(col_name)) {
            Some(&ty) => ty,
            None => infer_type(cells),
        };
        columns.push(Column::new(col_name.clone(), ty));
    }
    if let Some(hints) = type_hints {
        if let Some(missing) = hints.keys().find(|k| !header.contains(k)) {
            return Err(TableError::Schema(format!(
                "type hint names unknown column `{missing}` in `{name}`"
            )));
        }
    }
    let schema = Schema::new(columns)?;

    let mut rows = Vec::with_capacity(raw.len());
    for (r, cells) in raw.iter().enumerate() {
        let mut row = Vec::with_capacity(cells.len());
        for (cell, col) in cells.iter().zip(schema.columns()) {
            if cell.is_empty() {
                row.push(Value::Null);
                continue;
            }
            let v = Value::parse_as(cell, col.ty).ok_or_else(|| {
                TableError::Schema(format!(
                    "`{name}` row {}: cannot parse `{cell}` as {} for column `{}`",
                    r + 1,
                    col.ty,
                    col.name
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Table::new(name, schema, rows)
}

fn infer_type<'a>(cells: impl Iterator<Item = &'a str> + Clone) -> ValueType {
    if cells.clone().all(|c| parse_int(c).is_some()) {
        ValueType::Int
    } else if cells.clone().all(|c| parse_float(c).is_some()) {
        ValueType::Float
    } else if cells.clone().all(|c| parse_bool(c).is_some()) {
        ValueType::Bool
    } else {
        ValueType::Text
    }
}

/// Per-table column type hints, keyed by table name then column name.
pub type CatalogHints = HashMap<String, HashMap<String, ValueType>>;

/// The tables of one domain, keyed by name.
#[derive(Debug, Clone, Default)]
pub struct TableCatalog {
    domain: String,
    tables: BTreeMap<String, Arc<Table>>,
}

impl TableCatalog {
    pub fn new(domain: impl Into<String>) -> Self {
        TableCatalog {
            domain: domain.into(),
            tables: BTreeMap::new(),
        }
    }

    pub fn from_tables(domain: impl Into<String>, tables: impl IntoIterator<Item = Table>) -> Result<Self, TableError> {
        let mut cat = TableCatalog::new(domain);
        for t in tables {
            cat.insert(t)?;
        }
        Ok(cat)
    }

    /// Loads every `*.csv` under `<data_dir>/<domain>/`.
    pub fn load_dir(data_dir: &Path, domain: &str, hints: Option<&CatalogHints>) -> Result<Self, TableError> {
        let dir = data_dir.join(domain);
        let entries = fs::read_dir(&dir).map_err(|source| TableError::Io {
            path: dir.clone(),
            source,
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        let mut cat = TableCatalog::new(domain);
        for p in paths {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            let table_hints = hints.and_then(|h| h.get(&stem));
            cat.insert(load_csv(&p, table_hints)?)?;
        }
        Ok(cat)
    }

    pub fn insert(&mut self, table: Table) -> Result<(), TableError> {
        if self.tables.contains_key(table.name()) {
            return Err(TableError::Schema(format!("duplicate table name `{}`", table.name())));
        }
        self.tables.insert(table.name().to_string(), Arc::new(table));
        Ok(())
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn get(&self, name: &str) -> Result<&Arc<Table>, TableError> {
        self.tables
            .get(name)
            .ok_or_else(|| TableError::UnknownTable(name.to_string()))
    }

    /// Case-insensitive lookup, preferring an exact match.
    pub fn find(&self, name: &str) -> Option<&Arc<Table>> {
        self.tables.get(name).or_else(|| {
            self.tables
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(name))
                .map(|(_, t)| t)
        })
    }

    /// Tables in name order.
    pub fn tables(&self) -> impl Iterator<Item = &Arc<Table>> {
        self.tables.values()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}
