//! Microdata ingestion and the QID × sensitive-attribute cross-tabulation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokens read as missing values.
pub const MISSING_TOKENS: [&str; 3] = ["", "?", "NA"];

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Number(f64),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    /// Category label used as a table key.
    pub fn label(&self) -> Option<String> {
        match self {
            Value::Text(s) => Some(s.clone()),
            Value::Number(x) => Some(format!("{x}")),
            Value::Missing => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Number(x) => write!(f, "{x}"),
            Value::Missing => f.write_str("?"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Text,
    Numeric,
}

/// Column-type hints; unlisted columns are read as text.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    types: HashMap<String, ColumnType>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn numeric(mut self, column: impl Into<String>) -> Self {
        self.types.insert(column.into(), ColumnType::Numeric);
        self
    }

    pub fn column_type(&self, column: &str) -> ColumnType {
        self.types.get(column).copied().unwrap_or(ColumnType::Text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    column_names: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl RawDataset {
    pub fn new(column_names: Vec<String>, rows: Vec<Vec<Value>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != column_names.len() {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    found: row.len(),
                    expected: column_names.len(),
                });
            }
        }
        Ok(Self { column_names, rows })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
}

fn parse_field(raw: &str, ty: ColumnType, column: &str, row: usize) -> Result<Value> {
    let s = raw.trim();
    if MISSING_TOKENS.contains(&s) {
        return Ok(Value::Missing);
    }
    match ty {
        ColumnType::Text => Ok(Value::Text(s.to_string())),
        ColumnType::Numeric => s.parse::<f64>().map(Value::Number).map_err(|_| Error::NotNumeric {
            column: column.to_string(),
            row,
            value: s.to_string(),
        }),
    }
}

/// Read delimited text with a header row. Fields are trimmed; see
/// [`MISSING_TOKENS`] for what counts as missing.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawDataset> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let data = fs::read(path)?;
    parse_csv(&data, schema)
}

pub fn parse_csv(data: &[u8], schema: &Schema) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(data);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::MissingHeader);
    }
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    let types: Vec<ColumnType> = names.iter().map(|n| schema.column_type(n)).collect();
    for name in schema.types.keys() {
        if !names.contains(name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        // a blank trailing line comes through as a single empty field
        if record.len() == 1 && record[0].is_empty() && names.len() > 1 {
            continue;
        }
        if record.len() != names.len() {
            return Err(Error::RaggedRow {
                row: row_no,
                found: record.len(),
                expected: names.len(),
            });
        }
        let row = record
            .iter()
            .zip(&types)
            .zip(&names)
            .map(|((field, &ty), name)| parse_field(field, ty, name, row_no))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    RawDataset::new(names, rows)
}

fn format_bound(x: f64) -> String {
    // normalise -0 so the label of the bin starting at zero reads "0-w"
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x}")
}

/// Replace a numeric column by half-open interval labels `[k·w, (k+1)·w)`,
/// rendered as `"lo-hi"`. Missing values stay missing.
pub fn bin_numeric(dataset: &RawDataset, column: &str, width: f64) -> Result<RawDataset> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidParameter(format!("bin width must be > 0, got {width}")));
    }
    let idx = dataset.column_index(column)?;
    let mut rows = dataset.rows.clone();
    for (r, row) in rows.iter_mut().enumerate() {
        let x = match &row[idx] {
            Value::Missing => continue,
            Value::Number(x) => *x,
            Value::Text(s) => s.parse::<f64>().map_err(|_| Error::NotNumeric {
                column: column.to_string(),
                row: r + 1,
                value: s.clone(),
            })?,
        };
        let k = (x / width).floor();
        let lo = k * width;
        let hi = (k + 1.0) * width;
        row[idx] = Value::Text(format!("{}-{}", format_bound(lo), format_bound(hi)));
    }
    Ok(RawDataset {
        column_names: dataset.column_names.clone(),
        rows,
    })
}

/// One non-empty QID combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    pub key: Vec<String>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Homogeneous(usize),
    Heterogeneous,
}

impl CellRecord {
    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Categories with a positive count.
    pub fn support(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.counts.iter().filter(|&&c| c > 0).count() == 1
    }
}

/// Homogeneous iff exactly one category is present, together with the support set.
pub fn classify_cell(cell: &CellRecord) -> Result<(CellClass, Vec<usize>)> {
    let support = cell.support();
    match support.len() {
        0 => Err(Error::EmptyCell),
        1 => Ok((CellClass::Homogeneous(support[0]), support)),
        _ => Ok((CellClass::Heterogeneous, support)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyTable {
    qid_names: Vec<String>,
    sensitive_name: String,
    categories: Vec<String>,
    cells: Vec<CellRecord>,
}

#[derive(Deserialize)]
struct RawTable {
    qid_names: Vec<String>,
    sensitive_name: String,
    categories: Vec<String>,
    cells: Vec<CellRecord>,
}

impl<'de> Deserialize<'de> for FrequencyTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTable::deserialize(d)?;
        FrequencyTable::new(raw.qid_names, raw.sensitive_name, raw.categories, raw.cells)
            .map_err(serde::de::Error::custom)
    }
}

impl FrequencyTable {
    /// Validates the invariants and sorts cells by key.
    pub fn new(
        qid_names: Vec<String>,
        sensitive_name: String,
        categories: Vec<String>,
        mut cells: Vec<CellRecord>,
    ) -> Result<Self> {
        let k = categories.len();
        if k < 2 {
            return Err(Error::TooFewCategories(k));
        }
        if qid_names.is_empty() {
            return Err(Error::InvalidTable("at least one QID required".into()));
        }
        if cells.is_empty() {
            return Err(Error::InvalidTable("table has no cells".into()));
        }
        for cell in &cells {
            if cell.key.len() != qid_names.len() {
                return Err(Error::InvalidTable(format!(
                    "cell key {:?} has {} entries, expected {}",
                    cell.key,
                    cell.key.len(),
                    qid_names.len()
                )));
            }
            if cell.counts.len() != k {
                return Err(Error::InvalidTable(format!(
                    "cell {:?} has {} counts, expected {k}",
                    cell.key,
                    cell.counts.len()
                )));
            }
            if cell.n() == 0 {
                return Err(Error::EmptyCell);
            }
        }
        cells.sort_by(|a, b| a.key.cmp(&b.key));
        if cells.windows(2).any(|w| w[0].key == w[1].key) {
            return Err(Error::InvalidTable("duplicate cell keys".into()));
        }
        Ok(Self {
            qid_names,
            sensitive_name,
            categories,
            cells,
        })
    }

    /// Synthetic table with generated labels; handy for experiments and tests.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.first().map_or(0, Vec::len);
        let width = counts.len().to_string().len();
        let cells = counts
            .into_iter()
            .enumerate()
            .map(|(i, counts)| CellRecord {
                key: vec![format!("c{i:0width$}")],
                counts,
            })
            .collect();
        Self::new(
            vec!["cell".into()],
            "y".into(),
            (0..k).map(|j| format!("y{j}")).collect(),
            cells,
        )
    }

    pub fn qid_names(&self) -> &[String] {
        &self.qid_names
    }

    pub fn sensitive_name(&self) -> &str {
        &self.sensitive_name
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn cells(&self) -> &[CellRecord] {
        &self.cells
    }

    /// Number of sensitive categories K.
    pub fn k(&self) -> usize {
        self.categories.len()
    }

    /// Number of non-empty cells M.
    pub fn m(&self) -> usize {
        self.cells.len()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().map(CellRecord::n).sum()
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.cells.iter().map(CellRecord::n).collect()
    }

    pub fn all_homogeneous(&self) -> bool {
        self.cells.iter().all(CellRecord::is_homogeneous)
    }

    pub fn homogeneous_fraction(&self) -> f64 {
        let h = self.cells.iter().filter(|c| c.is_homogeneous()).count();
        h as f64 / self.m() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Back to microdata: one row per record, columns `qid_names ++ [sensitive]`.
    pub fn expand(&self) -> RawDataset {
        let mut names = self.qid_names.clone();
        names.push(self.sensitive_name.clone());
        let mut rows = Vec::with_capacity(self.total() as usize);
        for cell in &self.cells {
            for (k, &c) in cell.counts.iter().enumerate() {
                for _ in 0..c {
                    let mut row: Vec<Value> = cell.key.iter().cloned().map(Value::Text).collect();
                    row.push(Value::Text(self.categories[k].clone()));
                    rows.push(row);
                }
            }
        }
        RawDataset {
            column_names: names,
            rows,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tabulation {
    pub table: FrequencyTable,
    /// Rows skipped because a selected column was missing.
    pub dropped_rows: usize,
}

/// Cross-tabulate the QIDs against the sensitive attribute, keeping only
/// non-empty QID cells. Sensitive categories are ordered by first appearance.
pub fn cross_tabulate(dataset: &RawDataset, qids: &[&str], sensitive: &str) -> Result<Tabulation> {
    if qids.is_empty() {
        return Err(Error::InvalidParameter("at least one QID required".into()));
    }
    let qid_idx = qids
        .iter()
        .map(|q| dataset.column_index(q))
        .collect::<Result<Vec<_>>>()?;
    let y_idx = dataset.column_index(sensitive)?;

    let mut categories: Vec<String> = Vec::new();
    let mut category_index: HashMap<String, usize> = HashMap::new();
    let mut cells: BTreeMap<Vec<String>, Vec<u64>> = BTreeMap::new();
    let mut dropped = 0usize;

    for row in dataset.rows() {
        let key: Option<Vec<String>> = qid_idx.iter().map(|&i| row[i].label()).collect();
        let (Some(key), Some(y)) = (key, row[y_idx].label()) else {
            dropped += 1;
            continue;
        };
        let k = *category_index.entry(y.clone()).or_insert_with(|| {
            categories.push(y);
            categories.len() - 1
        });
        let counts = cells.entry(key).or_default();
        if counts.len() <= k {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }

    if cells.is_empty() {
        return Err(Error::NoRows);
    }
    if categories.len() < 2 {
        return Err(Error::TooFewCategories(categories.len()));
    }
    let k = categories.len();
    let cells = cells
        .into_iter()
        .map(|(key, mut counts)| {
            counts.resize(k, 0);
            CellRecord { key, counts }
        })
        .collect();
    let table = FrequencyTable::new(
        qids.iter().map(|s| s.to_string()).collect(),
        sensitive.to_string(),
        categories,
        cells,
    )?;
    Ok(Tabulation {
        table,
        dropped_rows: dropped,
    })
}
