//! Tabular data with an explicit missing-cell mask.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::stream_rng;

pub const DEFAULT_MISSING_TOKEN: &str = "?";

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("data row {row}, column '{column}': cannot parse {value:?} as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("data row {row}, column '{column}': value {value} outside valid range [{lo}, {hi}]")]
    OutOfRange { row: usize, column: String, value: f64, lo: f64, hi: f64 },
    #[error("data row {row}, column '{column}': unknown category label {label:?}")]
    UnknownCategory { row: usize, column: String, label: String },
    #[error("data row {row}: expected {expected} fields, found {found}")]
    RowLength { row: usize, expected: usize, found: usize },
    #[error("invalid column spec '{column}': {reason}")]
    InvalidSpec { column: String, reason: String },
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("column '{column}' has {observed} observed cells, cannot ampute {requested}")]
    NotEnoughObserved { column: String, requested: usize, observed: usize },
    #[error("column '{0}' is not continuous")]
    NotContinuous(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    /// Row identifier. Carried through I/O but never analysed or imputed.
    #[serde(alias = "identifier")]
    Id,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
            valid_range: None,
            unit: None,
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            valid_range: None,
            unit: None,
        }
    }

    pub fn id(name: impl Into<String>) -> Self {
        Self { kind: ColumnKind::Id, ..Self::continuous(name) }
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.valid_range = Some((lo, hi));
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }

    pub fn is_continuous(&self) -> bool {
        self.kind == ColumnKind::Continuous
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == ColumnKind::Categorical
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| DataError::InvalidSpec { column: self.name.clone(), reason: reason.to_string() };
        match self.kind {
            ColumnKind::Categorical => {
                let distinct: BTreeSet<&str> = self.categories.iter().map(String::as_str).collect();
                if distinct.len() < 2 || distinct.len() != self.categories.len() {
                    return Err(bad("categorical columns need at least two distinct category labels"));
                }
                if self.valid_range.is_some() {
                    return Err(bad("valid_range applies to continuous columns only"));
                }
            }
            ColumnKind::Continuous => {
                if !self.categories.is_empty() {
                    return Err(bad("categories apply to categorical columns only"));
                }
                if let Some((lo, hi)) = self.valid_range {
                    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                        return Err(bad("valid_range requires lo < hi"));
                    }
                }
            }
            ColumnKind::Id => {}
        }
        Ok(())
    }

    /// Checks that `value` conforms to this column.
    pub fn conforms(&self, value: &Value) -> bool {
        match (self.kind, value) {
            (ColumnKind::Continuous, Value::Number(x)) => {
                x.is_finite() && self.valid_range.is_none_or(|(lo, hi)| (lo..=hi).contains(x))
            }
            (ColumnKind::Categorical, Value::Label(l)) => self.categories.iter().any(|c| c == l),
            _ => false,
        }
    }

    fn parse_cell(&self, row: usize, raw: &str) -> Result<Value> {
        let text = raw.trim();
        match self.kind {
            ColumnKind::Continuous => {
                let value: f64 = text.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| DataError::Parse {
                    row,
                    column: self.name.clone(),
                    value: raw.to_string(),
                })?;
                if let Some((lo, hi)) = self.valid_range {
                    if !(lo..=hi).contains(&value) {
                        return Err(DataError::OutOfRange { row, column: self.name.clone(), value, lo, hi });
                    }
                }
                Ok(Value::Number(value))
            }
            ColumnKind::Categorical => self
                .categories
                .iter()
                .find(|c| c.as_str() == text)
                .map(|c| Value::Label(c.clone()))
                .ok_or_else(|| DataError::UnknownCategory { row, column: self.name.clone(), label: text.to_string() }),
            ColumnKind::Id => Ok(Value::Label(text.to_string())),
        }
    }
}

/// A single cell value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Label(String),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            Value::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Value::Label(l) => Some(l),
            Value::Number(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Label(l) => f.write_str(l),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Number(x)
    }
}

impl From<&str> for Value {
    fn from(l: &str) -> Self {
        Value::Label(l.to_string())
    }
}

/// Row identifiers, kept apart from the analysed columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdColumn {
    pub name: String,
    /// Position of the id column in the original file header.
    pub position: usize,
    pub values: Vec<String>,
}

/// An `n x p` grid of cells. `None` marks a missing cell, so the mask and the
/// values can never disagree in shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<Option<Value>>>,
    id_column: Option<IdColumn>,
}

impl Dataset {
    pub fn new(columns: Vec<ColumnSpec>, rows: Vec<Vec<Option<Value>>>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for spec in &columns {
            spec.validate()?;
            if spec.kind == ColumnKind::Id {
                return Err(DataError::InvalidSpec {
                    column: spec.name.clone(),
                    reason: "id columns are attached with Dataset::with_ids".into(),
                });
            }
            if !names.insert(spec.name.as_str()) {
                return Err(DataError::InvalidSpec { column: spec.name.clone(), reason: "duplicate column name".into() });
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(DataError::RowLength { row: r, expected: columns.len(), found: row.len() });
            }
            for (spec, cell) in columns.iter().zip(row) {
                if let Some(v) = cell {
                    if !spec.conforms(v) {
                        return Err(DataError::Invalid(format!(
                            "data row {r}, column '{}': value {v} does not conform to its column spec",
                            spec.name
                        )));
                    }
                }
            }
        }
        Ok(Self { columns, rows, id_column: None })
    }

    pub fn with_ids(mut self, ids: IdColumn) -> Result<Self> {
        if ids.values.len() != self.rows.len() {
            return Err(DataError::Invalid(format!(
                "id column has {} values for {} rows",
                ids.values.len(),
                self.rows.len()
            )));
        }
        self.id_column = Some(ids);
        Ok(self)
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &ColumnSpec {
        &self.columns[index]
    }

    pub fn id_column(&self) -> Option<&IdColumn> {
        self.id_column.as_ref()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&Value> {
        self.rows[row][col].as_ref()
    }

    pub fn row(&self, row: usize) -> &[Option<Value>] {
        &self.rows[row]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.rows[row][col].is_none()
    }

    /// `true` where a cell is missing.
    pub fn mask(&self) -> Vec<Vec<bool>> {
        self.rows.iter().map(|r| r.iter().map(Option::is_none).collect()).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_none()).count()
    }

    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if cell.is_none() {
                    cells.push((r, c));
                }
            }
        }
        cells
    }

    pub fn missing_rows_in(&self, col: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.is_missing(r, col)).collect()
    }

    pub fn observed_rows_in(&self, col: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| !self.is_missing(r, col)).collect()
    }

    /// Observed numeric values of a continuous column, in row order.
    pub fn observed_numbers(&self, col: usize) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r[col].as_ref().and_then(Value::as_number)).collect()
    }

    pub fn observed_values(&self, col: usize) -> Vec<&Value> {
        self.rows.iter().filter_map(|r| r[col].as_ref()).collect()
    }

    /// Replaces one cell. The value must conform to the column spec.
    pub fn set(&mut self, row: usize, col: usize, value: Option<Value>) -> Result<()> {
        if let Some(v) = &value {
            if !self.columns[col].conforms(v) {
                return Err(DataError::Invalid(format!(
                    "value {v} does not conform to column '{}'",
                    self.columns[col].name
                )));
            }
        }
        self.rows[row][col] = value;
        Ok(())
    }

    /// Row label used in prompts and reports: the id value when present,
    /// otherwise the 0-based row index.
    pub fn row_label(&self, row: usize) -> String {
        match &self.id_column {
            Some(ids) => ids.values[row].clone(),
            None => row.to_string(),
        }
    }

    /// Header in file order, id column included.
    pub fn header(&self) -> Vec<String> {
        let mut names: Vec<String> = self.columns.iter().map(|c| c.name.clone()).collect();
        if let Some(ids) = &self.id_column {
            names.insert(ids.position.min(names.len()), ids.name.clone());
        }
        names
    }

    /// Schema in file order, id column included.
    pub fn schema(&self) -> Vec<ColumnSpec> {
        let mut specs = self.columns.clone();
        if let Some(ids) = &self.id_column {
            specs.insert(ids.position.min(specs.len()), ColumnSpec::id(ids.name.clone()));
        }
        specs
    }

    pub fn write_csv<W: Write>(&self, writer: W, missing_token: &str) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(self.header())?;
        for (r, row) in self.rows.iter().enumerate() {
            let mut record: Vec<String> = row
                .iter()
                .map(|cell| cell.as_ref().map_or_else(|| missing_token.to_string(), Value::to_string))
                .collect();
            if let Some(ids) = &self.id_column {
                record.insert(ids.position.min(record.len()), ids.values[r].clone());
            }
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, missing_token: &str) -> Result<()> {
        self.write_csv(File::create(path)?, missing_token)
    }
}

/// Reads a schema file: a JSON list of column specs in file order.
pub fn load_schema(path: impl AsRef<Path>) -> Result<Vec<ColumnSpec>> {
    let schema: Vec<ColumnSpec> = serde_json::from_reader(File::open(path)?)?;
    Ok(schema)
}

pub fn load_csv(path: impl AsRef<Path>, schema: &[ColumnSpec], missing_token: &str) -> Result<Dataset> {
    read_csv(File::open(path)?, schema, missing_token)
}

/// Parses CSV text against `schema`. The header must list the schema names in
/// order; `missing_token` cells become missing.
pub fn read_csv<R: Read>(reader: R, schema: &[ColumnSpec], missing_token: &str) -> Result<Dataset> {
    for spec in schema {
        spec.validate()?;
    }
    let id_positions: Vec<usize> =
        schema.iter().enumerate().filter(|(_, s)| s.kind == ColumnKind::Id).map(|(i, _)| i).collect();
    if id_positions.len() > 1 {
        return Err(DataError::Invalid("at most one id column is supported".into()));
    }

    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let expected: Vec<String> = schema.iter().map(|s| s.name.clone()).collect();
    let found: Vec<String> = csv_reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != expected {
        return Err(DataError::HeaderMismatch { expected, found });
    }

    let mut rows = Vec::new();
    let mut ids = Vec::new();
    for (r, record) in csv_reader.records().enumerate() {
        let record = record?;
        if record.len() != schema.len() {
            return Err(DataError::RowLength { row: r, expected: schema.len(), found: record.len() });
        }
        let mut row = Vec::with_capacity(schema.len());
        for (spec, raw) in schema.iter().zip(record.iter()) {
            if spec.kind == ColumnKind::Id {
                ids.push(raw.trim().to_string());
                continue;
            }
            if raw.trim() == missing_token {
                row.push(None);
            } else {
                row.push(Some(spec.parse_cell(r, raw)?));
            }
        }
        rows.push(row);
    }

    let columns: Vec<ColumnSpec> = schema.iter().filter(|s| s.kind != ColumnKind::Id).cloned().collect();
    let dataset = Dataset::new(columns, rows)?;
    match id_positions.first() {
        Some(&position) => dataset.with_ids(IdColumn { name: schema[position].name.clone(), position, values: ids }),
        None => Ok(dataset),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub row: usize,
    pub column: String,
    pub value: Value,
}

/// Original values of amputed cells. Serialized as a JSON list of
/// `{row, column, value}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruth {
    pub entries: Vec<GroundTruthEntry>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend(&mut self, other: GroundTruth) {
        self.entries.extend(other.entries);
    }

    /// Writes every recorded original back into `d`.
    pub fn restore(&self, d: &Dataset) -> Result<Dataset> {
        let mut out = d.clone();
        for e in &self.entries {
            let col = out.column_index(&e.column)?;
            out.set(e.row, col, Some(e.value.clone()))?;
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = File::create(path)?;
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// Masks `n` uniformly chosen observed cells of `column`, recording their
/// originals. Deterministic for a fixed seed.
pub fn ampute(d: &Dataset, column: &str, n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    let col = d.column_index(column)?;
    let observed = d.observed_rows_in(col);
    if n > observed.len() {
        return Err(DataError::NotEnoughObserved { column: column.to_string(), requested: n, observed: observed.len() });
    }
    let mut rng = stream_rng(seed, 0);
    let mut picked: Vec<usize> = index::sample(&mut rng, observed.len(), n).into_iter().map(|i| observed[i]).collect();
    picked.sort_unstable();

    let mut out = d.clone();
    let mut truth = GroundTruth::default();
    for row in picked {
        let original = out.rows[row][col].take().expect("row was observed");
        truth.entries.push(GroundTruthEntry { row, column: column.to_string(), value: original });
    }
    Ok((out, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fev_schema() -> Vec<ColumnSpec> {
        vec![
            ColumnSpec::continuous("age").with_range(3.0, 19.0).with_unit("years"),
            ColumnSpec::continuous("fev").with_unit("litres"),
            ColumnSpec::continuous("height").with_unit("inches"),
            ColumnSpec::categorical("gender", ["F", "M"]),
            ColumnSpec::categorical("smoke", ["No", "Yes"]),
        ]
    }

    fn table1_schema() -> Vec<ColumnSpec> {
        vec![
            ColumnSpec::id("ID"),
            ColumnSpec::continuous("Age"),
            ColumnSpec::categorical("Sex", ["M", "F"]),
            ColumnSpec::continuous("Income"),
            ColumnSpec::continuous("Zip"),
            ColumnSpec::categorical("Job", ["a", "b"]),
            ColumnSpec::categorical("Status", ["single", "married"]),
        ]
    }

    #[test]
    fn fev_row_has_no_missing_cells() {
        let text = "age,fev,height,gender,smoke\n9,1.708,57.0,F,No\n";
        let d = read_csv(text.as_bytes(), &fev_schema(), "?").unwrap();
        assert_eq!(d.n_rows(), 1);
        assert_eq!(d.missing_count(), 0);
        assert_eq!(d.get(0, 1), Some(&Value::Number(1.708)));
        assert_eq!(d.get(0, 3), Some(&Value::Label("F".into())));
    }

    #[test]
    fn question_marks_become_missing() {
        let text = "ID,Age,Sex,Income,Zip,Job,Status\n1,50,M,100,123,a,single\n2,45,?,?,456,?,married\n";
        let d = read_csv(text.as_bytes(), &table1_schema(), DEFAULT_MISSING_TOKEN).unwrap();
        let mask = d.mask();
        // Sex, Income, Job (id column removed from the analysed grid)
        assert_eq!(mask[1], vec![false, true, true, false, true, false]);
        assert_eq!(d.id_column().unwrap().values, vec!["1", "2"]);
        assert_eq!(d.header(), table1_schema().iter().map(|c| c.name.clone()).collect::<Vec<_>>());
    }

    #[test]
    fn header_only_file_is_empty_dataset() {
        let d = read_csv("age,fev,height,gender,smoke\n".as_bytes(), &fev_schema(), "?").unwrap();
        assert_eq!(d.n_rows(), 0);
        assert_eq!(d.n_cols(), 5);
    }

    #[test]
    fn parse_errors_report_location() {
        let bad_number = "age,fev,height,gender,smoke\n9,1.7,57,F,No\n9,abc,57,F,No\n";
        match read_csv(bad_number.as_bytes(), &fev_schema(), "?") {
            Err(DataError::Parse { row: 1, column, .. }) => assert_eq!(column, "fev"),
            other => panic!("unexpected {other:?}"),
        }
        let out_of_range = "age,fev,height,gender,smoke\n25,1.7,57,F,No\n";
        assert!(matches!(
            read_csv(out_of_range.as_bytes(), &fev_schema(), "?"),
            Err(DataError::OutOfRange { row: 0, .. })
        ));
        let unknown = "age,fev,height,gender,smoke\n9,1.7,57,X,No\n";
        assert!(matches!(
            read_csv(unknown.as_bytes(), &fev_schema(), "?"),
            Err(DataError::UnknownCategory { label, .. }) if label == "X"
        ));
        let header = "age,fev,height,sex,smoke\n";
        assert!(matches!(read_csv(header.as_bytes(), &fev_schema(), "?"), Err(DataError::HeaderMismatch { .. })));
    }

    #[test]
    fn custom_missing_token() {
        let text = "age,fev,height,gender,smoke\nNA,1.7,57,F,No\n";
        let d = read_csv(text.as_bytes(), &fev_schema(), "NA").unwrap();
        assert!(d.is_missing(0, 0));
    }

    #[test]
    fn spec_invariants_enforced() {
        assert!(ColumnSpec::categorical("g", ["a"]).validate().is_err());
        assert!(ColumnSpec::categorical("g", ["a", "a"]).validate().is_err());
        assert!(ColumnSpec::continuous("x").with_range(2.0, 2.0).validate().is_err());
        assert!(ColumnSpec::continuous("x").with_range(1.0, 2.0).validate().is_ok());
    }

    fn small() -> Dataset {
        let rows = (0..30)
            .map(|i| vec![Some(Value::Number(3.0 + (i % 17) as f64)), Some(Value::Label(if i % 2 == 0 { "F" } else { "M" }.into()))])
            .collect();
        Dataset::new(vec![ColumnSpec::continuous("age").with_range(3.0, 19.0), ColumnSpec::categorical("gender", ["F", "M"])], rows)
            .unwrap()
    }

    #[test]
    fn ampute_masks_exactly_n_and_restores() {
        let d = small();
        let (amputed, truth) = ampute(&d, "age", 10, 7).unwrap();
        assert_eq!(truth.len(), 10);
        assert_eq!(amputed.missing_count(), 10);
        for e in &truth.entries {
            assert!(amputed.is_missing(e.row, 0));
        }
        assert_eq!(truth.restore(&amputed).unwrap(), d);
    }

    #[test]
    fn ampute_zero_and_determinism() {
        let d = small();
        let (same, truth) = ampute(&d, "age", 0, 7).unwrap();
        assert_eq!(same, d);
        assert!(truth.is_empty());
        let a = ampute(&d, "gender", 12, 99).unwrap();
        let b = ampute(&d, "gender", 12, 99).unwrap();
        assert_eq!(a.0.mask(), b.0.mask());
        assert!(matches!(ampute(&d, "age", 31, 1), Err(DataError::NotEnoughObserved { .. })));
        assert!(matches!(ampute(&d, "nope", 1, 1), Err(DataError::UnknownColumn(_))));
    }

    #[test]
    fn ground_truth_json_shape() {
        let (_, truth) = ampute(&small(), "age", 1, 3).unwrap();
        let json = serde_json::to_value(&truth).unwrap();
        let entry = &json.as_array().unwrap()[0];
        assert!(entry.get("row").is_some() && entry.get("column").is_some() && entry.get("value").is_some());
        let back: GroundTruth = serde_json::from_value(json).unwrap();
        assert_eq!(back, truth);
    }

    #[test]
    fn csv_round_trip_keeps_id_position() {
        let text = "ID,Age,Sex,Income,Zip,Job,Status\n1,50,M,100,123,a,single\n2,45,?,?,456,?,married\n";
        let d = read_csv(text.as_bytes(), &table1_schema(), "?").unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, "?").unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }
}
