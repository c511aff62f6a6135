//! Sets of `m` completed datasets, from the crowd or from MICE.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crowd::JudgmentSet;
use crate::dataset::{load_csv, DataError, Dataset, Value, DEFAULT_MISSING_TOKEN};
use crate::questionnaire::Questionnaire;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Crowd,
    Machine,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Crowd => "crowd",
            Provenance::Machine => "machine",
        })
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "crowd" => Ok(Provenance::Crowd),
            "machine" => Ok(Provenance::Machine),
            other => Err(format!("unknown provenance '{other}' (expected crowd or machine)")),
        }
    }
}

/// The `m` imputed values of one originally missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellImputations {
    pub row: usize,
    pub column: String,
    pub values: Vec<Value>,
}

/// `m` completed copies of one incomplete dataset.
///
/// Stored as the incomplete dataset plus, for every missing cell, its `m`
/// imputed values; copy `i` fills each cell with its `i`-th value. All copies
/// agree on observed cells by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationSet {
    pub provenance: Provenance,
    pub seed: Option<u64>,
    pub m: usize,
    pub cycles: Option<usize>,
    pub k_d: Option<usize>,
    base: Dataset,
    cells: Vec<CellImputations>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    seed: Option<u64>,
    m: usize,
    cycles: Option<usize>,
    k_d: Option<usize>,
    provenance: Provenance,
    files: Vec<String>,
    cells: Vec<(usize, String)>,
    schema: Vec<crate::dataset::ColumnSpec>,
}

impl ImputationSet {
    /// `cells` must cover every missing cell of `base` exactly once, each with
    /// `m` values conforming to its column.
    pub fn new(
        provenance: Provenance,
        base: Dataset,
        mut cells: Vec<CellImputations>,
        m: usize,
    ) -> Result<Self, DataError> {
        if m == 0 {
            return Err(DataError::Invalid("an imputation set needs m >= 1".into()));
        }
        cells.sort_by(|a, b| {
            let ca = base.column_index(&a.column).unwrap_or(usize::MAX);
            let cb = base.column_index(&b.column).unwrap_or(usize::MAX);
            (ca, a.row).cmp(&(cb, b.row))
        });
        let mut covered = Vec::with_capacity(cells.len());
        for c in &cells {
            let col = base.column_index(&c.column)?;
            if c.row >= base.n_rows() || !base.is_missing(c.row, col) {
                return Err(DataError::Invalid(format!("cell ({}, {}) is not missing", c.row, c.column)));
            }
            if c.values.len() != m {
                return Err(DataError::Invalid(format!(
                    "cell ({}, {}) has {} imputations, expected {m}",
                    c.row,
                    c.column,
                    c.values.len()
                )));
            }
            if let Some(v) = c.values.iter().find(|v| !base.column(col).conforms(v)) {
                return Err(DataError::Invalid(format!("imputed value {v} does not fit column '{}'", c.column)));
            }
            covered.push((c.row, col));
        }
        covered.sort_unstable();
        let mut missing = base.missing_cells();
        missing.sort_unstable();
        if covered != missing {
            return Err(DataError::Invalid(format!(
                "imputations cover {} cells but the dataset has {} missing",
                covered.len(),
                missing.len()
            )));
        }
        Ok(Self { provenance, seed: None, m, cycles: None, k_d: None, base, cells })
    }

    /// Builds a set from completed datasets that share `base`'s observed cells.
    pub fn from_completed(provenance: Provenance, base: Dataset, completed: &[Dataset]) -> Result<Self, DataError> {
        let missing = base.missing_cells();
        let mut cells: Vec<CellImputations> = missing
            .iter()
            .map(|&(row, col)| CellImputations {
                row,
                column: base.column(col).name.clone(),
                values: Vec::with_capacity(completed.len()),
            })
            .collect();
        for d in completed {
            if d.n_rows() != base.n_rows() || d.header() != base.header() {
                return Err(DataError::Invalid("completed dataset does not match the incomplete one".into()));
            }
            for row in 0..base.n_rows() {
                for col in 0..base.n_cols() {
                    if let Some(v) = base.get(row, col) {
                        if d.get(row, col) != Some(v) {
                            return Err(DataError::Invalid(format!("observed cell ({row}, {col}) was modified")));
                        }
                    }
                }
            }
            for (cell, &(row, col)) in cells.iter_mut().zip(&missing) {
                let v = d
                    .get(row, col)
                    .cloned()
                    .ok_or_else(|| DataError::Invalid(format!("cell ({row}, {col}) left missing")))?;
                cell.values.push(v);
            }
        }
        Self::new(provenance, base, cells, completed.len())
    }

    /// Crowd imputations: copy `i` takes the `i`-th accepted judgment of each
    /// question. Every missing cell needs a question with at least `k`
    /// accepted judgments; extra judgments are ignored.
    pub fn from_judgments(
        base: &Dataset,
        questionnaires: &[Questionnaire],
        judgments: &JudgmentSet,
        k: usize,
    ) -> Result<Self, DataError> {
        let mut cells = Vec::new();
        for qn in questionnaires {
            for q in &qn.questions {
                let values = judgments
                    .accepted(&q.id)
                    .take(k)
                    .map(|j| q.constraint.check(&j.raw_answer))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|reason| DataError::Invalid(format!("stored judgment for '{}' is invalid: {reason}", q.id)))?;
                if values.len() < k {
                    return Err(DataError::Invalid(format!(
                        "question '{}' has {} accepted judgments, expected {k}",
                        q.id,
                        values.len()
                    )));
                }
                cells.push(CellImputations { row: q.target_cell.row, column: q.target_cell.column.clone(), values });
            }
        }
        Self::new(Provenance::Crowd, base.clone(), cells, k)
    }

    pub fn with_params(mut self, seed: Option<u64>, cycles: Option<usize>, k_d: Option<usize>) -> Self {
        self.seed = seed;
        self.cycles = cycles;
        self.k_d = k_d;
        self
    }

    pub fn base(&self) -> &Dataset {
        &self.base
    }

    pub fn cells(&self) -> &[CellImputations] {
        &self.cells
    }

    pub fn cell(&self, row: usize, column: &str) -> Option<&CellImputations> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }

    /// Completed copy `i` (`0 <= i < m`).
    pub fn completed(&self, i: usize) -> Dataset {
        assert!(i < self.m, "imputation index {i} out of range for m = {}", self.m);
        let mut d = self.base.clone();
        for c in &self.cells {
            let col = d.column_index(&c.column).expect("validated on construction");
            d.set(c.row, col, Some(c.values[i].clone())).expect("validated on construction");
        }
        d
    }

    pub fn completed_all(&self) -> Vec<Dataset> {
        (0..self.m).map(|i| self.completed(i)).collect()
    }

    /// Writes `imputation_000.csv` ... and `manifest.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), DataError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let files: Vec<String> = (0..self.m).map(|i| format!("imputation_{i:03}.csv")).collect();
        for (i, file) in files.iter().enumerate() {
            self.completed(i).save_csv(dir.join(file), DEFAULT_MISSING_TOKEN)?;
        }
        let manifest = Manifest {
            seed: self.seed,
            m: self.m,
            cycles: self.cycles,
            k_d: self.k_d,
            provenance: self.provenance,
            files,
            cells: self.cells.iter().map(|c| (c.row, c.column.clone())).collect(),
            schema: self.base.schema(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, DataError> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        if manifest.files.len() != manifest.m {
            return Err(DataError::Invalid("manifest lists a different number of files than m".into()));
        }
        let completed = manifest
            .files
            .iter()
            .map(|f| load_csv(dir.join(f), &manifest.schema, DEFAULT_MISSING_TOKEN))
            .collect::<Result<Vec<_>, _>>()?;
        let mut base = completed
            .first()
            .cloned()
            .ok_or_else(|| DataError::Invalid("empty imputation set".into()))?;
        for (row, column) in &manifest.cells {
            let col = base.column_index(column)?;
            base.set(*row, col, None)?;
        }
        Ok(Self::from_completed(manifest.provenance, base, &completed)?.with_params(
            manifest.seed,
            manifest.cycles,
            manifest.k_d,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ampute, ColumnSpec};

    fn base() -> Dataset {
        let schema = vec![ColumnSpec::continuous("x"), ColumnSpec::categorical("g", ["a", "b"])];
        let rows = vec![
            vec![Some(Value::Number(1.0)), Some(Value::from("a"))],
            vec![None, Some(Value::from("b"))],
            vec![Some(Value::Number(3.0)), None],
        ];
        Dataset::new(schema, rows).unwrap()
    }

    fn set() -> ImputationSet {
        ImputationSet::new(
            Provenance::Machine,
            base(),
            vec![
                CellImputations { row: 2, column: "g".into(), values: vec!["a".into(), "b".into()] },
                CellImputations { row: 1, column: "x".into(), values: vec![Value::Number(1.0), Value::Number(3.0)] },
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn completed_copies_fill_every_cell() {
        let s = set();
        for d in s.completed_all() {
            assert_eq!(d.missing_count(), 0);
            assert_eq!(d.get(0, 0), Some(&Value::Number(1.0)));
        }
        assert_eq!(s.completed(1).get(1, 0), Some(&Value::Number(3.0)));
    }

    #[test]
    fn rejects_bad_coverage() {
        let missing_one = ImputationSet::new(
            Provenance::Machine,
            base(),
            vec![CellImputations { row: 1, column: "x".into(), values: vec![Value::Number(1.0)] }],
            1,
        );
        assert!(missing_one.is_err());
        let wrong_label = ImputationSet::new(
            Provenance::Machine,
            base(),
            vec![
                CellImputations { row: 1, column: "x".into(), values: vec![Value::Number(1.0)] },
                CellImputations { row: 2, column: "g".into(), values: vec!["c".into()] },
            ],
            1,
        );
        assert!(wrong_label.is_err());
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = set().with_params(Some(7), Some(10), Some(5));
        s.save(dir.path()).unwrap();
        assert!(dir.path().join("imputation_001.csv").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(manifest["provenance"], "machine");
        assert_eq!(manifest["k_d"], 5);
        assert_eq!(ImputationSet::load(dir.path()).unwrap(), s);
    }

    #[test]
    fn from_completed_checks_observed_cells() {
        let d = crate::synth::fev_like(30, 1);
        let (amputed, _) = ampute(&d, "age", 3, 2).unwrap();
        let ok = ImputationSet::from_completed(Provenance::Machine, amputed.clone(), std::slice::from_ref(&d)).unwrap();
        assert_eq!(ok.cells().len(), 3);
        let mut tampered = d.clone();
        let row = amputed.observed_rows_in(1)[0];
        tampered.set(row, 1, Some(Value::Number(5.5))).unwrap();
        assert!(ImputationSet::from_completed(Provenance::Machine, amputed, &[tampered]).is_err());
    }
}
