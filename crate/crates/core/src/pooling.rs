//! Pooling of multiple imputations and method comparison reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, GroundTruth, Value};
use crate::imputation::{ImputationSet, Provenance};
use crate::stats::{mean, quantile_sorted, sample_variance, sorted_copy};

pub const TIE: &str = "tie";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PoolError {
    #[error("nothing to pool")]
    Empty,
    #[error("cannot pool numbers and labels together")]
    MixedKinds,
    #[error("label '{0}' is not a declared category")]
    UnknownLabel(String),
    #[error("non-finite value in pool")]
    NonFinite,
    #[error("imputation sets do not cover the ground-truth cells: {0}")]
    CoverageMismatch(String),
}

/// Average of `m` point estimates. Summation runs over the sorted values with
/// compensation, so the result does not depend on input order.
pub fn pool_point(values: &[f64]) -> Result<f64, PoolError> {
    if values.is_empty() {
        return Err(PoolError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PoolError::NonFinite);
    }
    let sorted = sorted_copy(values);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &v in &sorted {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    Ok((sum + comp) / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteCount {
    pub label: String,
    pub votes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellSummary {
    Continuous {
        mean: f64,
        median: f64,
        p25: f64,
        p75: f64,
        values: Vec<f64>,
    },
    Categorical {
        counts: Vec<VoteCount>,
        /// Majority label, or `"tie"` when the top count is shared.
        winner: String,
        /// Top count minus runner-up count.
        margin: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledCellSummary {
    pub row: usize,
    pub column: String,
    pub m: usize,
    #[serde(flatten)]
    pub summary: CellSummary,
}

impl CellSummary {
    /// Table cell: `6.0(5.0,7.0)` or `13 - 17`.
    pub fn display(&self) -> String {
        match self {
            CellSummary::Continuous { median, p25, p75, .. } => {
                format!("{}({},{})", one_decimal(*median), one_decimal(*p25), one_decimal(*p75))
            }
            CellSummary::Categorical { counts, .. } => {
                counts.iter().map(|c| c.votes.to_string()).collect::<Vec<_>>().join(" - ")
            }
        }
    }

    pub fn winner(&self) -> Option<&str> {
        match self {
            CellSummary::Categorical { winner, .. } => Some(winner),
            CellSummary::Continuous { .. } => None,
        }
    }

    fn agrees_with(&self, other: &CellSummary) -> bool {
        match (self, other) {
            (CellSummary::Continuous { median: a, .. }, CellSummary::Continuous { median: b, .. }) => {
                one_decimal(*a) == one_decimal(*b)
            }
            (CellSummary::Categorical { winner: a, .. }, CellSummary::Categorical { winner: b, .. }) => a == b,
            _ => false,
        }
    }
}

/// One decimal place, halves rounded away from zero.
pub fn one_decimal(x: f64) -> String {
    let r = (x * 10.0).round() / 10.0;
    format!("{:.1}", if r == 0.0 { 0.0 } else { r })
}

/// Summarizes the `m` imputations of one cell. `categories` fixes the order
/// of vote counts and includes zero-vote labels; without it, labels appear
/// in sorted order.
pub fn summarize_cell(values: &[Value], categories: Option<&[String]>) -> Result<CellSummary, PoolError> {
    if values.is_empty() {
        return Err(PoolError::Empty);
    }
    let numbers: Option<Vec<f64>> = values.iter().map(Value::as_number).collect();
    if let Some(numbers) = numbers {
        let sorted = sorted_copy(&numbers);
        return Ok(CellSummary::Continuous {
            mean: pool_point(&numbers)?,
            median: quantile_sorted(&sorted, 0.5).expect("nonempty"),
            p25: quantile_sorted(&sorted, 0.25).expect("nonempty"),
            p75: quantile_sorted(&sorted, 0.75).expect("nonempty"),
            values: numbers,
        });
    }
    let labels: Option<Vec<&str>> = values.iter().map(Value::as_label).collect();
    let labels = labels.ok_or(PoolError::MixedKinds)?;
    let order: Vec<String> = match categories {
        Some(c) => c.to_vec(),
        None => labels.iter().map(|l| l.to_string()).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let mut counts: Vec<VoteCount> = order.into_iter().map(|label| VoteCount { label, votes: 0 }).collect();
    for l in labels {
        let slot = counts.iter_mut().find(|c| c.label == l).ok_or_else(|| PoolError::UnknownLabel(l.to_string()))?;
        slot.votes += 1;
    }
    let mut ranked: Vec<&VoteCount> = counts.iter().collect();
    ranked.sort_by_key(|v| std::cmp::Reverse(v.votes));
    let top = ranked[0].votes;
    let second = ranked.get(1).map_or(0, |c| c.votes);
    let winner = if ranked.len() > 1 && second == top { TIE.to_string() } else { ranked[0].label.clone() };
    Ok(CellSummary::Categorical { winner, margin: top - second, counts })
}

/// Pooled summary of every imputed cell of a set, in the set's cell order.
pub fn summarize_set(set: &ImputationSet) -> Result<Vec<PooledCellSummary>, PoolError> {
    set.cells()
        .iter()
        .map(|c| {
            let categories = categories_of(set, &c.column);
            Ok(PooledCellSummary {
                row: c.row,
                column: c.column.clone(),
                m: c.values.len(),
                summary: summarize_cell(&c.values, categories)?,
            })
        })
        .collect()
}

fn categories_of<'a>(set: &'a ImputationSet, column: &str) -> Option<&'a [String]> {
    let base = set.base();
    let spec = base.column(base.column_index(column).ok()?);
    (spec.kind == ColumnKind::Categorical).then_some(spec.categories.as_slice())
}

/// Within, between and total variance of a column mean across the `m`
/// completed datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeanVariance {
    pub column: String,
    pub pooled_mean: f64,
    pub within: f64,
    pub between: f64,
    pub total: f64,
}

pub fn column_mean_variance(set: &ImputationSet, column: &str) -> Option<ColumnMeanVariance> {
    let base = set.base();
    let col = base.column_index(column).ok()?;
    if base.column(col).kind != ColumnKind::Continuous {
        return None;
    }
    let mut estimates = Vec::with_capacity(set.m);
    let mut within = Vec::with_capacity(set.m);
    for i in 0..set.m {
        let values = set.completed(i).observed_numbers(col);
        estimates.push(mean(&values)?);
        within.push(sample_variance(&values).unwrap_or(0.0) / values.len() as f64);
    }
    let pooled_mean = pool_point(&estimates).ok()?;
    let within = mean(&within)?;
    let between = sample_variance(&estimates).unwrap_or(0.0);
    let total = within + (1.0 + 1.0 / set.m as f64) * between;
    Some(ColumnMeanVariance { column: column.to_string(), pooled_mean, within, between, total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub row: usize,
    pub column: String,
    pub original: Value,
    pub a: PooledCellSummary,
    pub b: PooledCellSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub label: String,
    pub provenance: Provenance,
    pub m: usize,
    /// Share of continuous cells whose original value lies in `[p25, p75]`.
    pub iqr_coverage: Option<f64>,
    /// Median over continuous cells of `|median - original|`.
    pub median_abs_error: Option<f64>,
    /// Share of categorical cells whose majority vote equals the original.
    pub winner_accuracy: Option<f64>,
    pub ties: usize,
    pub column_mean_variance: Vec<ColumnMeanVariance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Cells where both methods give the same winner (categorical) or the
    /// same median at one decimal (continuous).
    pub count: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<ReportRow>,
    pub a: MethodMetrics,
    pub b: MethodMetrics,
    pub agreement: Agreement,
}

fn method_label(p: Provenance) -> &'static str {
    match p {
        Provenance::Crowd => "Crowd",
        Provenance::Machine => "MICE",
    }
}

/// Compares two imputation sets cell by cell against the ground truth.
pub fn compare(gt: &GroundTruth, a: &ImputationSet, b: &ImputationSet) -> Result<EvaluationReport, PoolError> {
    let wanted: BTreeSet<(usize, &str)> = gt.entries.iter().map(|e| (e.row, e.column.as_str())).collect();
    for (name, set) in [("first", a), ("second", b)] {
        let have: BTreeSet<(usize, &str)> = set.cells().iter().map(|c| (c.row, c.column.as_str())).collect();
        if have != wanted {
            return Err(PoolError::CoverageMismatch(format!(
                "{name} set imputes {} cells, ground truth has {}",
                have.len(),
                wanted.len()
            )));
        }
    }
    let sa = summarize_set(a)?;
    let sb = summarize_set(b)?;
    let find = |s: &[PooledCellSummary], row: usize, column: &str| {
        s.iter().find(|c| c.row == row && c.column == column).cloned().expect("coverage checked")
    };
    let rows: Vec<ReportRow> = gt
        .entries
        .iter()
        .map(|e| ReportRow {
            row: e.row,
            column: e.column.clone(),
            original: e.value.clone(),
            a: find(&sa, e.row, &e.column),
            b: find(&sb, e.row, &e.column),
        })
        .collect();

    let (mut la, mut lb) = (method_label(a.provenance).to_string(), method_label(b.provenance).to_string());
    if la == lb {
        la.push_str(" (a)");
        lb.push_str(" (b)");
    }
    let columns: Vec<String> = {
        let mut seen = Vec::new();
        for r in &rows {
            if !seen.contains(&r.column) {
                seen.push(r.column.clone());
            }
        }
        seen
    };
    let metrics_a = metrics(&rows, |r| &r.a, a, la, &columns);
    let metrics_b = metrics(&rows, |r| &r.b, b, lb, &columns);
    let count = rows.iter().filter(|r| r.a.summary.agrees_with(&r.b.summary)).count();
    let total = rows.len();
    let agreement = Agreement { count, total, rate: if total == 0 { 1.0 } else { count as f64 / total as f64 } };
    Ok(EvaluationReport { rows, a: metrics_a, b: metrics_b, agreement })
}

fn metrics(
    rows: &[ReportRow],
    pick: impl Fn(&ReportRow) -> &PooledCellSummary,
    set: &ImputationSet,
    label: String,
    columns: &[String],
) -> MethodMetrics {
    let (mut covered, mut n_cont, mut errors) = (0usize, 0usize, Vec::new());
    let (mut correct, mut n_cat, mut ties) = (0usize, 0usize, 0usize);
    for r in rows {
        match (&pick(r).summary, &r.original) {
            (CellSummary::Continuous { median, p25, p75, .. }, Value::Number(x)) => {
                n_cont += 1;
                if p25 <= x && x <= p75 {
                    covered += 1;
                }
                errors.push((median - x).abs());
            }
            (CellSummary::Categorical { winner, .. }, Value::Label(l)) => {
                n_cat += 1;
                if winner == l {
                    correct += 1;
                }
                if winner == TIE {
                    ties += 1;
                }
            }
            _ => {}
        }
    }
    let errors = sorted_copy(&errors);
    MethodMetrics {
        label,
        provenance: set.provenance,
        m: set.m,
        iqr_coverage: (n_cont > 0).then(|| covered as f64 / n_cont as f64),
        median_abs_error: quantile_sorted(&errors, 0.5),
        winner_accuracy: (n_cat > 0).then(|| correct as f64 / n_cat as f64),
        ties,
        column_mean_variance: columns.iter().filter_map(|c| column_mean_variance(set, c)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Md,
    Txt,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "md" => Ok(Self::Md),
            "txt" => Ok(Self::Txt),
            other => Err(format!("unknown format '{other}' (expected json, md or txt)")),
        }
    }
}

impl EvaluationReport {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            ReportFormat::Md => self.render_text(true),
            ReportFormat::Txt => self.render_text(false),
        }
    }

    /// One table per imputed column, then the aggregate metrics.
    fn render_text(&self, markdown: bool) -> String {
        let mut out = String::new();
        let mut columns: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !columns.contains(&r.column.as_str()) {
                columns.push(&r.column);
            }
        }
        for (i, column) in columns.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let rows: Vec<&ReportRow> = self.rows.iter().filter(|r| r.column == *column).collect();
            let vote_order = match &rows[0].a.summary {
                CellSummary::Categorical { counts, .. } => {
                    format!("({})", counts.iter().map(|c| c.label.as_str()).collect::<Vec<_>>().join(" - "))
                }
                CellSummary::Continuous { .. } => String::new(),
            };
            let title = format!("Imputations for {column}");
            if markdown {
                let _ = writeln!(out, "### {title}\n");
            } else {
                let _ = writeln!(out, "{title}");
            }
            let mut table = vec![vec![
                "Original".to_string(),
                format!("{}{vote_order}", self.a.label),
                format!("{}{vote_order}", self.b.label),
            ]];
            for r in rows {
                table.push(vec![r.original.to_string(), r.a.summary.display(), r.b.summary.display()]);
            }
            out.push_str(&layout(&table, markdown));
        }
        out.push('\n');
        if markdown {
            out.push_str("### Summary\n\n");
        } else {
            out.push_str("Summary\n");
        }
        let pct = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{:.1}%", 100.0 * v));
        let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        let mut table = vec![vec![
            "Metric".to_string(),
            self.a.label.clone(),
            self.b.label.clone(),
        ]];
        table.push(vec!["imputations (m)".into(), self.a.m.to_string(), self.b.m.to_string()]);
        table.push(vec!["IQR coverage".into(), pct(self.a.iqr_coverage), pct(self.b.iqr_coverage)]);
        table.push(vec!["median abs. error".into(), num(self.a.median_abs_error), num(self.b.median_abs_error)]);
        table.push(vec!["winner accuracy".into(), pct(self.a.winner_accuracy), pct(self.b.winner_accuracy)]);
        table.push(vec!["ties".into(), self.a.ties.to_string(), self.b.ties.to_string()]);
        out.push_str(&layout(&table, markdown));
        let _ = writeln!(
            out,
            "\nAgreement: {} of {} cells ({})",
            self.agreement.count,
            self.agreement.total,
            pct(Some(self.agreement.rate))
        );
        out
    }
}

fn layout(table: &[Vec<String>], markdown: bool) -> String {
    let widths: Vec<usize> =
        (0..table[0].len()).map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w - s.chars().count()));
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(s, &w)| pad(s, w)).collect();
        if markdown {
            let _ = writeln!(out, "| {} |", cells.join(" | "));
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w.max(3))).collect();
                let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
            }
        } else {
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
    }
    out
}
