//! Descriptive statistics over observed cells, used to write questionnaire
//! introductions and to drive simulated respondents.

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, Dataset, Value};
use crate::stats::{self, pearson, quantile_sorted, sample_sd, sorted_copy};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SummaryError {
    #[error("dataset has no rows")]
    Empty,
    #[error("column '{0}' not present in summary")]
    UnknownColumn(String),
}

/// A continuous predictor with at most this many distinct integer values is
/// stratified by exact value instead of by quartile bins.
pub const MAX_DISCRETE_STRATA: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSummary {
    pub name: String,
    pub n_observed: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    /// Decimal places the observed values are recorded at.
    pub decimals: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub label: String,
    pub count: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSummary {
    pub name: String,
    pub n_observed: usize,
    pub categories: Vec<CategoryShare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnSummary {
    Continuous(ContinuousSummary),
    Categorical(CategoricalSummary),
    /// Column without a single observed cell.
    Unobserved { name: String },
}

impl ColumnSummary {
    pub fn name(&self) -> &str {
        match self {
            ColumnSummary::Continuous(c) => &c.name,
            ColumnSummary::Categorical(c) => &c.name,
            ColumnSummary::Unobserved { name } => name,
        }
    }

    pub fn as_continuous(&self) -> Option<&ContinuousSummary> {
        match self {
            ColumnSummary::Continuous(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&CategoricalSummary> {
        match self {
            ColumnSummary::Categorical(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub label: String,
    pub count: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

/// Mean of `value_column` within each category of `group_column`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedMeans {
    pub value_column: String,
    pub group_column: String,
    pub groups: Vec<GroupStat>,
}

impl GroupedMeans {
    pub fn mean_for(&self, label: &str) -> Option<f64> {
        self.groups.iter().find(|g| g.label == label).and_then(|g| g.mean)
    }
}

/// One bucket of a continuous predictor. Values `x` with `lo < x <= hi`
/// belong here (the first stratum also takes `x == lo`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Means of a continuous `target` within strata of a continuous `predictor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumTable {
    pub target: String,
    pub predictor: String,
    /// Strata are single predictor values rather than ranges.
    pub discrete: bool,
    pub strata: Vec<Stratum>,
}

impl StratumTable {
    /// Stratum for a predictor value. Boundary ties go to the lower stratum;
    /// values outside the observed span go to the nearest end; for discrete
    /// tables the nearest value wins, ties to the lower one.
    pub fn lookup(&self, x: f64) -> Option<&Stratum> {
        let first = self.strata.first()?;
        if self.discrete {
            return self
                .strata
                .iter()
                .min_by(|a, b| (a.lo - x).abs().total_cmp(&(b.lo - x).abs()).then(a.lo.total_cmp(&b.lo)));
        }
        if x <= first.hi {
            return Some(first);
        }
        self.strata.iter().find(|s| x > s.lo && x <= s.hi).or(self.strata.last())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n_rows: usize,
    pub columns: Vec<ColumnSummary>,
    /// Pairwise association, `p x p`, `None` where undefined (constant or
    /// unobserved columns, fewer than two complete pairs). Continuous pairs use
    /// Pearson r, continuous/binary pairs point-biserial r, continuous/multi-
    /// category pairs the signed one-hot correlation of largest magnitude, and
    /// categorical pairs Cramér's V.
    pub associations: Vec<Vec<Option<f64>>>,
    pub grouped_means: Vec<GroupedMeans>,
    pub strata: Vec<StratumTable>,
    /// Columns with zero observed cells, excluded from associations.
    pub flagged: Vec<String>,
}

impl SummaryStats {
    pub fn column_index(&self, name: &str) -> Result<usize, SummaryError> {
        self.columns
            .iter()
            .position(|c| c.name() == name)
            .ok_or_else(|| SummaryError::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSummary> {
        self.columns.iter().find(|c| c.name() == name)
    }

    pub fn continuous(&self, name: &str) -> Option<&ContinuousSummary> {
        self.column(name).and_then(ColumnSummary::as_continuous)
    }

    pub fn categorical(&self, name: &str) -> Option<&CategoricalSummary> {
        self.column(name).and_then(ColumnSummary::as_categorical)
    }

    pub fn association(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.column_index(a).ok()?;
        let j = self.column_index(b).ok()?;
        self.associations[i][j]
    }

    pub fn grouped(&self, value_column: &str, group_column: &str) -> Option<&GroupedMeans> {
        self.grouped_means.iter().find(|g| g.value_column == value_column && g.group_column == group_column)
    }

    pub fn strata_for(&self, target: &str, predictor: &str) -> Option<&StratumTable> {
        self.strata.iter().find(|s| s.target == target && s.predictor == predictor)
    }
}

/// Statistics over observed cells only. Pairwise quantities use the rows where
/// both columns are observed.
pub fn summarize(d: &Dataset) -> Result<SummaryStats, SummaryError> {
    if d.n_rows() == 0 {
        return Err(SummaryError::Empty);
    }
    let p = d.n_cols();
    let mut flagged = Vec::new();
    let columns: Vec<ColumnSummary> = (0..p)
        .map(|c| {
            let summary = column_summary(d, c);
            if let ColumnSummary::Unobserved { name } = &summary {
                flagged.push(name.clone());
            }
            summary
        })
        .collect();

    let mut associations = vec![vec![None; p]; p];
    for i in 0..p {
        for j in i..p {
            let a = if matches!(columns[i], ColumnSummary::Unobserved { .. })
                || matches!(columns[j], ColumnSummary::Unobserved { .. })
            {
                None
            } else if i == j {
                association(d, i, i).map(|_| 1.0)
            } else {
                association(d, i, j)
            };
            associations[i][j] = a;
            associations[j][i] = a;
        }
    }

    let mut grouped_means = Vec::new();
    let mut strata = Vec::new();
    for v in 0..p {
        if d.column(v).kind != ColumnKind::Continuous {
            continue;
        }
        for g in 0..p {
            if g == v {
                continue;
            }
            match d.column(g).kind {
                ColumnKind::Categorical => grouped_means.push(grouped_mean(d, v, g)),
                ColumnKind::Continuous => {
                    if let Some(table) = stratum_table(d, v, g) {
                        strata.push(table);
                    }
                }
                ColumnKind::Id => {}
            }
        }
    }

    Ok(SummaryStats { n_rows: d.n_rows(), columns, associations, grouped_means, strata, flagged })
}

fn column_summary(d: &Dataset, c: usize) -> ColumnSummary {
    let spec = d.column(c);
    match spec.kind {
        ColumnKind::Continuous => {
            let values = d.observed_numbers(c);
            if values.is_empty() {
                return ColumnSummary::Unobserved { name: spec.name.clone() };
            }
            let sorted = sorted_copy(&values);
            let q = |p| quantile_sorted(&sorted, p).expect("non-empty");
            ColumnSummary::Continuous(ContinuousSummary {
                name: spec.name.clone(),
                n_observed: values.len(),
                min: sorted[0],
                max: sorted[sorted.len() - 1],
                mean: stats::mean(&values).expect("non-empty"),
                sd: sample_sd(&values).unwrap_or(0.0),
                median: q(0.5),
                p25: q(0.25),
                p75: q(0.75),
                decimals: stats::decimals_of(&values),
            })
        }
        ColumnKind::Categorical => {
            let observed = d.observed_values(c);
            if observed.is_empty() {
                return ColumnSummary::Unobserved { name: spec.name.clone() };
            }
            let n = observed.len();
            let categories = spec
                .categories
                .iter()
                .map(|label| {
                    let count = observed.iter().filter(|v| v.as_label() == Some(label)).count();
                    CategoryShare { label: label.clone(), count, proportion: count as f64 / n as f64 }
                })
                .collect();
            ColumnSummary::Categorical(CategoricalSummary { name: spec.name.clone(), n_observed: n, categories })
        }
        ColumnKind::Id => ColumnSummary::Unobserved { name: spec.name.clone() },
    }
}

fn complete_pairs(d: &Dataset, a: usize, b: usize) -> Vec<(&Value, &Value)> {
    (0..d.n_rows()).filter_map(|r| Some((d.get(r, a)?, d.get(r, b)?))).collect()
}

fn indicator(values: &[&Value], label: &str) -> Vec<f64> {
    values.iter().map(|v| if v.as_label() == Some(label) { 1.0 } else { 0.0 }).collect()
}

fn association(d: &Dataset, a: usize, b: usize) -> Option<f64> {
    let (ka, kb) = (d.column(a).kind, d.column(b).kind);
    let pairs = complete_pairs(d, a, b);
    match (ka, kb) {
        (ColumnKind::Continuous, ColumnKind::Continuous) => {
            let x: Vec<f64> = pairs.iter().filter_map(|(x, _)| x.as_number()).collect();
            let y: Vec<f64> = pairs.iter().filter_map(|(_, y)| y.as_number()).collect();
            pearson(&x, &y)
        }
        (ColumnKind::Continuous, ColumnKind::Categorical) => continuous_categorical(d, &pairs, b, false),
        (ColumnKind::Categorical, ColumnKind::Continuous) => continuous_categorical(d, &pairs, a, true),
        (ColumnKind::Categorical, ColumnKind::Categorical) => cramers_v(d, &pairs, a, b),
        _ => None,
    }
}

/// Point-biserial r for two categories (indicator of the second label),
/// otherwise the signed one-hot correlation with the largest magnitude.
fn continuous_categorical(d: &Dataset, pairs: &[(&Value, &Value)], cat: usize, cat_first: bool) -> Option<f64> {
    let (xs, labels): (Vec<f64>, Vec<&Value>) = pairs
        .iter()
        .filter_map(|&(p, q)| {
            let (num, lab) = if cat_first { (q, p) } else { (p, q) };
            Some((num.as_number()?, lab))
        })
        .unzip();
    let categories = &d.column(cat).categories;
    if categories.len() == 2 {
        return pearson(&xs, &indicator(&labels, &categories[1]));
    }
    categories
        .iter()
        .filter_map(|label| pearson(&xs, &indicator(&labels, label)))
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
}

fn cramers_v(d: &Dataset, pairs: &[(&Value, &Value)], a: usize, b: usize) -> Option<f64> {
    let ca = &d.column(a).categories;
    let cb = &d.column(b).categories;
    let mut table = vec![vec![0.0f64; cb.len()]; ca.len()];
    for (x, y) in pairs {
        let i = ca.iter().position(|c| Some(c.as_str()) == x.as_label())?;
        let j = cb.iter().position(|c| Some(c.as_str()) == y.as_label())?;
        table[i][j] += 1.0;
    }
    let n = pairs.len() as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..cb.len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let live_rows = rows.iter().filter(|&&v| v > 0.0).count();
    let live_cols = cols.iter().filter(|&&v| v > 0.0).count();
    if live_rows < 2 || live_cols < 2 {
        return None;
    }
    let mut chi2 = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = rows[i] * cols[j] / n;
            if expected > 0.0 {
                chi2 += (obs - expected).powi(2) / expected;
            }
        }
    }
    let k = (live_rows.min(live_cols) - 1) as f64;
    Some((chi2 / (n * k)).sqrt().clamp(0.0, 1.0))
}

fn grouped_mean(d: &Dataset, value: usize, group: usize) -> GroupedMeans {
    let pairs = complete_pairs(d, value, group);
    let groups = d
        .column(group)
        .categories
        .iter()
        .map(|label| {
            let xs: Vec<f64> =
                pairs.iter().filter(|(_, g)| g.as_label() == Some(label)).filter_map(|(x, _)| x.as_number()).collect();
            GroupStat { label: label.clone(), count: xs.len(), mean: stats::mean(&xs), sd: sample_sd(&xs) }
        })
        .collect();
    GroupedMeans { value_column: d.column(value).name.clone(), group_column: d.column(group).name.clone(), groups }
}

fn stratum_table(d: &Dataset, target: usize, predictor: usize) -> Option<StratumTable> {
    let pairs: Vec<(f64, f64)> = complete_pairs(d, predictor, target)
        .into_iter()
        .filter_map(|(x, y)| Some((x.as_number()?, y.as_number()?)))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let overall_sd = sample_sd(&pairs.iter().map(|p| p.1).collect::<Vec<_>>()).unwrap_or(0.0);
    let xs = sorted_copy(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let mut distinct = xs.clone();
    distinct.dedup();

    let discrete = distinct.len() <= MAX_DISCRETE_STRATA && distinct.iter().all(|v| v.fract() == 0.0);
    let bounds: Vec<(f64, f64)> = if discrete {
        distinct.iter().map(|&v| (v, v)).collect()
    } else {
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        let mut cuts: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&p| stats::round_to(quantile_sorted(&xs, p).expect("non-empty"), 1))
            .filter(|&c| c > lo && c < hi)
            .collect();
        cuts.dedup();
        let mut edges = vec![lo];
        edges.extend(cuts);
        edges.push(hi);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    };

    let strata = bounds
        .iter()
        .enumerate()
        .filter_map(|(i, &(lo, hi))| {
            let ys: Vec<f64> = pairs
                .iter()
                .filter(|(x, _)| if discrete { *x == lo } else if i == 0 { *x >= lo && *x <= hi } else { *x > lo && *x <= hi })
                .map(|p| p.1)
                .collect();
            let mean = stats::mean(&ys)?;
            Some(Stratum { lo, hi, count: ys.len(), mean, sd: sample_sd(&ys).unwrap_or(overall_sd) })
        })
        .collect();
    Some(StratumTable {
        target: d.column(target).name.clone(),
        predictor: d.column(predictor).name.clone(),
        discrete,
        strata,
    })
}

/// Other columns ordered by decreasing absolute association with `target`;
/// ties keep schema order. Columns whose association is undefined are left out.
pub fn correlation_rank(s: &SummaryStats, target: &str) -> Result<Vec<(String, f64)>, SummaryError> {
    let t = s.column_index(target)?;
    let mut ranked: Vec<(usize, f64)> = s.associations[t]
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != t)
        .filter_map(|(j, a)| a.map(|a| (j, a.abs())))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().map(|(j, a)| (s.columns[j].name().to_string(), a)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnSpec;

    fn fev_fixture() -> Dataset {
        // FEV values span 0.79..5.79; females average 2.5, males 2.8.
        let rows = [
            (0.79, 5.0, "female"),
            (4.21, 13.0, "female"),
            (2.5, 10.0, "female"),
            (5.79, 17.0, "male"),
            (1.0, 7.0, "male"),
            (1.61, 8.0, "male"),
        ];
        let cols = vec![
            ColumnSpec::continuous("FEV"),
            ColumnSpec::continuous("age"),
            ColumnSpec::categorical("gender", ["female", "male"]),
        ];
        Dataset::new(
            cols,
            rows.iter()
                .map(|&(f, a, g)| vec![Some(Value::Number(f)), Some(Value::Number(a)), Some(Value::from(g))])
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn fev_min_max_and_grouped_means() {
        let s = summarize(&fev_fixture()).unwrap();
        let fev = s.continuous("FEV").unwrap();
        assert_eq!((fev.min, fev.max), (0.79, 5.79));
        let g = s.grouped("FEV", "gender").unwrap();
        assert!((g.mean_for("female").unwrap() - 2.5).abs() < 1e-12);
        assert!((g.mean_for("male").unwrap() - 2.8).abs() < 1e-12);
        let q = fev;
        assert!(q.min <= q.p25 && q.p25 <= q.median && q.median <= q.p75 && q.p75 <= q.max);
    }

    #[test]
    fn constant_column_has_no_associations() {
        let cols = vec![ColumnSpec::continuous("c"), ColumnSpec::continuous("x")];
        let rows = (0..5).map(|i| vec![Some(Value::Number(1.0)), Some(Value::Number(i as f64))]).collect();
        let s = summarize(&Dataset::new(cols, rows).unwrap()).unwrap();
        assert_eq!(s.association("c", "x"), None);
        assert_eq!(s.association("c", "c"), None);
        assert_eq!(correlation_rank(&s, "x").unwrap(), vec![]);
    }

    #[test]
    fn unobserved_column_is_flagged() {
        let cols = vec![ColumnSpec::continuous("a"), ColumnSpec::continuous("b")];
        let rows = (0..4).map(|i| vec![Some(Value::Number(i as f64)), None]).collect();
        let s = summarize(&Dataset::new(cols, rows).unwrap()).unwrap();
        assert_eq!(s.flagged, vec!["b".to_string()]);
        assert_eq!(s.association("a", "b"), None);
    }

    #[test]
    fn empty_dataset_rejected() {
        let d = Dataset::new(vec![ColumnSpec::continuous("a")], vec![]).unwrap();
        assert_eq!(summarize(&d), Err(SummaryError::Empty));
    }

    #[test]
    fn category_proportions_sum_to_one() {
        let s = summarize(&fev_fixture()).unwrap();
        let total: f64 = s.categorical("gender").unwrap().categories.iter().map(|c| c.proportion).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rank_on_exact_linear_relation() {
        // y = 2x exactly, z unrelated
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let zs = [3.0, -1.0, 2.0, 2.0, -1.0, 3.0];
        let cols = vec![ColumnSpec::continuous("y"), ColumnSpec::continuous("x"), ColumnSpec::continuous("z")];
        let rows = xs
            .iter()
            .zip(zs)
            .map(|(&x, z)| vec![Some(Value::Number(2.0 * x)), Some(Value::Number(x)), Some(Value::Number(z))])
            .collect();
        let s = summarize(&Dataset::new(cols, rows).unwrap()).unwrap();
        let rank = correlation_rank(&s, "y").unwrap();
        assert_eq!(rank[0].0, "x");
        assert!((rank[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(rank[1].0, "z");
        // z is orthogonal to x by construction: sum((x - 3.5)(z - 4/3)) = 0
        assert!(rank[1].1 < 1e-12);
        assert_eq!(correlation_rank(&s, "w"), Err(SummaryError::UnknownColumn("w".into())));
    }

    #[test]
    fn single_predictor_rank() {
        let s = summarize(&fev_fixture()).unwrap();
        let sub = Dataset::new(
            vec![ColumnSpec::continuous("FEV"), ColumnSpec::continuous("age")],
            (0..6).map(|r| vec![fev_fixture().get(r, 0).cloned(), fev_fixture().get(r, 1).cloned()]).collect(),
        )
        .unwrap();
        assert_eq!(correlation_rank(&summarize(&sub).unwrap(), "FEV").unwrap().len(), 1);
        assert_eq!(correlation_rank(&s, "FEV").unwrap().len(), 2);
    }

    #[test]
    fn discrete_strata_and_lookup() {
        let s = summarize(&fev_fixture()).unwrap();
        let table = s.strata_for("FEV", "age").unwrap();
        assert!(table.discrete);
        assert_eq!(table.strata.len(), 6);
        assert_eq!(table.lookup(10.0).unwrap().mean, 2.5);
        // 11.5 is equidistant from 10 and 13: lower wins
        assert_eq!(table.lookup(11.5).unwrap().lo, 10.0);
        assert_eq!(table.lookup(100.0).unwrap().lo, 17.0);
    }

    #[test]
    fn binned_strata_ties_go_low() {
        let cols = vec![ColumnSpec::continuous("y"), ColumnSpec::continuous("x")];
        let rows = (0..40)
            .map(|i| {
                let x = 50.0 + i as f64 * 0.5 + 0.25;
                vec![Some(Value::Number(x * 0.1)), Some(Value::Number(x))]
            })
            .collect();
        let s = summarize(&Dataset::new(cols, rows).unwrap()).unwrap();
        let t = s.strata_for("y", "x").unwrap();
        assert!(!t.discrete);
        assert_eq!(t.strata.len(), 4);
        let first = &t.strata[0];
        assert_eq!(t.lookup(first.hi).unwrap(), first);
        assert_eq!(t.lookup(first.hi + 1e-9).unwrap(), &t.strata[1]);
        assert_eq!(t.lookup(-1e9).unwrap(), first);
        let total: usize = t.strata.iter().map(|s| s.count).sum();
        assert_eq!(total, 40);
    }

    #[test]
    fn cramers_v_for_categorical_pairs() {
        let cols = vec![ColumnSpec::categorical("a", ["x", "y"]), ColumnSpec::categorical("b", ["u", "v"])];
        let rows = (0..8)
            .map(|i| {
                let a = if i % 2 == 0 { "x" } else { "y" };
                let b = if i % 2 == 0 { "u" } else { "v" };
                vec![Some(Value::from(a)), Some(Value::from(b))]
            })
            .collect();
        let s = summarize(&Dataset::new(cols, rows).unwrap()).unwrap();
        assert!((s.association("a", "b").unwrap() - 1.0).abs() < 1e-12);
    }
}
