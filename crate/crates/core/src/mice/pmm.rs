//! Predictive mean matching.

use nalgebra::DMatrix;
use rand::Rng;

use super::regression::{bayes_draw_with, numeric_targets, Design, PosteriorDraw, RegressionTask, SigmaMode};
use super::MiceError;
use crate::dataset::{ColumnKind, Dataset, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmmOptions {
    pub k_d: usize,
    pub sigma: SigmaMode,
}

impl PmmOptions {
    pub fn new(k_d: usize) -> Self {
        Self { k_d, sigma: SigmaMode::Draw }
    }
}

#[derive(Debug, Clone)]
pub struct PmmOutcome {
    /// `(row, imputed value)` for each missing row, in row order.
    pub imputations: Vec<(usize, Value)>,
    /// Donor row chosen for each missing row.
    pub donors: Vec<usize>,
    /// Predicted values for all rows (first indicator for categorical targets).
    pub predictions: Vec<f64>,
    pub draws: Vec<PosteriorDraw>,
    pub dropped: Vec<String>,
}

/// Imputes the missing cells of continuous column `col`, regressing on the
/// other columns that have no missing cells.
pub fn pmm_impute_column<R: Rng + ?Sized>(
    d: &Dataset,
    col: usize,
    k_d: usize,
    rng: &mut R,
) -> Result<Vec<(usize, Value)>, MiceError> {
    Ok(pmm_column(d, col, &PmmOptions::new(k_d), rng)?.imputations)
}

pub fn pmm_column<R: Rng + ?Sized>(
    d: &Dataset,
    col: usize,
    opts: &PmmOptions,
    rng: &mut R,
) -> Result<PmmOutcome, MiceError> {
    let spec = d.column(col);
    if spec.kind != ColumnKind::Continuous {
        return Err(MiceError::NotContinuous(spec.name.clone()));
    }
    let predictors: Vec<usize> = (0..d.n_cols()).filter(|&c| c != col && d.missing_rows_in(c).is_empty()).collect();
    let design = Design::encode(d, &predictors)?;
    let observed = d.observed_rows_in(col);
    let missing = d.missing_rows_in(col);
    pmm_with_design(d, col, design, &observed, &missing, opts, rng)
}

/// PMM for `col` given a complete design over all rows. `observed` rows supply
/// both the fit and the donors; their values are read from `d`.
pub(crate) fn pmm_with_design<R: Rng + ?Sized>(
    d: &Dataset,
    col: usize,
    design: Design,
    observed: &[usize],
    missing: &[usize],
    opts: &PmmOptions,
    rng: &mut R,
) -> Result<PmmOutcome, MiceError> {
    let spec = d.column(col);
    if opts.k_d == 0 {
        return Err(MiceError::Invalid("donor pool size must be at least 1".into()));
    }
    if observed.len() < opts.k_d {
        return Err(MiceError::TooFewObserved { column: spec.name.clone(), observed: observed.len(), needed: opts.k_d });
    }
    // One target per matching dimension: the value itself, or indicators of
    // every category except the first.
    let targets: Vec<Vec<f64>> = match spec.kind {
        ColumnKind::Continuous => vec![numeric_targets(d, col, observed)],
        ColumnKind::Categorical => spec
            .categories
            .iter()
            .skip(1)
            .map(|label| {
                observed
                    .iter()
                    .map(|&r| f64::from(u8::from(d.get(r, col).and_then(Value::as_label) == Some(label.as_str()))))
                    .collect()
            })
            .collect(),
        ColumnKind::Id => return Err(MiceError::NotContinuous(spec.name.clone())),
    };
    let mut predicted = DMatrix::<f64>::zeros(d.n_rows(), targets.len());
    let mut draws = Vec::with_capacity(targets.len());
    let mut dropped = Vec::new();
    for (t, y) in targets.into_iter().enumerate() {
        let task = RegressionTask::new(spec.name.clone(), design.clone(), observed.to_vec(), y)?;
        let draw = bayes_draw_with(&task, opts.sigma, rng)?;
        predicted.set_column(t, &(&task.design.matrix * &draw.beta_star));
        if t == 0 {
            dropped = task.dropped.clone();
        }
        draws.push(draw);
    }

    let mut imputations = Vec::with_capacity(missing.len());
    let mut donors = Vec::with_capacity(missing.len());
    let mut pool: Vec<(f64, usize)> = Vec::with_capacity(observed.len());
    for &row in missing {
        pool.clear();
        pool.extend(observed.iter().map(|&o| {
            let dist = (0..predicted.ncols()).map(|t| (predicted[(o, t)] - predicted[(row, t)]).powi(2)).sum::<f64>();
            (dist, o)
        }));
        pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let donor = pool[rng.random_range(0..opts.k_d)].1;
        let value = d.get(donor, col).cloned().expect("donor rows are observed");
        donors.push(donor);
        imputations.push((row, value));
    }
    Ok(PmmOutcome {
        imputations,
        donors,
        predictions: if predicted.ncols() > 0 { predicted.column(0).iter().copied().collect() } else { vec![] },
        draws,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnSpec;
    use crate::rng::stream_rng;

    fn toy() -> Dataset {
        let schema = vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")];
        let rows = [(1.0, Some(10.0)), (2.0, Some(20.0)), (3.0, Some(30.0)), (2.1, None)]
            .into_iter()
            .map(|(x, y)| vec![Some(Value::Number(x)), y.map(Value::Number)])
            .collect();
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn nearest_prediction_donor_with_forced_sigma() {
        let opts = PmmOptions { k_d: 1, sigma: SigmaMode::Fixed(0.0) };
        let out = pmm_column(&toy(), 1, &opts, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(out.imputations, vec![(3, Value::Number(20.0))]);
        assert!((out.predictions[3] - 21.0).abs() < 1e-9);
    }

    #[test]
    fn full_pool_draws_every_observed_value() {
        let opts = PmmOptions::new(3);
        let mut seen = std::collections::BTreeSet::new();
        let mut rng = stream_rng(5, 0);
        for _ in 0..200 {
            let out = pmm_column(&toy(), 1, &opts, &mut rng).unwrap();
            seen.insert(out.imputations[0].1.as_number().unwrap() as i64);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![10, 20, 30]);
    }

    #[test]
    fn too_few_donors_and_categorical_targets_error() {
        assert!(matches!(
            pmm_impute_column(&toy(), 1, 4, &mut stream_rng(0, 0)),
            Err(MiceError::TooFewObserved { needed: 4, .. })
        ));
        let d = crate::synth::fev_like(20, 1);
        assert!(matches!(pmm_impute_column(&d, 3, 2, &mut stream_rng(0, 0)), Err(MiceError::NotContinuous(_))));
    }
}
