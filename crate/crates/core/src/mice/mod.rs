//! Multiple imputation by chained equations with predictive mean matching.
//!
//! Continuous columns are matched on their predicted value. Categorical
//! columns regress an indicator per non-reference category and are matched
//! on the vector of predicted indicators; the donor's label is copied.

mod pmm;
pub mod regression;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, DataError, Dataset, Value};
use crate::imputation::{CellImputations, ImputationSet, Provenance};
use crate::rng::{split_rng, stage};
use crate::stats::mean;

pub use pmm::{pmm_column, pmm_impute_column, PmmOptions, PmmOutcome};
pub use regression::{bayes_draw, bayes_draw_with, least_squares, Design, PosteriorDraw, RegressionTask, SigmaMode};

pub const DEFAULT_M: usize = 30;
pub const DEFAULT_CYCLES: usize = 10;
pub const DEFAULT_K_D: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum MiceError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("column '{0}' is not continuous")]
    NotContinuous(String),
    #[error("column '{0}' has no observed values")]
    AllMissing(String),
    #[error("column '{column}' has {observed} observed values, need at least {needed}")]
    TooFewObserved { column: String, observed: usize, needed: usize },
    #[error("regression for '{column}' is degenerate: {reason}")]
    Degenerate { column: String, reason: String },
    #[error("predictor '{0}' has missing cells")]
    IncompletePredictor(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiceConfig {
    pub m: usize,
    pub cycles: usize,
    pub k_d: usize,
}

impl Default for MiceConfig {
    fn default() -> Self {
        Self { m: DEFAULT_M, cycles: DEFAULT_CYCLES, k_d: DEFAULT_K_D }
    }
}

/// Per-cycle means of the continuous incomplete columns, plus any design
/// columns dropped as collinear along the way.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MiceTrace {
    pub column_means: Vec<BTreeMap<String, f64>>,
    pub dropped: BTreeSet<String>,
}

/// Incomplete columns in schema order.
pub fn default_order(d: &Dataset) -> Vec<usize> {
    (0..d.n_cols()).filter(|&c| !d.missing_rows_in(c).is_empty()).collect()
}

/// One chain: random observed draws for every missing cell, then `cycles`
/// sweeps re-imputing each column of `order` from all other columns.
pub fn mice_cycle<R: Rng + ?Sized>(
    d: &Dataset,
    order: &[usize],
    cycles: usize,
    k_d: usize,
    rng: &mut R,
) -> Result<(Dataset, MiceTrace), MiceError> {
    let incomplete = default_order(d);
    for &c in &incomplete {
        if !order.contains(&c) {
            return Err(MiceError::Invalid(format!("visit order omits incomplete column '{}'", d.column(c).name)));
        }
        if d.observed_rows_in(c).is_empty() {
            return Err(MiceError::AllMissing(d.column(c).name.clone()));
        }
    }
    let order: Vec<usize> = order.iter().copied().filter(|c| incomplete.contains(c)).collect();
    let mut current = d.clone();
    let mut trace = MiceTrace::default();
    if order.is_empty() {
        return Ok((current, trace));
    }

    let observed: BTreeMap<usize, Vec<usize>> = order.iter().map(|&c| (c, d.observed_rows_in(c))).collect();
    let missing: BTreeMap<usize, Vec<usize>> = order.iter().map(|&c| (c, d.missing_rows_in(c))).collect();
    for &c in &incomplete {
        let obs = &observed[&c];
        for &row in &missing[&c] {
            let donor = obs[rng.random_range(0..obs.len())];
            let v = d.get(donor, c).cloned();
            current.set(row, c, v)?;
        }
    }

    let opts = PmmOptions::new(k_d);
    for _ in 0..cycles {
        for &c in &order {
            let predictors: Vec<usize> = (0..d.n_cols()).filter(|&p| p != c).collect();
            let design = Design::encode(&current, &predictors)?;
            let out = pmm::pmm_with_design(&current, c, design, &observed[&c], &missing[&c], &opts, rng)?;
            trace.dropped.extend(out.dropped.iter().map(|p| format!("{} ~ {p}", d.column(c).name)));
            for (row, v) in out.imputations {
                current.set(row, c, Some(v))?;
            }
        }
        let means = order
            .iter()
            .filter(|&&c| d.column(c).kind == ColumnKind::Continuous)
            .filter_map(|&c| mean(&current.observed_numbers(c)).map(|m| (d.column(c).name.clone(), m)))
            .collect();
        trace.column_means.push(means);
    }
    Ok((current, trace))
}

/// `m` independent chains with per-copy seeds, run in parallel.
pub fn multiple_impute(d: &Dataset, m: usize, cycles: usize, k_d: usize, seed: u64) -> Result<ImputationSet, MiceError> {
    Ok(multiple_impute_traced(d, &MiceConfig { m, cycles, k_d }, seed)?.0)
}

pub fn multiple_impute_traced(
    d: &Dataset,
    cfg: &MiceConfig,
    seed: u64,
) -> Result<(ImputationSet, Vec<MiceTrace>), MiceError> {
    if cfg.m == 0 || cfg.k_d == 0 {
        return Err(MiceError::Invalid("m and k_d must be at least 1".into()));
    }
    let order = default_order(d);
    let runs = (0..cfg.m)
        .into_par_iter()
        .map(|i| mice_cycle(d, &order, cfg.cycles, cfg.k_d, &mut split_rng(seed, stage::MICE, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let dropped: BTreeSet<&String> = runs.iter().flat_map(|(_, t)| &t.dropped).collect();
    for p in dropped {
        log::warn!("collinear predictor dropped: {p}");
    }
    let cells = d
        .missing_cells()
        .into_iter()
        .map(|(row, col)| CellImputations {
            row,
            column: d.column(col).name.clone(),
            values: runs
                .iter()
                .map(|(completed, _)| completed.get(row, col).cloned().expect("chains fill every cell"))
                .collect::<Vec<Value>>(),
        })
        .collect();
    let set = ImputationSet::new(Provenance::Machine, d.clone(), cells, cfg.m)?.with_params(
        Some(seed),
        Some(cfg.cycles),
        Some(cfg.k_d),
    );
    Ok((set, runs.into_iter().map(|(_, t)| t).collect()))
}
