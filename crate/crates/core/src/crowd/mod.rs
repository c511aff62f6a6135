//! Simulated crowds: personas answer questionnaires the way the calibration
//! runs saw real workers answer them.

mod persona;
pub mod scenario;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataError, Dataset, Value};
use crate::questionnaire::{AnswerConstraint, Question, Questionnaire};
use crate::rng::{fnv1a, stream_rng};
use crate::stats::round_to;
use crate::summary::SummaryStats;

pub use persona::{MixEntry, Persona, PersonaConfig, PersonaMix};

/// Attempts allowed per accepted judgment before a question is abandoned.
pub const RESOLICIT_FACTOR: usize = 10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CrowdError {
    #[error("invalid persona: {0}")]
    InvalidPersona(String),
    #[error("invalid persona mix: {0}")]
    InvalidMix(String),
    #[error("question '{question}' collected {accepted} of {k} accepted judgments within {attempts} attempts")]
    CapExceeded { question: String, accepted: usize, k: usize, attempts: usize },
    #[error("target column '{0}' missing from summary statistics")]
    MissingStats(String),
    #[error("malformed judgment log line {line}: {reason}")]
    Log { line: usize, reason: String },
}

/// One worker's answer to one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub question_id: String,
    pub worker_id: String,
    pub raw_answer: String,
    pub accepted: bool,
    /// Milliseconds since the Unix epoch for live submissions; attempt
    /// sequence number for simulated ones.
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Judgments per question id, accepted and rejected, in arrival order.
/// Accepted judgments of one question come from pairwise distinct workers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JudgmentSet {
    pub by_question: BTreeMap<String, Vec<Judgment>>,
}

impl JudgmentSet {
    pub fn push(&mut self, j: Judgment) {
        self.by_question.entry(j.question_id.clone()).or_default().push(j);
    }

    pub fn accepted<'a>(&'a self, question_id: &str) -> impl Iterator<Item = &'a Judgment> + 'a {
        self.by_question.get(question_id).into_iter().flatten().filter(|j| j.accepted)
    }

    pub fn accepted_count(&self, question_id: &str) -> usize {
        self.accepted(question_id).count()
    }

    pub fn total_accepted(&self) -> usize {
        self.by_question.values().flatten().filter(|j| j.accepted).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Judgment> {
        self.by_question.values().flatten()
    }

    pub fn merge(&mut self, other: JudgmentSet) {
        for (q, js) in other.by_question {
            self.by_question.entry(q).or_default().extend(js);
        }
    }

    /// One JSON object per line, ordered by question id then arrival.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for j in self.iter() {
            serde_json::to_writer(&mut w, j)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, CrowdError> {
        let mut set = JudgmentSet::default();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| CrowdError::Log { line: i + 1, reason: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let j: Judgment =
                serde_json::from_str(&line).map_err(|e| CrowdError::Log { line: i + 1, reason: e.to_string() })?;
            set.push(j);
        }
        Ok(set)
    }
}

/// The answer a persona gives to `q`, before any validation.
///
/// Attentive draws (probability `attention`):
/// * continuous targets: normal around the mean of the best-associated
///   context stratum (or category group, or the overall mean when no context
///   is usable), sd = that stratum's sd times `noise_sd_scale`, plus `shift`;
/// * categorical targets: category proportions, conditioned on continuous
///   context through a linear discriminant on the published group means and
///   correlations, then tilted by the persona's log-odds bias.
///
/// Inattentive draws: uniform over `[min - span, max + span]` for continuous
/// targets, bias-tilted uniform over the choices for categorical ones.
/// Continuous answers are rounded to the column's recorded precision and,
/// for constraint-respecting personas, clamped into the allowed range.
pub fn answer<R: Rng + ?Sized>(
    p: &Persona,
    q: &Question,
    stats: &SummaryStats,
    rng: &mut R,
) -> Result<Value, CrowdError> {
    let target = &q.target_cell.column;
    let attentive = rng.random::<f64>() < p.attention;
    match &q.constraint {
        AnswerConstraint::NumericRange { lo, hi, .. } => {
            let summary = stats.continuous(target).ok_or_else(|| CrowdError::MissingStats(target.clone()))?;
            let raw = if attentive {
                let (center, sd) = conditional_estimate(q, stats);
                let z: f64 = StandardNormal.sample(rng);
                center + p.shift + sd * p.noise_sd_scale * z
            } else {
                let span = summary.max - summary.min;
                rng.random_range(0.0..=1.0) * (3.0 * span) + (summary.min - span)
            };
            let mut value = round_to(raw, summary.decimals);
            if p.respects_constraints {
                value = value.clamp(*lo, *hi);
            }
            Ok(Value::Number(value))
        }
        AnswerConstraint::CategoricalChoice { choices, .. } => {
            let base: Vec<f64> = if attentive {
                category_log_weights(q, stats, choices)
            } else {
                vec![0.0; choices.len()]
            };
            let logits: Vec<f64> = base.iter().zip(choices).map(|(b, c)| b + p.bias_for(c)).collect();
            let probs = softmax(&logits);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (choice, pr) in choices.iter().zip(&probs) {
                acc += pr;
                if u < acc {
                    return Ok(Value::Label(choice.clone()));
                }
            }
            Ok(Value::Label(choices[choices.len() - 1].clone()))
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean and sd a reader of the intro would expect for a continuous target
/// given the question's context.
fn conditional_estimate(q: &Question, stats: &SummaryStats) -> (f64, f64) {
    let target = &q.target_cell.column;
    let overall = stats.continuous(target).expect("checked by caller");
    let mut best: Option<(f64, f64, f64)> = None;
    for field in &q.context_fields {
        let strength = match stats.association(target, &field.column) {
            Some(a) => a.abs(),
            None => continue,
        };
        let estimate = match &field.value {
            Value::Number(x) => stats
                .strata_for(target, &field.column)
                .and_then(|t| t.lookup(*x))
                .map(|s| (s.mean, s.sd)),
            Value::Label(l) => stats
                .grouped(target, &field.column)
                .and_then(|g| g.groups.iter().find(|grp| &grp.label == l))
                .and_then(|grp| Some((grp.mean?, grp.sd.unwrap_or(overall.sd)))),
        };
        if let Some((m, s)) = estimate {
            if best.is_none_or(|b| strength > b.0) {
                best = Some((strength, m, s));
            }
        }
    }
    best.map_or((overall.mean, overall.sd), |(_, m, s)| (m, s))
}

/// Log-weights per choice: log proportion plus a linear discriminant over the
/// continuous context fields for which group means are published.
fn category_log_weights(q: &Question, stats: &SummaryStats, choices: &[String]) -> Vec<f64> {
    let target = &q.target_cell.column;
    let proportions: Vec<f64> = match stats.categorical(target) {
        Some(c) => choices
            .iter()
            .map(|ch| c.categories.iter().find(|s| &s.label == ch).map_or(0.0, |s| s.proportion))
            .collect(),
        None => vec![1.0 / choices.len() as f64; choices.len()],
    };
    let mut logw: Vec<f64> = proportions.iter().map(|p| p.max(1e-9).ln()).collect();

    // continuous context with group means for every choice and a usable sd
    let usable: Vec<(&str, f64, Vec<f64>, f64)> = q
        .context_fields
        .iter()
        .filter_map(|f| {
            let x = f.value.as_number()?;
            let g = stats.grouped(&f.column, target)?;
            let means = choices.iter().map(|ch| g.mean_for(ch)).collect::<Option<Vec<f64>>>()?;
            let sd = stats.continuous(&f.column)?.sd;
            (sd > 0.0).then_some((f.column.as_str(), x, means, sd))
        })
        .collect();
    if usable.is_empty() {
        return logw;
    }
    let n = usable.len();
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let r = if i == j { 1.0 } else { stats.association(usable[i].0, usable[j].0).unwrap_or(0.0) };
        r * usable[i].3 * usable[j].3 + if i == j { 1e-9 * usable[i].3 * usable[i].3 } else { 0.0 }
    });
    let Some(inv) = cov.try_inverse() else {
        return logw;
    };
    let x = DVector::from_iterator(n, usable.iter().map(|u| u.1));
    for (k, w) in logw.iter_mut().enumerate() {
        let mu = DVector::from_iterator(n, usable.iter().map(|u| u.2[k]));
        let a = &inv * &mu;
        *w += x.dot(&a) - 0.5 * mu.dot(&a);
    }
    logw
}

/// Collects exactly `k` accepted judgments per question. Each attempt comes
/// from a fresh worker whose persona is drawn from `mix`; answers failing the
/// question's constraint are kept as rejected and re-solicited, up to
/// `RESOLICIT_FACTOR * k` attempts per question.
pub fn run_crowd(
    qn: &Questionnaire,
    mix: &PersonaMix,
    stats: &SummaryStats,
    seed: u64,
) -> Result<JudgmentSet, CrowdError> {
    let k = qn.required_judgments_per_question;
    let per_question: Vec<Result<Vec<Judgment>, CrowdError>> =
        qn.questions.par_iter().map(|q| crowd_question(q, k, mix, stats, seed)).collect();
    let mut set = JudgmentSet::default();
    for judgments in per_question {
        for j in judgments? {
            set.push(j);
        }
    }
    Ok(set)
}

fn crowd_question(
    q: &Question,
    k: usize,
    mix: &PersonaMix,
    stats: &SummaryStats,
    seed: u64,
) -> Result<Vec<Judgment>, CrowdError> {
    let mut rng = stream_rng(seed, fnv1a(&q.id));
    let cap = RESOLICIT_FACTOR * k;
    let mut out = Vec::with_capacity(k);
    let mut accepted = 0;
    for attempt in 0..cap {
        if accepted == k {
            break;
        }
        let persona = mix.pick(rng.random());
        let value = answer(persona, q, stats, &mut rng)?;
        let raw_answer = value.to_string();
        let verdict = q.constraint.check(&raw_answer);
        accepted += usize::from(verdict.is_ok());
        out.push(Judgment {
            question_id: q.id.clone(),
            worker_id: format!("sim-{}-{attempt:05}", persona.name),
            raw_answer,
            accepted: verdict.is_ok(),
            timestamp: attempt as u64,
            reason: verdict.err(),
        });
    }
    if accepted < k {
        return Err(CrowdError::CapExceeded { question: q.id.clone(), accepted, k, attempts: cap });
    }
    Ok(out)
}

/// Shifts every observed value of a continuous column by `delta`, clamping
/// into the column's valid range.
pub fn perturb_scenario(d: &Dataset, column: &str, delta: f64) -> Result<Dataset, DataError> {
    let col = d.column_index(column)?;
    let spec = d.column(col).clone();
    if !spec.is_continuous() {
        return Err(DataError::NotContinuous(column.to_string()));
    }
    let mut out = d.clone();
    for row in d.observed_rows_in(col) {
        let x = d.get(row, col).and_then(Value::as_number).expect("continuous cell") + delta;
        let x = match spec.valid_range {
            Some((lo, hi)) => x.clamp(lo, hi),
            None => x,
        };
        out.set(row, col, Some(Value::Number(x)))?;
    }
    Ok(out)
}
