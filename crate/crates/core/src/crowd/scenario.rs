//! Canned survey setups for calibrating personas.

use crate::dataset::{ampute, DataError, Dataset, GroundTruth, Value};
use crate::questionnaire::{
    batch, questions_for_column, render_question_with_context, AnswerConstraint, Intro, Questionnaire,
    QuestionnaireError, Templates,
};
use crate::rng::derive_seed;
use crate::summary::{summarize, SummaryError, SummaryStats};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Questionnaire(#[from] QuestionnaireError),
}

/// Context-free questions about one continuous and one categorical column,
/// asked for the same `n` rows. Mirrors a first test job where respondents
/// only see the ranges and shares of the two attributes.
#[derive(Debug, Clone)]
pub struct CalibrationScenario {
    pub dataset: Dataset,
    pub truth: GroundTruth,
    pub stats: SummaryStats,
    pub continuous: Questionnaire,
    pub categorical: Questionnaire,
}

pub fn calibration(
    d: &Dataset,
    continuous: &str,
    categorical: &str,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<CalibrationScenario, ScenarioError> {
    let (mut amputed, mut truth) = ampute(d, continuous, n, seed)?;
    let cat = d.column_index(categorical)?;
    for entry in &truth.entries.clone() {
        let original = amputed.get(entry.row, cat).cloned();
        if let Some(value) = original {
            amputed.set(entry.row, cat, None)?;
            truth.entries.push(crate::dataset::GroundTruthEntry { row: entry.row, column: categorical.into(), value });
        }
    }
    let stats = summarize(&amputed)?;
    let intro = Intro { text: calibration_intro(&stats, continuous, categorical), prior_blurb: None, plots: vec![] };

    let templates = Templates::default();
    let build = |column: &str, prefix: &str| -> Result<Questionnaire, ScenarioError> {
        let col = amputed.column_index(column)?;
        let constraint = AnswerConstraint::for_column(amputed.column(col), Some(&stats))?;
        let questions = amputed
            .missing_rows_in(col)
            .into_iter()
            .map(|row| render_question_with_context(&amputed, (row, col), constraint.clone(), &templates, &[]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(batch(questions, &intro, k, prefix)?.remove(0))
    };
    let continuous_qn = build(continuous, "calibration-continuous")?;
    let categorical_qn = build(categorical, "calibration-categorical")?;
    Ok(CalibrationScenario { dataset: amputed, truth, stats, continuous: continuous_qn, categorical: categorical_qn })
}

fn calibration_intro(stats: &SummaryStats, continuous: &str, categorical: &str) -> String {
    let mut text = String::from("In a data set, we have subjects");
    if let Some(c) = stats.continuous(continuous) {
        text.push_str(&format!(
            " with {continuous} from {} to {}, with half over {}",
            c.min,
            c.max,
            crate::stats::round_to(c.median, c.decimals)
        ));
    }
    text.push('.');
    if let Some(c) = stats.categorical(categorical) {
        let parts: Vec<String> =
            c.categories.iter().map(|s| format!("{:.0}% {}", s.proportion * 100.0, s.label)).collect();
        text.push_str(&format!(" We also have about {}.", parts.join(" and ")));
    }
    text.push_str(&format!(
        " We have a case that has {continuous} and {categorical} missing. Based on the information provided please \
         fill in the values you think are most probable."
    ));
    text
}

/// The same categorical-imputation survey asked twice: once on the original
/// rows and once after shifting one continuous context column. Question ids
/// match across the two questionnaires.
#[derive(Debug, Clone)]
pub struct PerturbedScenario {
    pub stats: SummaryStats,
    pub truth: GroundTruth,
    pub baseline: Questionnaire,
    pub perturbed: Questionnaire,
}

pub fn perturbed(
    d: &Dataset,
    target: &str,
    perturb_column: &str,
    delta: f64,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<PerturbedScenario, ScenarioError> {
    let (amputed, truth) = ampute(d, target, n, derive_seed(seed, 0, 0))?;
    let stats = summarize(&amputed)?;
    let intro = Intro::default();
    let templates = Templates::default();
    let baseline = questions_for_column(&amputed, target, Some(&stats), &templates)?;
    let shifted = super::perturb_scenario(&amputed, perturb_column, delta)?;
    let perturbed = questions_for_column(&shifted, target, Some(&stats), &templates)?;
    Ok(PerturbedScenario {
        stats,
        truth,
        baseline: batch(baseline, &intro, k, "baseline")?.remove(0),
        perturbed: batch(perturbed, &intro, k, "perturbed")?.remove(0),
    })
}

/// Share of accepted answers equal to `label` across a questionnaire.
pub fn label_share(set: &super::JudgmentSet, qn: &Questionnaire, label: &str) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for q in &qn.questions {
        for j in set.accepted(&q.id) {
            total += 1;
            if q.constraint.check(&j.raw_answer) == Ok(Value::from(label)) {
                hits += 1;
            }
        }
    }
    hits as f64 / total.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn calibration_questions_have_no_context() {
        let d = synth::fev_like(400, 1);
        let sc = calibration(&d, "age", "gender", 10, 30, 3).unwrap();
        assert_eq!(sc.truth.len(), 20);
        assert_eq!(sc.continuous.questions.len(), 10);
        assert_eq!(sc.categorical.questions.len(), 10);
        assert!(sc.continuous.questions.iter().all(|q| q.context_fields.is_empty()));
        assert_eq!(sc.continuous.required_judgments(), 300);
        assert!(sc.continuous.intro_text.contains("with age from 3 to 1"), "{}", sc.continuous.intro_text);
    }

    #[test]
    fn perturbed_scenario_keeps_question_ids() {
        let d = synth::fev_like(400, 1);
        let sc = perturbed(&d, "gender", "age", -3.0, 10, 30, 5).unwrap();
        let ids = |qn: &Questionnaire| qn.questions.iter().map(|q| q.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&sc.baseline), ids(&sc.perturbed));
        for (a, b) in sc.baseline.questions.iter().zip(&sc.perturbed.questions) {
            assert_eq!(a.context_value("height"), b.context_value("height"));
        }
    }
}
