//! Survey questionnaires built from rows with missing cells.

mod intro;
pub mod template;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, ColumnSpec, Dataset, Value};
use crate::summary::SummaryStats;

pub use intro::{build_intro, BlurbPlacement, BoxGroup, Intro, IntroOptions, PlotKind, PlotPayload, PlotSpec};
pub use template::Templates;

/// Hard cap on questions per questionnaire; longer surveys fatigue respondents.
pub const MAX_QUESTIONS: usize = 10;
pub const DEFAULT_TOP_M: usize = 3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QuestionnaireError {
    #[error("invalid constraint: {0}")]
    Constraint(String),
    #[error("cell (row {row}, column '{column}') is not missing")]
    NotMissing { row: usize, column: String },
    #[error("template refers to missing context field '{0}' without an omission marker")]
    MissingContext(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("target '{0}' has no computable associations")]
    NoAssociations(String),
    #[error("top_m must be at least 1")]
    InvalidTopM,
    #[error("judgments per question must be at least 1")]
    InvalidK,
    #[error("no questions to batch")]
    NoQuestions,
    #[error("constraint kind does not match column '{0}'")]
    ConstraintMismatch(String),
}

/// Format a number the shortest way that reads back to the same value.
pub fn fmt_number(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswerConstraint {
    NumericRange { lo: f64, hi: f64, hint_text: String },
    CategoricalChoice { choices: Vec<String>, hint_text: String },
}

impl AnswerConstraint {
    pub fn numeric(lo: f64, hi: f64) -> Result<Self, QuestionnaireError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(QuestionnaireError::Constraint(format!("numeric range needs lo < hi, got [{lo}, {hi}]")));
        }
        let hint_text = format!("valid range {}–{}", fmt_number(lo), fmt_number(hi));
        Ok(Self::NumericRange { lo, hi, hint_text })
    }

    pub fn choice<S: Into<String>>(choices: impl IntoIterator<Item = S>) -> Result<Self, QuestionnaireError> {
        let choices: Vec<String> = choices.into_iter().map(Into::into).collect();
        if choices.len() < 2 {
            return Err(QuestionnaireError::Constraint("categorical choice needs at least two choices".into()));
        }
        let hint_text = format!("choose one of: {}", choices.join(", "));
        Ok(Self::CategoricalChoice { choices, hint_text })
    }

    /// The column's valid range when declared, else its observed span; the
    /// category list for categorical columns.
    pub fn for_column(spec: &ColumnSpec, stats: Option<&SummaryStats>) -> Result<Self, QuestionnaireError> {
        match spec.kind {
            ColumnKind::Categorical => Self::choice(spec.categories.iter().cloned()),
            ColumnKind::Continuous => {
                let (lo, hi) = match spec.valid_range {
                    Some(r) => r,
                    None => {
                        let c = stats.and_then(|s| s.continuous(&spec.name)).ok_or_else(|| {
                            QuestionnaireError::Constraint(format!("no valid_range or observed span for '{}'", spec.name))
                        })?;
                        (c.min, c.max)
                    }
                };
                Self::numeric(lo, hi)
            }
            ColumnKind::Id => Err(QuestionnaireError::ConstraintMismatch(spec.name.clone())),
        }
    }

    pub fn hint_text(&self) -> &str {
        match self {
            Self::NumericRange { hint_text, .. } | Self::CategoricalChoice { hint_text, .. } => hint_text,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Self::CategoricalChoice { .. })
    }

    /// Parses and checks a raw answer. Numbers must parse and fall in
    /// `[lo, hi]` inclusive; labels must match a choice (surrounding
    /// whitespace and letter case are ignored, the canonical label is
    /// returned). The error is a human-readable reason.
    pub fn check(&self, raw: &str) -> Result<Value, String> {
        let text = raw.trim();
        match self {
            Self::NumericRange { lo, hi, .. } => {
                let x: f64 = text.parse().map_err(|_| format!("not a number: {text:?}"))?;
                if !x.is_finite() {
                    return Err(format!("not a finite number: {text:?}"));
                }
                if x < *lo || x > *hi {
                    return Err(format!("out of range {}–{}", fmt_number(*lo), fmt_number(*hi)));
                }
                Ok(Value::Number(x))
            }
            Self::CategoricalChoice { choices, .. } => choices
                .iter()
                .find(|c| c.eq_ignore_ascii_case(text))
                .map(|c| Value::Label(c.clone()))
                .ok_or_else(|| format!("must be one of: {}", choices.join(", "))),
        }
    }

    pub fn admits(&self, value: &Value) -> bool {
        match (self, value) {
            (Self::NumericRange { lo, hi, .. }, Value::Number(x)) => *x >= *lo && *x <= *hi,
            (Self::CategoricalChoice { choices, .. }, Value::Label(l)) => choices.contains(l),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellRef {
    pub row: usize,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextField {
    pub column: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub target_cell: CellRef,
    pub prompt_text: String,
    pub constraint: AnswerConstraint,
    pub context_fields: Vec<ContextField>,
}

impl Question {
    pub fn context_value(&self, column: &str) -> Option<&Value> {
        self.context_fields.iter().find(|f| f.column == column).map(|f| &f.value)
    }
}

pub fn question_id(row: usize, column: &str) -> String {
    format!("r{row}-{column}")
}

/// "name is value unit" for one observed context cell.
fn context_phrase(spec: &ColumnSpec, value: &Value) -> String {
    match &spec.unit {
        Some(unit) if spec.is_continuous() => format!("{} is {} {unit}", spec.name, value),
        _ => format!("{} is {}", spec.name, value),
    }
}

/// Renders one question for a missing cell, using every other observed cell
/// of the row as context.
pub fn render_question(
    d: &Dataset,
    cell: (usize, usize),
    constraint: AnswerConstraint,
    templates: &Templates,
) -> Result<Question, QuestionnaireError> {
    let context: Vec<usize> = (0..d.n_cols()).filter(|&c| c != cell.1).collect();
    render_question_with_context(d, cell, constraint, templates, &context)
}

/// Like [`render_question`] but restricted to the given context columns.
/// Context columns that are missing in the row are left out of the prompt.
pub fn render_question_with_context(
    d: &Dataset,
    (row, col): (usize, usize),
    constraint: AnswerConstraint,
    templates: &Templates,
    context_columns: &[usize],
) -> Result<Question, QuestionnaireError> {
    let spec = d.column(col);
    if !d.is_missing(row, col) {
        return Err(QuestionnaireError::NotMissing { row, column: spec.name.clone() });
    }
    if spec.is_categorical() != constraint.is_categorical() {
        return Err(QuestionnaireError::ConstraintMismatch(spec.name.clone()));
    }
    if let AnswerConstraint::CategoricalChoice { choices, .. } = &constraint {
        if choices != &spec.categories {
            return Err(QuestionnaireError::ConstraintMismatch(spec.name.clone()));
        }
    }

    let context_fields: Vec<ContextField> = context_columns
        .iter()
        .filter(|&&c| c != col)
        .filter_map(|&c| d.get(row, c).map(|v| ContextField { column: d.column(c).name.clone(), value: v.clone() }))
        .collect();
    let phrases: Vec<String> = context_fields
        .iter()
        .map(|f| context_phrase(d.column(d.column_index(&f.column).expect("own column")), &f.value))
        .collect();

    let mut builtins = BTreeMap::new();
    builtins.insert("target", spec.name.clone());
    builtins.insert("context", template::join_phrases(&phrases));
    builtins.insert("row", d.row_label(row));
    match &constraint {
        AnswerConstraint::NumericRange { lo, hi, .. } => {
            builtins.insert("range", format!("{}–{}", fmt_number(*lo), fmt_number(*hi)));
        }
        AnswerConstraint::CategoricalChoice { choices, .. } => {
            builtins.insert("choices", choices.join(", "));
        }
    }
    let columns = (0..d.n_cols())
        .filter(|&c| c != col)
        .map(|c| (d.column(c).name.as_str(), d.get(row, c).map(Value::to_string)))
        .collect();
    let slots = template::Slots { builtins, columns };
    let prompt_text = template::render(templates.pick(spec.is_categorical(), !context_fields.is_empty()), &slots)?;

    Ok(Question {
        id: question_id(row, &spec.name),
        target_cell: CellRef { row, column: spec.name.clone() },
        prompt_text,
        constraint,
        context_fields,
    })
}

/// One question per missing cell of `target`, each with the column's default
/// constraint.
pub fn questions_for_column(
    d: &Dataset,
    target: &str,
    stats: Option<&SummaryStats>,
    templates: &Templates,
) -> Result<Vec<Question>, QuestionnaireError> {
    let col = d.column_index(target).map_err(|_| QuestionnaireError::UnknownColumn(target.to_string()))?;
    let constraint = AnswerConstraint::for_column(d.column(col), stats)?;
    d.missing_rows_in(col)
        .into_iter()
        .map(|row| render_question(d, (row, col), constraint.clone(), templates))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub id: String,
    #[serde(rename = "intro")]
    pub intro_text: String,
    pub prior_blurb: Option<String>,
    pub plots: Vec<PlotSpec>,
    pub questions: Vec<Question>,
    #[serde(rename = "k")]
    pub required_judgments_per_question: usize,
}

impl Questionnaire {
    pub fn required_judgments(&self) -> usize {
        self.questions.len() * self.required_judgments_per_question
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Splits questions into questionnaires of at most [`MAX_QUESTIONS`], in
/// input order, all sharing the same intro, plots and `k`.
pub fn batch(
    questions: Vec<Question>,
    intro: &Intro,
    k: usize,
    id_prefix: &str,
) -> Result<Vec<Questionnaire>, QuestionnaireError> {
    if questions.is_empty() {
        return Err(QuestionnaireError::NoQuestions);
    }
    if k == 0 {
        return Err(QuestionnaireError::InvalidK);
    }
    Ok(questions
        .chunks(MAX_QUESTIONS)
        .enumerate()
        .map(|(i, chunk)| Questionnaire {
            id: format!("{id_prefix}-{i:03}"),
            intro_text: intro.text.clone(),
            prior_blurb: intro.prior_blurb.clone(),
            plots: intro.plots.clone(),
            questions: chunk.to_vec(),
            required_judgments_per_question: k,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnSpec;

    fn galton() -> Dataset {
        let cols = vec![
            ColumnSpec::continuous("father").with_unit("inch"),
            ColumnSpec::continuous("mother").with_unit("inch"),
            ColumnSpec::categorical("gender", ["male", "female"]),
            ColumnSpec::continuous("height").with_unit("inch"),
        ];
        let row = |f: f64, m: f64, g: &str, h: Option<f64>| {
            vec![Some(Value::Number(f)), Some(Value::Number(m)), Some(Value::from(g)), h.map(Value::Number)]
        };
        Dataset::new(
            cols,
            vec![
                row(78.5, 67.0, "male", None),
                row(75.5, 65.5, "male", Some(73.5)),
                row(75.0, 64.0, "female", Some(68.0)),
                row(69.5, 64.5, "female", Some(63.7)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn galton_prompt_embeds_context() {
        let d = galton();
        let c = AnswerConstraint::numeric(55.0, 80.0).unwrap();
        let q = render_question(&d, (0, 3), c, &Templates::default()).unwrap();
        assert_eq!(
            q.prompt_text,
            "We have a data record with missing height information. Given that father is 78.5 inch, mother is 67 inch, \
             and gender is male. What do you think is the most probable height?"
        );
        assert_eq!(q.context_fields.len(), 3);
        assert!(q.context_fields.iter().all(|f| f.column != "height"));
        assert_eq!(q.id, "r0-height");
    }

    #[test]
    fn gender_question_gets_radio_choices() {
        let cols = vec![
            ColumnSpec::continuous("FEV"),
            ColumnSpec::continuous("height"),
            ColumnSpec::continuous("age"),
            ColumnSpec::categorical("gender", ["Male", "Female"]),
        ];
        let d = Dataset::new(
            cols,
            vec![vec![Some(Value::Number(2.4)), Some(Value::Number(62.5)), Some(Value::Number(11.0)), None]],
        )
        .unwrap();
        let c = AnswerConstraint::for_column(d.column(3), None).unwrap();
        let q = render_question(&d, (0, 3), c, &Templates::default()).unwrap();
        assert_eq!(q.prompt_text, "What is the gender given that FEV is 2.4, height is 62.5, and age is 11?");
        match &q.constraint {
            AnswerConstraint::CategoricalChoice { choices, .. } => assert_eq!(choices, &["Male", "Female"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn observed_cell_rejected() {
        let d = galton();
        let c = AnswerConstraint::numeric(55.0, 80.0).unwrap();
        assert_eq!(
            render_question(&d, (1, 3), c, &Templates::default()),
            Err(QuestionnaireError::NotMissing { row: 1, column: "height".into() })
        );
    }

    #[test]
    fn missing_context_is_omitted_or_errors() {
        let mut d = galton();
        d.set(0, 1, None).unwrap();
        let c = AnswerConstraint::numeric(55.0, 80.0).unwrap();
        let q = render_question(&d, (0, 3), c.clone(), &Templates::default()).unwrap();
        assert!(!q.prompt_text.contains("mother"));
        assert_eq!(q.context_fields.len(), 2);

        let strict = Templates { continuous: "Father {father}, mother {mother}: {target}?".into(), ..Templates::default() };
        assert_eq!(
            render_question(&d, (0, 3), c.clone(), &strict),
            Err(QuestionnaireError::MissingContext("mother".into()))
        );
        let lenient = Templates { continuous: "Father {father}, mother {mother?}: {target}?".into(), ..Templates::default() };
        assert_eq!(render_question(&d, (0, 3), c, &lenient).unwrap().prompt_text, "Father 78.5, mother : height?");
    }

    #[test]
    fn empty_context_uses_short_template() {
        let d = galton();
        let c = AnswerConstraint::numeric(55.0, 80.0).unwrap();
        let q = render_question_with_context(&d, (0, 3), c, &Templates::default(), &[]).unwrap();
        assert!(q.context_fields.is_empty());
        assert!(q.prompt_text.contains("Based on the information provided"));
    }

    #[test]
    fn constraint_validation() {
        let age = AnswerConstraint::numeric(3.0, 19.0).unwrap();
        assert_eq!(age.hint_text(), "valid range 3–19");
        assert_eq!(age.check("25"), Err("out of range 3–19".to_string()));
        assert_eq!(age.check("3"), Ok(Value::Number(3.0)));
        assert_eq!(age.check(" 19 "), Ok(Value::Number(19.0)));
        assert!(age.check("abc").is_err());
        assert!(age.check("NaN").is_err());
        let g = AnswerConstraint::choice(["Male", "Female"]).unwrap();
        assert_eq!(g.check("Male"), Ok(Value::from("Male")));
        assert_eq!(g.check("female"), Ok(Value::from("Female")));
        assert!(g.check("other").is_err());
        assert!(AnswerConstraint::numeric(3.0, 3.0).is_err());
        assert!(AnswerConstraint::choice(["x"]).is_err());
    }

    #[test]
    fn mismatched_constraint_rejected() {
        let d = galton();
        let wrong = AnswerConstraint::choice(["a", "b"]).unwrap();
        assert!(matches!(
            render_question(&d, (0, 3), wrong, &Templates::default()),
            Err(QuestionnaireError::ConstraintMismatch(_))
        ));
    }

    fn dummy_questions(n: usize) -> Vec<Question> {
        (0..n)
            .map(|i| Question {
                id: question_id(i, "age"),
                target_cell: CellRef { row: i, column: "age".into() },
                prompt_text: String::new(),
                constraint: AnswerConstraint::numeric(3.0, 19.0).unwrap(),
                context_fields: vec![],
            })
            .collect()
    }

    #[test]
    fn batching_sizes() {
        let intro = Intro::default();
        let one = batch(dummy_questions(10), &intro, 30, "qn").unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].required_judgments(), 300);
        let three = batch(dummy_questions(23), &intro, 30, "qn").unwrap();
        assert_eq!(three.iter().map(|q| q.questions.len()).collect::<Vec<_>>(), vec![10, 10, 3]);
        assert_eq!(batch(dummy_questions(1), &intro, 1, "qn").unwrap()[0].questions.len(), 1);
        assert_eq!(batch(vec![], &intro, 1, "qn"), Err(QuestionnaireError::NoQuestions));
        assert_eq!(batch(dummy_questions(2), &intro, 0, "qn"), Err(QuestionnaireError::InvalidK));
    }

    #[test]
    fn questionnaire_json_field_names() {
        let qn = batch(dummy_questions(2), &Intro::default(), 5, "qn").unwrap().remove(0);
        let json = serde_json::to_value(&qn).unwrap();
        for key in ["id", "intro", "prior_blurb", "plots", "questions", "k"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["questions"][0]["constraint"]["kind"], "numeric_range");
        let back: Questionnaire = serde_json::from_value(json).unwrap();
        assert_eq!(back, qn);
    }
}
