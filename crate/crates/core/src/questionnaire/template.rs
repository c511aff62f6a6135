//! Prompt templates with named `{placeholder}` slots.
//!
//! A placeholder is either a built-in (`target`, `context`, `choices`,
//! `range`, `row`) or the name of a column in the row. A trailing `?`
//! (`{mother?}`) marks a column slot as omittable: it renders empty when the
//! cell is missing instead of failing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::QuestionnaireError;

pub const CONTINUOUS_WITH_CONTEXT: &str =
    "We have a data record with missing {target} information. Given that {context}. What do you think is the most probable {target}?";
pub const CONTINUOUS_WITHOUT_CONTEXT: &str =
    "We have a data record with missing {target} information. Based on the information provided, what do you think is the most probable {target}?";
pub const CATEGORICAL_WITH_CONTEXT: &str = "What is the {target} given that {context}?";
pub const CATEGORICAL_WITHOUT_CONTEXT: &str =
    "We have a data record with missing {target} information. Based on the information provided, what is the most probable {target}?";

/// The four prompt shapes: continuous or categorical target, with or without
/// observed context. Any field left out of a template file keeps its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Templates {
    pub continuous: String,
    pub continuous_no_context: String,
    pub categorical: String,
    pub categorical_no_context: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            continuous: CONTINUOUS_WITH_CONTEXT.into(),
            continuous_no_context: CONTINUOUS_WITHOUT_CONTEXT.into(),
            categorical: CATEGORICAL_WITH_CONTEXT.into(),
            categorical_no_context: CATEGORICAL_WITHOUT_CONTEXT.into(),
        }
    }
}

impl Templates {
    pub fn pick(&self, categorical: bool, has_context: bool) -> &str {
        match (categorical, has_context) {
            (false, true) => &self.continuous,
            (false, false) => &self.continuous_no_context,
            (true, true) => &self.categorical,
            (true, false) => &self.categorical_no_context,
        }
    }
}

/// Slot values available while rendering one prompt. Column slots map to
/// `None` when the cell is missing.
pub(crate) struct Slots<'a> {
    pub builtins: BTreeMap<&'static str, String>,
    pub columns: BTreeMap<&'a str, Option<String>>,
}

pub(crate) fn render(template: &str, slots: &Slots<'_>) -> Result<String, QuestionnaireError> {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| QuestionnaireError::Template(format!("unclosed placeholder in {template:?}")))?;
        let raw = &after[..close];
        let (name, optional) = match raw.strip_suffix('?') {
            Some(n) => (n, true),
            None => (raw, false),
        };
        if let Some(v) = slots.builtins.get(name) {
            out.push_str(v);
        } else if let Some(cell) = slots.columns.get(name) {
            match cell {
                Some(v) => out.push_str(v),
                None if optional => {}
                None => return Err(QuestionnaireError::MissingContext(name.to_string())),
            }
        } else {
            return Err(QuestionnaireError::Template(format!("unknown placeholder {{{raw}}}")));
        }
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// "a", "a and b", "a, b, and c".
pub(crate) fn join_phrases(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slots() -> Slots<'static> {
        Slots {
            builtins: BTreeMap::from([("target", "height".to_string())]),
            columns: BTreeMap::from([("father", Some("78.5".to_string())), ("mother", None)]),
        }
    }

    #[test]
    fn renders_builtins_and_columns() {
        let s = render("{target}: father {father}, mother {mother?}.", &slots()).unwrap();
        assert_eq!(s, "height: father 78.5, mother .");
    }

    #[test]
    fn missing_column_without_marker_fails() {
        assert_eq!(render("{mother}", &slots()), Err(QuestionnaireError::MissingContext("mother".into())));
        assert!(matches!(render("{nope}", &slots()), Err(QuestionnaireError::Template(_))));
        assert!(matches!(render("{target", &slots()), Err(QuestionnaireError::Template(_))));
    }

    #[test]
    fn joins() {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(join_phrases(&v(&["a"])), "a");
        assert_eq!(join_phrases(&v(&["a", "b"])), "a and b");
        assert_eq!(join_phrases(&v(&["a", "b", "c"])), "a, b, and c");
    }
}
