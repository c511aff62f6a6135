//! Questionnaire introductions: a plain-language description of how the target
//! relates to its most strongly associated attributes, plus plot payloads.

use serde::{Deserialize, Serialize};

use super::template::join_phrases;
use super::QuestionnaireError;
use crate::dataset::{ColumnKind, Dataset};
use crate::stats::{quantile_sorted, sorted_copy};
use crate::summary::{correlation_rank, StratumTable, SummaryStats};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurbPlacement {
    Start,
    #[default]
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntroOptions {
    pub top_m: usize,
    pub prior_blurb: Option<String>,
    pub blurb_placement: BlurbPlacement,
    /// Opening sentence describing the dataset; a generic one is written
    /// when absent.
    pub description: Option<String>,
}

impl Default for IntroOptions {
    fn default() -> Self {
        Self { top_m: super::DEFAULT_TOP_M, prior_blurb: None, blurb_placement: BlurbPlacement::End, description: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Scatter,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGroup {
    pub label: String,
    pub n: usize,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub values: Vec<f64>,
}

/// Raw data for client-side rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlotPayload {
    Points { points: Vec<[f64; 2]> },
    Groups { groups: Vec<BoxGroup> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub x_column: String,
    pub y_column: String,
    pub payload: PlotPayload,
    pub caption: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Intro {
    pub text: String,
    pub prior_blurb: Option<String>,
    pub plots: Vec<PlotSpec>,
}

fn r1(x: f64) -> String {
    format!("{x:.1}")
}

fn pct(p: f64) -> String {
    format!("{:.0}%", p * 100.0)
}

/// Intro text and plots for a survey about `target`. `d` supplies the raw
/// points for plot payloads; everything quoted in the text comes from `s`.
pub fn build_intro(
    d: &Dataset,
    s: &SummaryStats,
    target: &str,
    opts: &IntroOptions,
) -> Result<Intro, QuestionnaireError> {
    if opts.top_m == 0 {
        return Err(QuestionnaireError::InvalidTopM);
    }
    let t = d.column_index(target).map_err(|_| QuestionnaireError::UnknownColumn(target.to_string()))?;
    let ranked = correlation_rank(s, target).map_err(|_| QuestionnaireError::UnknownColumn(target.to_string()))?;
    if ranked.is_empty() {
        return Err(QuestionnaireError::NoAssociations(target.to_string()));
    }
    let top: Vec<usize> = ranked
        .iter()
        .take(opts.top_m)
        .map(|(name, _)| d.column_index(name).expect("ranked columns exist"))
        .collect();
    let target_spec = d.column(t);

    let mut bullets = Vec::new();
    let mut plots = Vec::new();
    match target_spec.kind {
        ColumnKind::Continuous => {
            let continuous: Vec<usize> = top.iter().copied().filter(|&c| d.column(c).is_continuous()).collect();
            let named = |sign: bool| -> Vec<String> {
                continuous
                    .iter()
                    .filter(|&&c| s.association(target, &d.column(c).name).is_some_and(|r| (r > 0.0) == sign))
                    .map(|&c| d.column(c).name.clone())
                    .collect()
            };
            let (up, down) = (named(true), named(false));
            if !up.is_empty() {
                bullets.push(format!("{target} increases with {}", join_phrases(&up)));
            }
            if !down.is_empty() {
                bullets.push(format!("{target} decreases with {}", join_phrases(&down)));
            }
            if let Some(c) = s.continuous(target) {
                bullets.push(format!("Minimum and maximum {target} in our case is {} and {}", r1(c.min), r1(c.max)));
            }
            for &c in &top {
                let spec = d.column(c);
                match spec.kind {
                    ColumnKind::Continuous => {
                        if let Some(table) = s.strata_for(target, &spec.name) {
                            if let Some(line) = strata_bullet(s, table, spec.unit.as_deref()) {
                                bullets.push(line);
                            }
                        }
                        plots.push(scatter(d, c, t));
                    }
                    ColumnKind::Categorical => {
                        if let Some(g) = s.grouped(target, &spec.name) {
                            let parts: Vec<String> = g
                                .groups
                                .iter()
                                .filter_map(|grp| Some(format!("{} when {} is {}", r1(grp.mean?), spec.name, grp.label)))
                                .collect();
                            if !parts.is_empty() {
                                bullets.push(format!("Average {target} is {}", join_phrases(&parts)));
                            }
                        }
                        plots.push(boxes(d, c, t));
                    }
                    ColumnKind::Id => {}
                }
            }
        }
        ColumnKind::Categorical => {
            if let Some(c) = s.categorical(target) {
                let parts: Vec<String> =
                    c.categories.iter().map(|share| format!("{} with {target} {}", pct(share.proportion), share.label)).collect();
                bullets.push(format!("We have about {}", join_phrases(&parts)));
            }
            for &c in &top {
                let spec = d.column(c);
                match spec.kind {
                    ColumnKind::Continuous => {
                        if let Some(g) = s.grouped(&spec.name, target) {
                            let parts: Vec<String> = g
                                .groups
                                .iter()
                                .filter_map(|grp| Some(format!("{} when {target} is {}", r1(grp.mean?), grp.label)))
                                .collect();
                            if !parts.is_empty() {
                                bullets.push(format!("Average {} is {}", spec.name, join_phrases(&parts)));
                            }
                        }
                        plots.push(boxes(d, t, c));
                    }
                    ColumnKind::Categorical => bullets.push(format!("{target} is related to {}", spec.name)),
                    ColumnKind::Id => {}
                }
            }
        }
        ColumnKind::Id => return Err(QuestionnaireError::UnknownColumn(target.to_string())),
    }

    let opening = opts.description.clone().unwrap_or_else(|| {
        let names: Vec<String> = d.columns().iter().map(|c| c.name.clone()).collect();
        format!(
            "This data set has {} records describing {}. Some records are missing {target}.",
            s.n_rows,
            join_phrases(&names)
        )
    });
    let mut text = String::new();
    if let (Some(blurb), BlurbPlacement::Start) = (&opts.prior_blurb, opts.blurb_placement) {
        text.push_str(blurb);
        text.push_str("\n\n");
    }
    text.push_str(&opening);
    text.push_str(" We know that:\n");
    for b in &bullets {
        text.push_str("- ");
        text.push_str(b);
        text.push_str(".\n");
    }
    if let (Some(blurb), BlurbPlacement::End) = (&opts.prior_blurb, opts.blurb_placement) {
        text.push('\n');
        text.push_str(blurb);
    }
    let text = text.trim_end().to_string();

    Ok(Intro { text, prior_blurb: opts.prior_blurb.clone(), plots })
}

/// Discrete predictors quote the strata at the predictor's quartiles; binned
/// ones quote the lowest and highest bins.
fn strata_bullet(s: &SummaryStats, table: &StratumTable, unit: Option<&str>) -> Option<String> {
    let target = &table.target;
    let pred = &table.predictor;
    let unit = unit.map(|u| format!(" {u}")).unwrap_or_default();
    if table.discrete {
        let c = s.continuous(pred)?;
        let (lo, hi) = (table.lookup(c.p25)?, table.lookup(c.p75)?);
        if lo == hi {
            return None;
        }
        Some(format!(
            "For {pred} of {}{unit}, average {target} is {} and for {pred} of {}{unit}, average {target} is {}",
            lo.lo,
            r1(lo.mean),
            hi.lo,
            r1(hi.mean)
        ))
    } else {
        let (first, last) = (table.strata.first()?, table.strata.last()?);
        if table.strata.len() < 2 {
            return None;
        }
        Some(format!(
            "For {pred} up to {}{unit}, average {target} is {} and for {pred} above {}{unit}, average {target} is {}",
            r1(first.hi),
            r1(first.mean),
            r1(last.lo),
            r1(last.mean)
        ))
    }
}

fn scatter(d: &Dataset, x: usize, y: usize) -> PlotSpec {
    let points = (0..d.n_rows())
        .filter_map(|r| Some([d.get(r, x)?.as_number()?, d.get(r, y)?.as_number()?]))
        .collect();
    let (xn, yn) = (&d.column(x).name, &d.column(y).name);
    PlotSpec {
        kind: PlotKind::Scatter,
        x_column: xn.clone(),
        y_column: yn.clone(),
        payload: PlotPayload::Points { points },
        caption: format!("Relationship between {xn} and {yn}"),
    }
}

/// Box plot of continuous column `value` per category of `group`.
fn boxes(d: &Dataset, group: usize, value: usize) -> PlotSpec {
    let groups = d
        .column(group)
        .categories
        .iter()
        .filter_map(|label| {
            let values: Vec<f64> = (0..d.n_rows())
                .filter(|&r| d.get(r, group).and_then(|v| v.as_label()) == Some(label))
                .filter_map(|r| d.get(r, value)?.as_number())
                .collect();
            let sorted = sorted_copy(&values);
            let q = |p| quantile_sorted(&sorted, p);
            Some(BoxGroup {
                label: label.clone(),
                n: values.len(),
                min: *sorted.first()?,
                p25: q(0.25)?,
                median: q(0.5)?,
                p75: q(0.75)?,
                max: *sorted.last()?,
                values,
            })
        })
        .collect();
    let (gn, vn) = (&d.column(group).name, &d.column(value).name);
    PlotSpec {
        kind: PlotKind::Box,
        x_column: gn.clone(),
        y_column: vn.clone(),
        payload: PlotPayload::Groups { groups },
        caption: format!("{vn} by {gn}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnSpec, Value};
    use crate::summary::summarize;

    /// FEV by age with exact stratum means: 1.6 at age 5, 2.7 at age 10.
    fn fev_table() -> Dataset {
        let data = [
            (5.0, 1.5, 50.0, "female"),
            (5.0, 1.7, 51.0, "male"),
            (5.0, 1.6, 49.0, "female"),
            (7.0, 2.0, 54.0, "female"),
            (8.0, 2.2, 56.0, "male"),
            (10.0, 2.6, 58.0, "female"),
            (10.0, 2.8, 60.0, "male"),
            (12.0, 3.1, 63.0, "female"),
            (16.0, 4.2, 70.0, "male"),
        ];
        let cols = vec![
            ColumnSpec::continuous("age").with_range(3.0, 19.0),
            ColumnSpec::continuous("FEV"),
            ColumnSpec::continuous("height"),
            ColumnSpec::categorical("gender", ["female", "male"]),
        ];
        let rows = data
            .iter()
            .map(|&(a, f, h, g)| vec![Some(Value::Number(a)), Some(Value::Number(f)), Some(Value::Number(h)), Some(Value::from(g))])
            .collect();
        Dataset::new(cols, rows).unwrap()
    }

    #[test]
    fn fev_intro_mentions_trends_and_strata() {
        let d = fev_table();
        let s = summarize(&d).unwrap();
        let intro = build_intro(&d, &s, "FEV", &IntroOptions::default()).unwrap();
        assert!(
            intro.text.contains("FEV increases with height and age") || intro.text.contains("FEV increases with age and height"),
            "{}",
            intro.text
        );
        assert!(intro.text.contains("Minimum and maximum FEV in our case is 1.5 and 4.2"));
        assert!(intro.text.contains("average FEV is 1.6"), "{}", intro.text);
        assert!(intro.text.contains("average FEV is 2.7"), "{}", intro.text);
        assert_eq!(intro.plots.len(), 3);
        assert_eq!(intro.plots.iter().filter(|p| p.kind == PlotKind::Scatter).count(), 2);
        assert_eq!(intro.plots.iter().filter(|p| p.kind == PlotKind::Box).count(), 1);
    }

    #[test]
    fn blurb_goes_last_or_first() {
        let d = fev_table();
        let s = summarize(&d).unwrap();
        let blurb = "However, in addition to the information contained in our dataset, we also know that in general \
                     population related to this study, females account for about 65% of total.";
        let end = IntroOptions { prior_blurb: Some(blurb.into()), ..IntroOptions::default() };
        let intro = build_intro(&d, &s, "gender", &end).unwrap();
        assert!(intro.text.ends_with("females account for about 65% of total."));
        assert!(intro.text.contains("We have about 56% with gender female and 44% with gender male"), "{}", intro.text);
        let start = IntroOptions { blurb_placement: BlurbPlacement::Start, ..end };
        assert!(build_intro(&d, &s, "gender", &start).unwrap().text.starts_with("However"));
    }

    #[test]
    fn degenerate_inputs() {
        let d = fev_table();
        let s = summarize(&d).unwrap();
        let zero = IntroOptions { top_m: 0, ..IntroOptions::default() };
        assert_eq!(build_intro(&d, &s, "FEV", &zero), Err(QuestionnaireError::InvalidTopM));
        let constant = Dataset::new(
            vec![ColumnSpec::continuous("a"), ColumnSpec::continuous("b")],
            (0..4).map(|i| vec![Some(Value::Number(1.0)), Some(Value::Number(i as f64))]).collect(),
        )
        .unwrap();
        let cs = summarize(&constant).unwrap();
        assert_eq!(
            build_intro(&constant, &cs, "a", &IntroOptions::default()),
            Err(QuestionnaireError::NoAssociations("a".into()))
        );
    }

    #[test]
    fn plot_payloads_come_from_observed_cells() {
        let mut d = fev_table();
        d.set(0, 1, None).unwrap();
        let s = summarize(&d).unwrap();
        let intro = build_intro(&d, &s, "FEV", &IntroOptions::default()).unwrap();
        for plot in &intro.plots {
            match &plot.payload {
                PlotPayload::Points { points } => assert_eq!(points.len(), 8),
                PlotPayload::Groups { groups } => assert_eq!(groups.iter().map(|g| g.n).sum::<usize>(), 8),
            }
        }
    }

    #[test]
    fn intro_is_deterministic() {
        let d = fev_table();
        let s = summarize(&d).unwrap();
        let a = build_intro(&d, &s, "FEV", &IntroOptions::default()).unwrap();
        let b = build_intro(&d, &s, "FEV", &IntroOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
