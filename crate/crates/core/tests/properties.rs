use approx::assert_relative_eq;
use proptest::prelude::*;

use crowdimpute_core::dataset::Value;
use crowdimpute_core::pooling::{pool_point, summarize_cell, CellSummary};
use crowdimpute_core::questionnaire::AnswerConstraint;

fn finite_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e6f64..1e6, 1..60)
}

proptest! {
    #[test]
    fn pool_is_translation_equivariant(values in finite_values(), shift in -1e3f64..1e3) {
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        assert_relative_eq!(pool_point(&shifted).unwrap(), pool_point(&values).unwrap() + shift, epsilon = 1e-6);
    }

    #[test]
    fn pool_ignores_order(mut values in finite_values()) {
        let before = pool_point(&values).unwrap();
        values.reverse();
        prop_assert_eq!(pool_point(&values).unwrap(), before);
    }

    #[test]
    fn pool_lies_within_range(values in finite_values()) {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let p = pool_point(&values).unwrap();
        prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
    }

    #[test]
    fn quartiles_are_ordered(values in finite_values()) {
        let cell: Vec<Value> = values.iter().map(|&v| Value::Number(v)).collect();
        match summarize_cell(&cell, None).unwrap() {
            CellSummary::Continuous { p25, median, p75, .. } => prop_assert!(p25 <= median && median <= p75),
            other => prop_assert!(false, "unexpected {other:?}"),
        }
    }

    #[test]
    fn votes_sum_to_m(labels in prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 1..40)) {
        let cell: Vec<Value> = labels.iter().map(|l| Value::Label((*l).into())).collect();
        let cats = vec!["a".to_string(), "b".into(), "c".into()];
        match summarize_cell(&cell, Some(&cats)).unwrap() {
            CellSummary::Categorical { counts, winner, margin } => {
                prop_assert_eq!(counts.iter().map(|c| c.votes).sum::<usize>(), labels.len());
                prop_assert_eq!(winner == "tie", margin == 0);
            }
            other => prop_assert!(false, "unexpected {other:?}"),
        }
    }

    #[test]
    fn numeric_constraint_matches_range(x in -50.0f64..50.0) {
        let c = AnswerConstraint::numeric(3.0, 19.0).unwrap();
        prop_assert_eq!(c.check(&x.to_string()).is_ok(), (3.0..=19.0).contains(&x));
    }
}
