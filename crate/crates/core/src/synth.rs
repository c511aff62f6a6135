//! Synthetic datasets for demos and tests.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{ColumnSpec, Dataset, Value};
use crate::rng::stream_rng;

pub fn fev_schema() -> Vec<ColumnSpec> {
    vec![
        ColumnSpec::continuous("age").with_range(3.0, 19.0).with_unit("years"),
        ColumnSpec::continuous("FEV").with_range(0.5, 6.0).with_unit("litres"),
        ColumnSpec::continuous("height").with_range(46.0, 74.0).with_unit("inches"),
        ColumnSpec::categorical("gender", ["female", "male"]),
        ColumnSpec::categorical("smoke", ["no", "yes"]),
    ]
}

/// Children's lung-function data with the qualitative structure of the
/// classic FEV study: FEV grows with age and height, boys outgrow girls
/// after about age nine, and smoking only appears in older children.
pub fn fev_like(n: usize, seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, 0);
    let age_dist = Normal::<f64>::new(10.0, 3.0).expect("valid normal");
    let unit = Normal::<f64>::new(0.0, 1.0).expect("valid normal");
    let rows = (0..n)
        .map(|_| {
            let age = age_dist.sample(&mut rng).round().clamp(3.0, 19.0);
            let male = rng.random_bool(0.51);
            let mut height = 36.0 + 2.1 * age.min(14.0) + 2.5 * unit.sample(&mut rng);
            if male {
                height += 0.5 * (age.min(17.0) - 9.0).max(0.0);
            }
            let height = ((height * 2.0).round() / 2.0).clamp(46.0, 74.0);
            let smoke = age >= 9.0 && rng.random_bool((0.03 * (age - 8.0)).min(0.4));
            let fev = 0.095 * height + 0.06 * age - 3.9 + if male { 0.15 } else { 0.0 } + 0.35 * unit.sample(&mut rng);
            let fev = (fev.clamp(0.5, 6.0) * 1000.0).round() / 1000.0;
            vec![
                Some(Value::Number(age)),
                Some(Value::Number(fev)),
                Some(Value::Number(height)),
                Some(Value::from(if male { "male" } else { "female" })),
                Some(Value::from(if smoke { "yes" } else { "no" })),
            ]
        })
        .collect();
    Dataset::new(fev_schema(), rows).expect("generator respects its schema")
}

/// `y = 1 + x1 - 0.5 x2 + 0.8 x3 + e` with correlated standard-normal
/// predictors and `e ~ N(0, noise_sd)`. Column order: y, x1, x2, x3.
pub fn linear_gaussian(n: usize, noise_sd: f64, seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, 0);
    let unit = Normal::<f64>::new(0.0, 1.0).expect("valid normal");
    let rows = (0..n)
        .map(|_| {
            let z: [f64; 3] = [unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng)];
            let x1 = z[0];
            let x2 = 0.6 * z[0] + 0.8 * z[1];
            let x3 = z[2];
            let y = 1.0 + x1 - 0.5 * x2 + 0.8 * x3 + noise_sd * unit.sample(&mut rng);
            [y, x1, x2, x3].iter().map(|&v| Some(Value::Number(v))).collect()
        })
        .collect();
    let cols = ["y", "x1", "x2", "x3"].into_iter().map(ColumnSpec::continuous).collect();
    Dataset::new(cols, rows).expect("finite values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::summarize;

    #[test]
    fn fev_like_has_expected_structure() {
        let d = fev_like(600, 11);
        assert_eq!(d.missing_count(), 0);
        let s = summarize(&d).unwrap();
        assert!(s.association("FEV", "age").unwrap() > 0.6);
        assert!(s.association("FEV", "height").unwrap() > 0.7);
        let g = s.grouped("height", "gender").unwrap();
        assert!(g.mean_for("male").unwrap() > g.mean_for("female").unwrap());
        let share = s.categorical("gender").unwrap().categories[1].proportion;
        assert!((share - 0.51).abs() < 0.06);
        assert_eq!(fev_like(50, 3), fev_like(50, 3));
    }
}
