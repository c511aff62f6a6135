//! Linear regression with a posterior draw of the coefficients.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::MiceError;
use crate::dataset::{ColumnKind, Dataset, Value};

/// Relative tolerance for treating a design column as a linear combination of
/// the columns kept before it.
const COLLINEAR_TOL: f64 = 1e-9;

/// Smallest residual sd a posterior draw may return.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Design matrix over all rows: an intercept, then continuous predictors as-is
/// and categorical predictors one-hot encoded without their first category.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl Design {
    /// Encodes `predictors` of `d`. Every predictor cell must be present.
    pub fn encode(d: &Dataset, predictors: &[usize]) -> Result<Self, MiceError> {
        let mut names = vec!["(intercept)".to_string()];
        let mut columns: Vec<Vec<f64>> = vec![vec![1.0; d.n_rows()]];
        for &col in predictors {
            let spec = d.column(col);
            let cell = |row: usize| {
                d.get(row, col).ok_or_else(|| MiceError::IncompletePredictor(spec.name.clone()))
            };
            match spec.kind {
                ColumnKind::Continuous => {
                    let values = (0..d.n_rows())
                        .map(|row| cell(row).map(|v| v.as_number().unwrap_or(f64::NAN)))
                        .collect::<Result<Vec<_>, _>>()?;
                    names.push(spec.name.clone());
                    columns.push(values);
                }
                ColumnKind::Categorical => {
                    for label in spec.categories.iter().skip(1) {
                        let values = (0..d.n_rows())
                            .map(|row| cell(row).map(|v| f64::from(u8::from(v.as_label() == Some(label.as_str())))))
                            .collect::<Result<Vec<_>, _>>()?;
                        names.push(format!("{}={label}", spec.name));
                        columns.push(values);
                    }
                }
                ColumnKind::Id => {}
            }
        }
        let matrix = DMatrix::from_fn(d.n_rows(), columns.len(), |r, c| columns[c][r]);
        Ok(Self { names, matrix })
    }

    fn select_columns(&self, keep: &[usize]) -> Self {
        Self {
            names: keep.iter().map(|&c| self.names[c].clone()).collect(),
            matrix: self.matrix.select_columns(keep),
        }
    }
}

/// Regression of one target on a design, fitted on the observed rows.
#[derive(Debug, Clone)]
pub struct RegressionTask {
    pub target: String,
    /// Kept design columns, all rows.
    pub design: Design,
    pub observed_rows: Vec<usize>,
    /// Target values on `observed_rows`.
    pub y: DVector<f64>,
    /// Design columns dropped as collinear on the observed rows.
    pub dropped: Vec<String>,
}

impl RegressionTask {
    /// Drops design columns that are (numerically) linear combinations of
    /// earlier ones on the observed rows, scanning left to right.
    pub fn new(target: impl Into<String>, design: Design, observed_rows: Vec<usize>, y: Vec<f64>) -> Result<Self, MiceError> {
        let target = target.into();
        if y.len() != observed_rows.len() {
            return Err(MiceError::Invalid(format!("{} targets for {} observed rows", y.len(), observed_rows.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(MiceError::Invalid(format!("non-finite target values in '{target}'")));
        }
        let x_obs = design.matrix.select_rows(&observed_rows);
        if x_obs.iter().any(|v| !v.is_finite()) {
            return Err(MiceError::Invalid(format!("non-finite predictor values for '{target}'")));
        }
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut keep = Vec::new();
        let mut dropped = Vec::new();
        for c in 0..x_obs.ncols() {
            let col = x_obs.column(c).into_owned();
            let norm = col.norm();
            let mut residual = col;
            for b in &basis {
                let proj = b.dot(&residual);
                residual.axpy(-proj, b, 1.0);
            }
            let rnorm = residual.norm();
            if norm > 0.0 && rnorm > COLLINEAR_TOL * norm {
                basis.push(residual / rnorm);
                keep.push(c);
            } else {
                dropped.push(design.names[c].clone());
            }
        }
        if keep.first() != Some(&0) {
            return Err(MiceError::Degenerate { column: target, reason: "no observed rows".into() });
        }
        Ok(Self { target, design: design.select_columns(&keep), observed_rows, y: DVector::from_vec(y), dropped })
    }

    pub fn n_obs(&self) -> usize {
        self.observed_rows.len()
    }

    /// Predictors excluding the intercept.
    pub fn p(&self) -> usize {
        self.design.names.len() - 1
    }

    pub fn x_obs(&self) -> DMatrix<f64> {
        self.design.matrix.select_rows(&self.observed_rows)
    }
}

/// Least-squares fit through a QR decomposition of the observed design.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub beta_hat: DVector<f64>,
    /// Upper-triangular `R` with `XᵀX = RᵀR`.
    pub r: DMatrix<f64>,
    pub rss: f64,
}

pub fn least_squares(task: &RegressionTask) -> Result<LeastSquares, MiceError> {
    let x = task.x_obs();
    let cols = x.ncols();
    if task.n_obs() < cols {
        return Err(MiceError::Degenerate {
            column: task.target.clone(),
            reason: format!("{} observed rows for {cols} coefficients", task.n_obs()),
        });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &task.y;
    let beta_hat = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| MiceError::Degenerate { column: task.target.clone(), reason: "singular design".into() })?;
    let rss = (&task.y - &x * &beta_hat).norm_squared();
    Ok(LeastSquares { beta_hat, r, rss })
}

/// How the residual sd of a posterior draw is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    /// `σ*² = RSS / g` with `g ~ χ²(n_obs − p − 1)`.
    Draw,
    /// Fixed `σ*`; `Fixed(0.0)` gives `β* = β̂`.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    pub beta_hat: DVector<f64>,
    pub beta_star: DVector<f64>,
    pub sigma_star: f64,
}

/// Draws `β* ~ N(β̂, σ*² (XᵀX)⁻¹)` after `σ*`, consuming one chi-square draw
/// then one standard normal per coefficient.
pub fn bayes_draw<R: Rng + ?Sized>(task: &RegressionTask, rng: &mut R) -> Result<PosteriorDraw, MiceError> {
    bayes_draw_with(task, SigmaMode::Draw, rng)
}

pub fn bayes_draw_with<R: Rng + ?Sized>(
    task: &RegressionTask,
    sigma: SigmaMode,
    rng: &mut R,
) -> Result<PosteriorDraw, MiceError> {
    let nu = task.n_obs() as i64 - task.p() as i64 - 1;
    if nu <= 0 {
        return Err(MiceError::Degenerate {
            column: task.target.clone(),
            reason: format!("{} observed rows leave {nu} residual degrees of freedom", task.n_obs()),
        });
    }
    let ls = least_squares(task)?;
    let sigma_star = match sigma {
        SigmaMode::Draw => {
            let g: f64 = ChiSquared::new(nu as f64).expect("positive degrees of freedom").sample(rng);
            (ls.rss / g).sqrt().max(SIGMA_FLOOR)
        }
        SigmaMode::Fixed(s) => s,
    };
    let z = DVector::from_fn(ls.beta_hat.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta_star = if sigma_star == 0.0 {
        ls.beta_hat.clone()
    } else {
        let step = ls
            .r
            .solve_upper_triangular(&z)
            .ok_or_else(|| MiceError::Degenerate { column: task.target.clone(), reason: "singular design".into() })?;
        &ls.beta_hat + step * sigma_star
    };
    Ok(PosteriorDraw { beta_hat: ls.beta_hat, beta_star, sigma_star })
}

/// Numeric target values on the given rows.
pub(crate) fn numeric_targets(d: &Dataset, col: usize, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&r| d.get(r, col).and_then(Value::as_number).unwrap_or(f64::NAN)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnSpec;
    use crate::rng::stream_rng;

    fn task(xs: &[f64], ys: &[f64]) -> RegressionTask {
        let design = Design {
            names: vec!["(intercept)".into(), "x".into()],
            matrix: DMatrix::from_fn(xs.len(), 2, |r, c| if c == 0 { 1.0 } else { xs[r] }),
        };
        RegressionTask::new("y", design, (0..xs.len()).collect(), ys.to_vec()).unwrap()
    }

    #[test]
    fn noiseless_line_recovers_coefficients() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x).collect();
        let t = task(&xs, &ys);
        let fixed = bayes_draw_with(&t, SigmaMode::Fixed(0.0), &mut stream_rng(1, 0)).unwrap();
        assert!((fixed.beta_hat[0] - 3.0).abs() < 1e-12 && (fixed.beta_hat[1] - 2.0).abs() < 1e-12);
        assert_eq!(fixed.beta_star, fixed.beta_hat);
        let drawn = bayes_draw(&t, &mut stream_rng(1, 0)).unwrap();
        assert!(drawn.sigma_star > 0.0);
        assert!((drawn.beta_star[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_residual_degrees_of_freedom_is_an_error() {
        let t = task(&[1.0, 2.0], &[1.0, 5.0]);
        assert!(matches!(bayes_draw(&t, &mut stream_rng(1, 0)), Err(MiceError::Degenerate { .. })));
    }

    #[test]
    fn collinear_columns_are_dropped() {
        let n = 6;
        let design = Design {
            names: vec!["(intercept)".into(), "a".into(), "b".into(), "c".into()],
            matrix: DMatrix::from_fn(n, 4, |r, c| match c {
                0 => 1.0,
                1 => r as f64,
                2 => 2.0 * r as f64 + 1.0,
                _ => (r * r) as f64,
            }),
        };
        let t = RegressionTask::new("y", design, (0..n).collect(), vec![1.0, 2.0, 2.0, 4.0, 5.0, 7.0]).unwrap();
        assert_eq!(t.dropped, vec!["b".to_string()]);
        assert_eq!(t.p(), 2);
    }

    #[test]
    fn encoding_one_hot_drops_first_category() {
        let schema = vec![ColumnSpec::continuous("x"), ColumnSpec::categorical("g", ["a", "b", "c"])];
        let rows = vec![
            vec![Some(Value::Number(1.0)), Some(Value::from("a"))],
            vec![Some(Value::Number(2.0)), Some(Value::from("c"))],
        ];
        let d = Dataset::new(schema, rows).unwrap();
        let design = Design::encode(&d, &[0, 1]).unwrap();
        assert_eq!(design.names, ["(intercept)", "x", "g=b", "g=c"]);
        assert_eq!(design.matrix.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 0.0, 1.0]);
    }

    #[test]
    fn draws_are_reproducible() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + x + (x * 1.7).sin()).collect();
        let t = task(&xs, &ys);
        let a = bayes_draw(&t, &mut stream_rng(4, 0)).unwrap();
        let b = bayes_draw(&t, &mut stream_rng(4, 0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.beta_star, a.beta_hat);
    }
}
