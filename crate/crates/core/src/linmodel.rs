//! Regression datasets, ordinary least squares and classical prediction
//! bounds.
//!
//! Intercepts are never implicit: a model with an intercept carries a column
//! of ones in its design.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dist::{f_quantile, student_t_quantile};
use crate::error::{domain, Result};
use crate::linalg::{check_full_rank, qr_least_squares};

/// Design matrix (`n × k`) and response vector (`n`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    design: DMatrix<f64>,
    response: DVector<f64>,
}

impl Dataset {
    pub fn new(design: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        if design.ncols() == 0 {
            return Err(domain("design must have at least one column"));
        }
        if design.nrows() != response.len() {
            return Err(domain(format!(
                "design has {} rows but response has {} entries",
                design.nrows(),
                response.len()
            )));
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(domain("dataset entries must be finite"));
        }
        Ok(Self { design, response })
    }

    /// A dataset with `k` columns and no rows, used as an empty future set.
    pub fn empty(k: usize) -> Self {
        Self { design: DMatrix::zeros(0, k), response: DVector::zeros(0) }
    }

    /// Design `[1, x]` for a single regressor.
    pub fn with_intercept(x: &[f64], y: &[f64]) -> Result<Self> {
        let design = DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        Self::new(design, DVector::from_column_slice(y))
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn k(&self) -> usize {
        self.design.ncols()
    }

    /// Rows `indices` (0-based) in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(domain(format!("row index {bad} out of range for {} rows", self.n())));
        }
        Ok(Self { design: self.design.select_rows(indices), response: self.response.select_rows(indices) })
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if other.k() != self.k() {
            return Err(domain(format!("cannot stack datasets with {} and {} columns", self.k(), other.k())));
        }
        let (n, m, k) = (self.n(), other.n(), self.k());
        let design = DMatrix::from_fn(n + m, k, |i, j| if i < n { self.design[(i, j)] } else { other.design[(i - n, j)] });
        let response = DVector::from_fn(n + m, |i, _| if i < n { self.response[i] } else { other.response[i - n] });
        Ok(Self { design, response })
    }
}

/// Ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub theta_hat: DVector<f64>,
    pub residuals: DVector<f64>,
    pub sse: f64,
    /// `(xᵀx)⁻¹`, formed from the triangular QR factor.
    pub gram_inverse: DMatrix<f64>,
}

impl OlsFit {
    /// Residual variance `SSE / (n − k)`.
    pub fn residual_variance(&self) -> Result<f64> {
        let dof = self.residual_dof()?;
        Ok(self.sse / dof as f64)
    }

    pub fn residual_dof(&self) -> Result<usize> {
        let (n, k) = (self.residuals.len(), self.theta_hat.len());
        if n <= k {
            return Err(domain(format!("no residual degrees of freedom (n = {n}, k = {k})")));
        }
        Ok(n - k)
    }

    /// Leverage `x̃ (xᵀx)⁻¹ x̃ᵀ` of a new row.
    pub fn leverage(&self, x_new: &DVector<f64>) -> Result<f64> {
        check_row(x_new, self.theta_hat.len())?;
        Ok(x_new.dot(&(&self.gram_inverse * x_new)))
    }
}

fn check_row(x_new: &DVector<f64>, k: usize) -> Result<()> {
    if x_new.len() != k {
        return Err(domain(format!("new row has {} entries, model has {k} coefficients", x_new.len())));
    }
    Ok(())
}

/// `Σᵢ (yᵢ − xᵢθ)²`.
pub fn sse(data: &Dataset, theta: &DVector<f64>) -> Result<f64> {
    if theta.len() != data.k() {
        return Err(domain(format!("theta has {} entries, design has {} columns", theta.len(), data.k())));
    }
    Ok((data.response() - data.design() * theta).norm_squared())
}

/// Least-squares estimate by QR. Fails on `n < k` or a rank-deficient design
/// (smallest singular value below `1e-10` of the largest).
pub fn ols_fit(data: &Dataset) -> Result<OlsFit> {
    if data.n() < data.k() {
        return Err(domain(format!("need n >= k for least squares, got n = {}, k = {}", data.n(), data.k())));
    }
    check_full_rank(data.design())?;
    let (theta_hat, gram_inverse) = qr_least_squares(data.design(), data.response())?;
    let residuals = data.response() - data.design() * &theta_hat;
    let sse = residuals.norm_squared();
    Ok(OlsFit { theta_hat, residuals, sse, gram_inverse })
}

/// Central value and bounds of a prediction interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionBounds {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    /// Standard error of a new observation, `s·√(1 + leverage)`.
    pub sigma_y: f64,
    pub multiplier: f64,
}

/// Standard error of a new observation at `x_new`.
pub fn prediction_sigma(fit: &OlsFit, x_new: &DVector<f64>) -> Result<f64> {
    Ok((fit.residual_variance()? * (1.0 + fit.leverage(x_new)?)).sqrt())
}

/// Least-squares prediction bounds at level `1 − gamma`.
///
/// Pointwise bounds use the `t(n − k)` quantile at `1 − γ/2`. Simultaneous
/// (Working–Hotelling) bounds use `√(k · F₁₋γ(k, n − k))`.
pub fn ls_prediction_bounds(
    fit: &OlsFit,
    data: &Dataset,
    x_new: &DVector<f64>,
    gamma: f64,
    simultaneous: bool,
) -> Result<PredictionBounds> {
    if fit.theta_hat.len() != data.k() || fit.residuals.len() != data.n() {
        return Err(domain("fit does not belong to this dataset"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let dof = fit.residual_dof()? as f64;
    let center = x_new.dot(&fit.theta_hat);
    let sigma_y = prediction_sigma(fit, x_new)?;
    let k = data.k() as f64;
    let multiplier = if simultaneous {
        (k * f_quantile(1.0 - gamma, k, dof)?).sqrt()
    } else {
        student_t_quantile(dof, 1.0 - 0.5 * gamma)?
    };
    Ok(PredictionBounds {
        center,
        lower: center - multiplier * sigma_y,
        upper: center + multiplier * sigma_y,
        sigma_y,
        multiplier,
    })
}

/// One-sided bound `x̃θ̂ + t(p; n − k)·σ_y`, the value a new observation falls
/// below with probability `p`.
pub fn ls_one_sided_bound(fit: &OlsFit, x_new: &DVector<f64>, p: f64) -> Result<f64> {
    let dof = fit.residual_dof()? as f64;
    let center = x_new.dot(&fit.theta_hat);
    Ok(center + student_t_quantile(dof, p)? * prediction_sigma(fit, x_new)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::Error;
    use proptest::prelude::*;

    fn line() -> Dataset {
        Dataset::with_intercept(&[0.0, 1.0], &[1.0, 3.0]).unwrap()
    }

    fn first_six_rows() -> Dataset {
        fixtures::regression_example().select_rows(&[0, 1, 2, 3, 4, 5]).unwrap()
    }

    // Normal equations solved with 2x2 Cramer's rule.
    fn normal_equations_2(data: &Dataset) -> (f64, f64) {
        let x = data.design();
        let y = data.response();
        let (mut a, mut b, mut d, mut u, mut v) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..data.n() {
            a += x[(i, 0)] * x[(i, 0)];
            b += x[(i, 0)] * x[(i, 1)];
            d += x[(i, 1)] * x[(i, 1)];
            u += x[(i, 0)] * y[i];
            v += x[(i, 1)] * y[i];
        }
        let det = a * d - b * b;
        ((d * u - b * v) / det, (a * v - b * u) / det)
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(DMatrix::zeros(2, 0), DVector::zeros(2)).is_err());
        assert!(Dataset::new(DMatrix::zeros(3, 1), DVector::zeros(2)).is_err());
        let mut m = DMatrix::zeros(2, 1);
        m[(0, 0)] = f64::NAN;
        assert!(Dataset::new(m, DVector::zeros(2)).is_err());
    }

    #[test]
    fn sse_examples() {
        assert_eq!(sse(&line(), &DVector::from_vec(vec![1.0, 2.0])).unwrap(), 0.0);
        let one = Dataset::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 2.0)).unwrap();
        assert_eq!(sse(&one, &DVector::from_element(1, 1.0)).unwrap(), 1.0);
        assert!(sse(&one, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn ols_interpolates_line() {
        let fit = ols_fit(&line()).unwrap();
        assert!((fit.theta_hat[0] - 1.0).abs() < 1e-14);
        assert!((fit.theta_hat[1] - 2.0).abs() < 1e-14);
        assert!(fit.sse < 1e-28);
    }

    #[test]
    fn ols_matches_normal_equations_on_regression_example() {
        let data = first_six_rows();
        let fit = ols_fit(&data).unwrap();
        let (t0, t1) = normal_equations_2(&data);
        assert!((fit.theta_hat[0] - t0).abs() < 1e-12);
        assert!((fit.theta_hat[1] - t1).abs() < 1e-12);
        let want = sse(&data, &DVector::from_vec(vec![t0, t1])).unwrap();
        assert!((fit.sse - want).abs() < 1e-13);
        let xte = data.design().transpose() * &fit.residuals;
        assert!(xte.amax() <= 1e-8 * data.response().norm_squared());
        assert!((&fit.gram_inverse - fit.gram_inverse.transpose()).amax() == 0.0);
    }

    #[test]
    fn ols_rejects_bad_designs() {
        let dup = DMatrix::from_fn(4, 2, |i, _| i as f64 + 1.0);
        let data = Dataset::new(dup, DVector::from_vec(vec![1.0, 2.0, 2.5, 4.0])).unwrap();
        assert!(matches!(ols_fit(&data), Err(Error::Singular { .. })));
        let short = Dataset::new(DMatrix::from_element(1, 2, 1.0), DVector::from_element(1, 1.0)).unwrap();
        assert!(matches!(ols_fit(&short), Err(Error::Domain(_))));
    }

    #[test]
    fn prediction_bound_examples() {
        let data = first_six_rows();
        let fit = ols_fit(&data).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.65]);
        let a = ls_prediction_bounds(&fit, &data, &x, 0.05, false).unwrap();
        let b = ls_prediction_bounds(&fit, &data, &x, 0.3, false).unwrap();
        assert_eq!(a.center, x.dot(&fit.theta_hat));
        assert_eq!(a.center, b.center);
        assert!((a.multiplier - 2.776_445_105_197_793).abs() < 1e-10);
        let w = ls_prediction_bounds(&fit, &data, &x, 0.05, true).unwrap();
        let ratio = (w.upper - w.lower) / (a.upper - a.lower);
        let want = (2.0 * f_quantile(0.95, 2.0, 4.0).unwrap()).sqrt() / student_t_quantile(4.0, 0.025).unwrap().abs();
        assert!((ratio - want).abs() < 1e-12);
        assert!(ratio > 1.0);
        let exact = Dataset::with_intercept(&[0.0, 1.0], &[1.0, 3.0]).unwrap();
        let fit = ols_fit(&exact).unwrap();
        assert!(ls_prediction_bounds(&fit, &exact, &x, 0.05, false).is_err());
    }

    proptest! {
        #[test]
        fn ols_is_optimal(d0 in -1.0f64..1.0, d1 in -1.0f64..1.0, scale in 1e-6f64..1.0) {
            let data = first_six_rows();
            let fit = ols_fit(&data).unwrap();
            let moved = &fit.theta_hat + DVector::from_vec(vec![d0 * scale, d1 * scale]);
            prop_assert!(sse(&data, &moved).unwrap() >= fit.sse);
        }

        #[test]
        fn width_grows_with_leverage(a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let data = first_six_rows();
            let fit = ols_fit(&data).unwrap();
            let xa = DVector::from_vec(vec![1.0, a]);
            let xb = DVector::from_vec(vec![1.0, b]);
            let (la, lb) = (fit.leverage(&xa).unwrap(), fit.leverage(&xb).unwrap());
            let wa = ls_prediction_bounds(&fit, &data, &xa, 0.05, false).unwrap();
            let wb = ls_prediction_bounds(&fit, &data, &xb, 0.05, false).unwrap();
            prop_assert!(la >= 0.0);
            prop_assert!(wa.sigma_y * wa.sigma_y >= fit.residual_variance().unwrap());
            if la <= lb {
                prop_assert!(wa.upper - wa.lower <= (wb.upper - wb.lower) * (1.0 + 1e-14));
            } else {
                prop_assert!(wb.upper - wb.lower <= (wa.upper - wa.lower) * (1.0 + 1e-14));
            }
        }
    }
}
