//! Numerical Fisher information, KL divergence and power-law exponents of
//! Jeffreys and ALI priors for one-dimensional parametric families.
//!
//! Expectations over `x` use adaptive Gauss–Kronrod quadrature over the
//! family's range; parameter derivatives are central differences.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::diff;
use crate::error::{domain, Error, Result};
use crate::linalg::spd_inverse;
use crate::quad::integrate;

type LogDensity = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type Range = Arc<dyn Fn(&[f64]) -> (f64, f64) + Send + Sync>;
type Ray = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
type ClosedKl = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

const QUAD_ABS: f64 = 1e-13;
const QUAD_REL: f64 = 1e-12;
// integrands built from finite differences carry ~1e-9 round-off noise
const DERIV_ABS: f64 = 1e-8;
const DERIV_REL: f64 = 1e-8;

/// Scales at which power-law exponents are read off.
pub const SIGMA_RAY: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// A family of densities `p(x | φ)` on the real line.
#[derive(Clone)]
pub struct ParamFamily {
    pub name: String,
    pub param_names: Vec<String>,
    log_density: LogDensity,
    quadrature_range: Range,
    at_scale: Ray,
    closed_form_kl: Option<ClosedKl>,
}

impl std::fmt::Debug for ParamFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParamFamily").field("name", &self.name).field("param_names", &self.param_names).finish()
    }
}

impl ParamFamily {
    /// `at_scale(σ)` maps a scale to the parameter point used when exponents
    /// are extracted along a ray of scales.
    pub fn new(
        name: impl Into<String>,
        param_names: &[&str],
        log_density: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        quadrature_range: impl Fn(&[f64]) -> (f64, f64) + Send + Sync + 'static,
        at_scale: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            param_names: param_names.iter().map(|s| s.to_string()).collect(),
            log_density: Arc::new(log_density),
            quadrature_range: Arc::new(quadrature_range),
            at_scale: Arc::new(at_scale),
            closed_form_kl: None,
        }
    }

    /// Attach an exact KL divergence used to reconcile the quadrature value.
    pub fn with_closed_form_kl(mut self, kl: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.closed_form_kl = Some(Arc::new(kl));
        self
    }

    pub fn dim(&self) -> usize {
        self.param_names.len()
    }

    pub fn log_density(&self, x: f64, params: &[f64]) -> f64 {
        (self.log_density)(x, params)
    }

    pub fn quadrature_range(&self, params: &[f64]) -> (f64, f64) {
        (self.quadrature_range)(params)
    }

    pub fn at_scale(&self, sigma: f64) -> Vec<f64> {
        (self.at_scale)(sigma)
    }

    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.param_names
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| domain(format!("family {} has no parameter {name}", self.name)))
    }

    /// `∫ p(x | φ) dx` over the quadrature range.
    pub fn total_mass(&self, params: &[f64]) -> Result<f64> {
        self.check(params)?;
        let (lo, hi) = self.quadrature_range(params);
        integrate(|x| self.log_density(x, params).exp(), lo, hi, QUAD_ABS, QUAD_REL)
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.dim() {
            return Err(domain(format!("family {} takes {} parameters, got {}", self.name, self.dim(), params.len())));
        }
        Ok(())
    }
}

fn gaussian_ln(x: f64, mu: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - 0.5 * (x - mu).powi(2) / var
}

fn gaussian_kl(mu_a: f64, var_a: f64, mu_b: f64, var_b: f64) -> f64 {
    0.5 * ((var_b / var_a).ln() + (var_a + (mu_a - mu_b).powi(2)) / var_b - 1.0)
}

fn range12(mu: f64, sd: f64) -> (f64, f64) {
    (mu - 12.0 * sd, mu + 12.0 * sd)
}

/// Gaussian in `(μ, σ²)`.
pub fn gaussian_mean_variance() -> ParamFamily {
    ParamFamily::new(
        "gaussian(mu, sigma2)",
        &["mu", "sigma2"],
        |x, p| gaussian_ln(x, p[0], p[1]),
        |p| range12(p[0], p[1].sqrt()),
        |s| vec![0.0, s * s],
    )
    .with_closed_form_kl(|a, b| gaussian_kl(a[0], a[1], b[0], b[1]))
}

/// Gaussian in `(μ, σ)`.
pub fn gaussian_mean_sd() -> ParamFamily {
    ParamFamily::new(
        "gaussian(mu, sigma)",
        &["mu", "sigma"],
        |x, p| gaussian_ln(x, p[0], p[1] * p[1]),
        |p| range12(p[0], p[1]),
        |s| vec![0.0, s],
    )
    .with_closed_form_kl(|a, b| gaussian_kl(a[0], a[1] * a[1], b[0], b[1] * b[1]))
}

/// Gaussian in `σ²` with known mean `mu`.
pub fn gaussian_variance(mu: f64) -> ParamFamily {
    ParamFamily::new(
        "gaussian(sigma2 | mu)",
        &["sigma2"],
        move |x, p| gaussian_ln(x, mu, p[0]),
        move |p| range12(mu, p[0].sqrt()),
        |s| vec![s * s],
    )
    .with_closed_form_kl(move |a, b| gaussian_kl(mu, a[0], mu, b[0]))
}

/// Gaussian in `σ` with known mean `mu`.
pub fn gaussian_sd(mu: f64) -> ParamFamily {
    ParamFamily::new(
        "gaussian(sigma | mu)",
        &["sigma"],
        move |x, p| gaussian_ln(x, mu, p[0] * p[0]),
        move |p| range12(mu, p[0]),
        |s| vec![s],
    )
    .with_closed_form_kl(move |a, b| gaussian_kl(mu, a[0] * a[0], mu, b[0] * b[0]))
}

/// Fisher information at a parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    /// `−E[∇² ln p]`.
    pub matrix: DMatrix<f64>,
    /// `E[∇ln p ∇ln pᵀ]`.
    pub score_form: DMatrix<f64>,
    pub params: Vec<f64>,
    /// Largest entrywise gap between the two forms, relative to
    /// `√(Iᵢᵢ Iⱼⱼ)`.
    pub max_rel_diff: f64,
}

/// Relative gap tolerated between the Hessian and score forms.
pub const FORM_AGREEMENT: f64 = 1e-4;

fn steps_second(params: &[f64]) -> DVector<f64> {
    diff::scaled_steps(&DVector::from_column_slice(params), diff::step_second())
}

fn steps_first(params: &[f64]) -> DVector<f64> {
    diff::scaled_steps(&DVector::from_column_slice(params), diff::step_first())
}

fn param_hessian(family: &ParamFamily, x: f64, params: &[f64], h: &DVector<f64>) -> DMatrix<f64> {
    diff::hessian(|p: &DVector<f64>| family.log_density(x, p.as_slice()), &DVector::from_column_slice(params), h)
}

fn param_gradient(family: &ParamFamily, x: f64, params: &[f64], h: &DVector<f64>) -> DVector<f64> {
    diff::gradient(|p: &DVector<f64>| family.log_density(x, p.as_slice()), &DVector::from_column_slice(params), h)
}

/// Expectation of a matrix-valued function of `x`, entry by entry.
fn expect_matrix<F: Fn(f64) -> DMatrix<f64>>(family: &ParamFamily, params: &[f64], f: F, symmetric: bool) -> Result<DMatrix<f64>> {
    let (lo, hi) = family.quadrature_range(params);
    let d = family.dim();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if symmetric && j < i {
                out[(i, j)] = out[(j, i)];
                continue;
            }
            out[(i, j)] = integrate(|x| family.log_density(x, params).exp() * f(x)[(i, j)], lo, hi, DERIV_ABS, DERIV_REL)?;
        }
    }
    Ok(out)
}

/// Fisher information by quadrature of the finite-difference Hessian of
/// `ln p`, cross-checked against the score outer-product form.
pub fn fisher_info_numeric(family: &ParamFamily, params: &[f64]) -> Result<InfoMatrix> {
    family.check(params)?;
    let h2 = steps_second(params);
    let h1 = steps_first(params);
    let matrix = -expect_matrix(family, params, |x| param_hessian(family, x, params, &h2), true)?;
    let score_form = expect_matrix(
        family,
        params,
        |x| {
            let g = param_gradient(family, x, params, &h1);
            &g * g.transpose()
        },
        true,
    )?;
    let d = family.dim();
    let mut max_rel_diff: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let scale = (matrix[(i, i)] * matrix[(j, j)]).abs().sqrt().max(f64::MIN_POSITIVE);
            max_rel_diff = max_rel_diff.max((matrix[(i, j)] - score_form[(i, j)]).abs() / scale);
        }
    }
    if max_rel_diff > FORM_AGREEMENT {
        return Err(Error::Numeric(format!(
            "Hessian and score forms of the Fisher information disagree by {max_rel_diff:e} at {params:?}"
        )));
    }
    Ok(InfoMatrix { matrix, score_form, params: params.to_vec(), max_rel_diff })
}

/// Monte Carlo Fisher information `mean(∇ln p ∇ln pᵀ)` over supplied draws
/// from `p(· | params)`.
pub fn fisher_monte_carlo(family: &ParamFamily, params: &[f64], draws: &[f64]) -> Result<DMatrix<f64>> {
    family.check(params)?;
    if draws.is_empty() {
        return Err(domain("Monte Carlo Fisher information needs at least one draw"));
    }
    let h = steps_first(params);
    let d = family.dim();
    let mut acc = DMatrix::zeros(d, d);
    for &x in draws {
        let g = param_gradient(family, x, params, &h);
        acc += &g * g.transpose();
    }
    Ok(acc / draws.len() as f64)
}

/// `n` draws from `N(mu, sigma²)` on a ChaCha8 stream seeded with `seed`.
pub fn gaussian_draws(mu: f64, sigma: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(mu, sigma).map_err(|e| domain(format!("bad normal parameters ({mu}, {sigma}): {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// A power law `c · σ^-q` fitted along [`SIGMA_RAY`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// Largest deviation of the log values from the fitted line.
    pub residual: f64,
    pub sigmas: Vec<f64>,
    pub log_values: Vec<f64>,
}

/// Largest tolerated deviation from a pure power law.
pub const POWER_LAW_TOL: f64 = 1e-6;

fn power_law(sigmas: &[f64], log_values: Vec<f64>) -> Result<ExponentFit> {
    let last = sigmas.len() - 1;
    let exponent = -(log_values[last] - log_values[0]) / (sigmas[last].ln() - sigmas[0].ln());
    let c = log_values[0] + exponent * sigmas[0].ln();
    let residual = sigmas.iter().zip(&log_values).map(|(s, v)| (v - (c - exponent * s.ln())).abs()).fold(0.0, f64::max);
    if residual > POWER_LAW_TOL {
        return Err(Error::Shape(format!("not a power law along the scale ray: residual {residual:e}")));
    }
    Ok(ExponentFit { exponent, residual, sigmas: sigmas.to_vec(), log_values })
}

fn free_indices(family: &ParamFamily, free: &[&str]) -> Result<Vec<usize>> {
    if free.is_empty() {
        return Err(domain("at least one free parameter is required"));
    }
    free.iter().map(|n| family.param_index(n)).collect()
}

/// Exponent `q` of the Jeffreys prior `√det I ∝ σ^-q` over the `free`
/// parameters (the rest held at their ray values).
pub fn jeffreys_exponent(family: &ParamFamily, free: &[&str]) -> Result<ExponentFit> {
    let idx = free_indices(family, free)?;
    let mut log_values = Vec::with_capacity(SIGMA_RAY.len());
    for &s in &SIGMA_RAY {
        let info = fisher_info_numeric(family, &family.at_scale(s))?;
        let sub = info.matrix.select_rows(&idx).select_columns(&idx);
        let det = sub.determinant();
        if !(det > 0.0) {
            return Err(Error::Numeric(format!("Fisher information over {free:?} is not positive definite at scale {s}")));
        }
        log_values.push(0.5 * det.ln());
    }
    power_law(&SIGMA_RAY, log_values)
}

/// Gradient of `ln π` for the ALI prior over the `free` parameters:
/// `∂ ln π/∂φₖ = Σᵢⱼ (I⁻¹)ᵢⱼ E[∂²ln p/∂φᵢ∂φₖ · ∂ln p/∂φⱼ]`. With one free
/// parameter this is `−E[f₁f₂]/E[f₂]`.
pub fn ali_log_prior_gradient(family: &ParamFamily, params: &[f64], free: &[usize]) -> Result<DVector<f64>> {
    family.check(params)?;
    let h1 = steps_first(params);
    let h2 = steps_second(params);
    let info = fisher_info_numeric(family, params)?;
    let sub = info.matrix.select_rows(free).select_columns(free);
    let inv = spd_inverse(&sub, "Fisher information")?;
    let m = free.len();
    let (lo, hi) = family.quadrature_range(params);
    // third[(i, k, j)] = E[l_ik l_j]
    let mut grad = DVector::zeros(m);
    let mut third = vec![0.0; m * m * m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let (i, k, j) = (free[a], free[b], free[c]);
                third[(a * m + b) * m + c] = integrate(
                    |x| {
                        let hess = param_hessian(family, x, params, &h2);
                        let g = param_gradient(family, x, params, &h1);
                        family.log_density(x, params).exp() * hess[(i, k)] * g[j]
                    },
                    lo,
                    hi,
                    DERIV_ABS,
                    DERIV_REL,
                )?;
            }
        }
    }
    for b in 0..m {
        let mut s = 0.0;
        for a in 0..m {
            for c in 0..m {
                s += inv[(a, c)] * third[(a * m + b) * m + c];
            }
        }
        grad[b] = s;
    }
    Ok(grad)
}

/// Exponent `q` of the ALI prior `π ∝ σ^-q` over the `free` parameters,
/// from `d ln π / d ln σ` along the scale ray.
pub fn ali_exponent(family: &ParamFamily, free: &[&str]) -> Result<ExponentFit> {
    let idx = free_indices(family, free)?;
    let mut slopes = Vec::with_capacity(SIGMA_RAY.len());
    let dh = 1e-4f64;
    for &s in &SIGMA_RAY {
        let params = family.at_scale(s);
        let g = ali_log_prior_gradient(family, &params, &idx)?;
        let up = family.at_scale(s * dh.exp());
        let down = family.at_scale(s * (-dh).exp());
        let mut slope = 0.0;
        for (b, &i) in idx.iter().enumerate() {
            slope += g[b] * (up[i] - down[i]) / (2.0 * dh);
        }
        slopes.push(-slope);
    }
    // a pure power law has the same log-log slope at every scale
    let exponent = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let residual = slopes.iter().map(|q| (q - exponent).abs()).fold(0.0, f64::max);
    if residual > POWER_LAW_TOL {
        return Err(Error::Shape(format!("ALI prior is not a power law along the scale ray: slopes {slopes:?}")));
    }
    let log_values = SIGMA_RAY.iter().map(|s| -exponent * s.ln()).collect();
    Ok(ExponentFit { exponent, residual, sigmas: SIGMA_RAY.to_vec(), log_values })
}

/// `KL(p_a ‖ p_b) = ∫ p_a ln(p_a / p_b)` over the range of `p_a`.
///
/// Families with a closed form are reconciled against it to `1e-8`.
pub fn kl_divergence(family: &ParamFamily, params_true: &[f64], params_other: &[f64]) -> Result<f64> {
    family.check(params_true)?;
    family.check(params_other)?;
    let (lo, hi) = family.quadrature_range(params_true);
    let v = integrate(
        |x| {
            let la = family.log_density(x, params_true);
            let lb = family.log_density(x, params_other);
            if la == f64::NEG_INFINITY {
                0.0
            } else {
                la.exp() * (la - lb)
            }
        },
        lo,
        hi,
        QUAD_ABS,
        QUAD_REL,
    )?;
    if !v.is_finite() {
        return Err(Error::Numeric(format!("KL divergence diverges between {params_true:?} and {params_other:?}")));
    }
    if let Some(exact) = &family.closed_form_kl {
        let e = exact(params_true, params_other);
        if (v - e).abs() > 1e-8 * e.abs().max(1.0) {
            return Err(Error::Numeric(format!("KL quadrature {v:e} disagrees with closed form {e:e}")));
        }
    }
    Ok(v)
}

/// Hessian of `KL(p_φ ‖ p_ψ)` in `ψ` at `ψ = φ`, compared with the Fisher
/// information.
#[derive(Debug, Clone, PartialEq)]
pub struct KlHessianCheck {
    pub hessian: DMatrix<f64>,
    pub fisher: InfoMatrix,
    pub max_abs_diff: f64,
    /// Gradient of the KL in its second argument at the truth.
    pub gradient: DVector<f64>,
}

pub fn kl_hessian_check(family: &ParamFamily, params: &[f64]) -> Result<KlHessianCheck> {
    let fisher = fisher_info_numeric(family, params)?;
    let at = DVector::from_column_slice(params);
    let kl = |p: &DVector<f64>| kl_divergence(family, params, p.as_slice()).unwrap_or(f64::NAN);
    let hessian = diff::hessian(kl, &at, &steps_second(params));
    let gradient = diff::gradient(kl, &at, &steps_first(params));
    if hessian.iter().chain(gradient.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("KL derivatives are not finite at {params:?}")));
    }
    let max_abs_diff = (&hessian - &fisher.matrix).amax();
    Ok(KlHessianCheck { hessian, fisher, max_abs_diff, gradient })
}
