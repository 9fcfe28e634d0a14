//! Normal-Inverse-Gamma conjugate updates and the `1/σ^q` priors as their
//! limiting states.
//!
//! A limiting prior has `α = (q − k − 2)/2` with `β → 0⁺` and `Σ⁻¹ → 0`. Its
//! posterior is handled by a dedicated code path (`β* = SSE/2`,
//! `Σ* = (xᵀx)⁻¹`, `μ* = θ̂`) rather than by perturbing a proper prior.
//! Truncation of the prior to `(σ₋, σ₊)` enters only through
//! [`prior_log_density`] and the evidence integrals.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dist::{InverseGamma, MultivariateT};
use crate::error::{domain, Error, Result};
use crate::linalg::{spd_inverse, symmetrize};
use crate::linmodel::{ols_fit, Dataset};

/// Which axis the truncated `σ^-q` prior is normalized along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorNormalization {
    /// `Z = ∫ σ^-q dσ²` over `(σ₋², σ₊²)`: a proper density on the variance
    /// axis, matching the `dθ dσ²` measure of the evidence integral.
    #[default]
    Variance,
    /// `Z = ∫ σ^-q dσ` over `(σ₋, σ₊)`.
    Scale,
}

/// The prior `p(θ, σ²) ∝ σ^-q` truncated to `σ ∈ (σ₋, σ₊)`, flat in `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaPowerPrior {
    pub q: f64,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub normalization: PriorNormalization,
}

impl SigmaPowerPrior {
    /// Prior with the default [`PriorNormalization::Variance`].
    pub fn new(q: f64, sigma_minus: f64, sigma_plus: f64) -> Result<Self> {
        Self::with_normalization(q, sigma_minus, sigma_plus, PriorNormalization::default())
    }

    pub fn with_normalization(q: f64, sigma_minus: f64, sigma_plus: f64, normalization: PriorNormalization) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(domain(format!("prior exponent q must be finite and >= 0, got {q}")));
        }
        if !(sigma_minus > 0.0 && sigma_minus < sigma_plus && sigma_plus.is_finite()) {
            return Err(domain(format!("prior support requires 0 < sigma_minus < sigma_plus < inf, got ({sigma_minus}, {sigma_plus})")));
        }
        Ok(Self { q, sigma_minus, sigma_plus, normalization })
    }

    /// `ln Z` for the chosen normalization.
    pub fn ln_normalizer(&self) -> f64 {
        match self.normalization {
            PriorNormalization::Scale => ln_power_integral(self.q, self.sigma_minus, self.sigma_plus),
            // ∫ σ^-q dσ² = 2 ∫ σ^(1-q) dσ
            PriorNormalization::Variance => {
                std::f64::consts::LN_2 + ln_power_integral(self.q - 1.0, self.sigma_minus, self.sigma_plus)
            }
        }
    }

    pub fn sigma2_bounds(&self) -> (f64, f64) {
        (self.sigma_minus * self.sigma_minus, self.sigma_plus * self.sigma_plus)
    }

    pub fn contains_sigma2(&self, sigma2: f64) -> bool {
        let (lo, hi) = self.sigma2_bounds();
        sigma2 > lo && sigma2 < hi
    }

    /// Same exponent and normalization on a different support.
    pub fn with_support(&self, sigma_minus: f64, sigma_plus: f64) -> Result<Self> {
        Self::with_normalization(self.q, sigma_minus, sigma_plus, self.normalization)
    }

    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::with_normalization(q, self.sigma_minus, self.sigma_plus, self.normalization)
    }
}

/// `ln ∫_a^b σ^-q dσ`, written so no branch overflows or cancels.
pub fn ln_power_integral(q: f64, a: f64, b: f64) -> f64 {
    let c = 1.0 - q;
    let span = b.ln() - a.ln();
    if c == 0.0 {
        span.ln()
    } else if c > 0.0 {
        // (b^c − a^c)/c = b^c (1 − e^{−c·span}) / c
        c * b.ln() - c.ln() + (-(-c * span).exp_m1()).ln()
    } else {
        c * a.ln() - (-c).ln() + (-(c * span).exp_m1()).ln()
    }
}

/// Log prior density at `(θ, σ²)`: `−q ln σ − ln Z` inside the support,
/// `−∞` outside. Flat in `θ`.
pub fn prior_log_density(prior: &SigmaPowerPrior, theta: &DVector<f64>, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(domain("theta entries must be finite"));
    }
    if !prior.contains_sigma2(sigma2) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(-0.5 * prior.q * sigma2.ln() - prior.ln_normalizer())
}

/// Normal-Inverse-Gamma parameters `(μ, Σ, α, β)`, stored with the precision
/// `Σ⁻¹`. For a limiting `1/σ^q` state the precision and `β` are zero and
/// `limit_q` records the exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct NigParams {
    pub mu: DVector<f64>,
    pub precision: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub limit_q: Option<f64>,
}

impl NigParams {
    /// Proper prior from `μ`, SPD `Σ`, `α > 0`, `β > 0`.
    pub fn proper(mu: DVector<f64>, sigma: DMatrix<f64>, alpha: f64, beta: f64) -> Result<Self> {
        let k = mu.len();
        if k == 0 || sigma.shape() != (k, k) {
            return Err(domain(format!("mu has length {k} but sigma is {}x{}", sigma.nrows(), sigma.ncols())));
        }
        let precision = spd_inverse(&sigma, "prior covariance")?;
        Self::from_precision(mu, precision, alpha, beta)
    }

    /// Proper prior given `Σ⁻¹` directly.
    pub fn from_precision(mu: DVector<f64>, precision: DMatrix<f64>, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(domain(format!("proper NIG requires alpha, beta > 0, got ({alpha}, {beta})")));
        }
        crate::linalg::cholesky(&precision, "prior precision")?;
        Ok(Self { mu, precision, alpha, beta, limit_q: None })
    }

    pub fn is_limiting(&self) -> bool {
        self.limit_q.is_some()
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    /// `Σ`, or `None` in the limiting state.
    pub fn sigma_matrix(&self) -> Option<DMatrix<f64>> {
        if self.is_limiting() {
            None
        } else {
            spd_inverse(&self.precision, "prior precision").ok()
        }
    }
}

/// The `1/σ^q` prior as a limiting NIG: `α = (q − k − 2)/2`, `β = 0`,
/// `Σ⁻¹ = 0`, `μ = 0`.
pub fn limiting_nig_from_q(q: f64, k: usize) -> NigParams {
    NigParams {
        mu: DVector::zeros(k),
        precision: DMatrix::zeros(k, k),
        alpha: 0.5 * (q - k as f64 - 2.0),
        beta: 0.0,
        limit_q: Some(q),
    }
}

/// Posterior NIG parameters after observing a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorNig {
    pub mu_star: DVector<f64>,
    pub sigma_star: DMatrix<f64>,
    /// `Σ*⁻¹`, kept so the posterior can serve as the next prior without a
    /// second inversion.
    pub precision_star: DMatrix<f64>,
    pub alpha_star: f64,
    pub beta_star: f64,
    /// Residual sum of squares at `μ*`.
    pub sse: f64,
    pub n: usize,
    pub k: usize,
    /// Exponent of the limiting prior this came from, if any.
    pub q: Option<f64>,
}

impl PosteriorNig {
    /// This posterior as a proper prior for further data.
    pub fn as_prior(&self) -> Result<NigParams> {
        NigParams::from_precision(self.mu_star.clone(), self.precision_star.clone(), self.alpha_star, self.beta_star)
    }
}

/// Conjugate update of `prior` with `data`.
///
/// Limiting priors need a full-rank design and `α* = (n + q − k − 2)/2 > 0`;
/// an exact fit (zero SSE) leaves `β* = 0` and is rejected.
pub fn posterior_update(prior: &NigParams, data: &Dataset) -> Result<PosteriorNig> {
    if prior.k() != data.k() {
        return Err(domain(format!("prior has {} coefficients, design has {} columns", prior.k(), data.k())));
    }
    let n = data.n();
    let alpha_star = prior.alpha + 0.5 * n as f64;
    if let Some(q) = prior.limit_q {
        if alpha_star <= 0.0 {
            // smallest n with α + n/2 > 0
            let min_n = (-2.0 * prior.alpha).floor() as usize + 1;
            return Err(Error::ImproperPosterior { alpha_star, min_n });
        }
        let fit = ols_fit(data)?;
        let scale = data.response().norm_squared();
        if n == data.k() || fit.sse <= 1e-24 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::DegeneratePosterior(format!(
                "exact fit (SSE = {:e}) leaves beta* = 0",
                fit.sse
            )));
        }
        let precision_star = symmetrize(&(data.design().transpose() * data.design()));
        return Ok(PosteriorNig {
            mu_star: fit.theta_hat,
            sigma_star: fit.gram_inverse,
            precision_star,
            alpha_star,
            beta_star: 0.5 * fit.sse,
            sse: fit.sse,
            n,
            k: data.k(),
            q: Some(q),
        });
    }
    let (mu_star, sigma_star, precision_star, beta_star, sse) =
        proper_update_raw(&prior.mu, &prior.precision, prior.beta, data)?;
    if !(beta_star > 0.0) {
        return Err(Error::Numeric(format!("updated beta* = {beta_star:e} is not positive")));
    }
    Ok(PosteriorNig { mu_star, sigma_star, precision_star, alpha_star, beta_star, sse, n, k: data.k(), q: None })
}

/// Proper-prior update formulas without validating `α` or `β`, so that
/// ε-regularized approximations of the limiting state can be evaluated.
/// Returns `(μ*, Σ*, Σ*⁻¹, β*, SSE(μ*))`.
#[allow(clippy::type_complexity)]
pub(crate) fn proper_update_raw(
    mu: &DVector<f64>,
    precision: &DMatrix<f64>,
    beta: f64,
    data: &Dataset,
) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>, f64, f64)> {
    let x = data.design();
    let y = data.response();
    let precision_star = symmetrize(&(precision + x.transpose() * x));
    let sigma_star = spd_inverse(&precision_star, "posterior precision")?;
    let mu_star = &sigma_star * (precision * mu + x.transpose() * y);
    let resid = y - x * &mu_star;
    let sse = resid.norm_squared();
    let shift = &mu_star - mu;
    // β + ½[(y − xμ*)ᵀ(y − xμ*) + (μ* − μ)ᵀΣ⁻¹(μ* − μ)], the cancellation-free form
    let beta_star = beta + 0.5 * (sse + shift.dot(&(precision * &shift)));
    Ok((mu_star, sigma_star, precision_star, beta_star, sse))
}

fn check_proper(post: &PosteriorNig) -> Result<()> {
    if !(post.alpha_star > 0.0 && post.beta_star > 0.0) {
        return Err(domain(format!(
            "posterior needs alpha*, beta* > 0, got ({}, {})",
            post.alpha_star, post.beta_star
        )));
    }
    Ok(())
}

/// Marginal posterior of `σ²`: `IG(α*, β*)`.
pub fn marginal_sigma2(post: &PosteriorNig) -> Result<InverseGamma> {
    check_proper(post)?;
    InverseGamma::new(post.alpha_star, post.beta_star)
}

/// Marginal posterior of `θ`: multivariate t with `2α*` degrees of freedom,
/// location `μ*` and scale `(β*/α*)Σ*`.
pub fn marginal_theta(post: &PosteriorNig) -> Result<MultivariateT> {
    check_proper(post)?;
    let scale = &post.sigma_star * (post.beta_star / post.alpha_star);
    MultivariateT::new(2.0 * post.alpha_star, post.mu_star.clone(), symmetrize(&scale))
}

/// Posterior predictive at the rows of `x_new`.
///
/// With `include_noise` this is the distribution of new observations,
/// scale `(β*/α*)(I + x̃Σ*x̃ᵀ)`; without it, the distribution of the mean
/// response `x̃θ`, scale `(β*/α*)x̃Σ*x̃ᵀ`.
pub fn predictive(post: &PosteriorNig, x_new: &DMatrix<f64>, include_noise: bool) -> Result<MultivariateT> {
    check_proper(post)?;
    if x_new.ncols() != post.k || x_new.nrows() == 0 {
        return Err(domain(format!(
            "prediction rows must be nonempty with {} columns, got {}x{}",
            post.k,
            x_new.nrows(),
            x_new.ncols()
        )));
    }
    let m = x_new.nrows();
    let mut cov = x_new * &post.sigma_star * x_new.transpose();
    if include_noise {
        cov += DMatrix::identity(m, m);
    }
    let scale = symmetrize(&(cov * (post.beta_star / post.alpha_star)));
    let location = x_new * &post.mu_star;
    MultivariateT::new(2.0 * post.alpha_star, location, scale).map_err(|e| match e {
        Error::LinAlg(_) if !include_noise => {
            Error::DegeneratePosterior("mean-response scale x Sigma* x^T is singular for these rows".into())
        }
        other => other,
    })
}

/// Predictive for a single row.
pub fn predictive_row(post: &PosteriorNig, x_new: &DVector<f64>, include_noise: bool) -> Result<crate::dist::StudentT> {
    predictive(post, &DMatrix::from_row_slice(1, x_new.len(), x_new.as_slice()), include_noise)?.marginal(0)
}
