//! Global likelihood `P(y) = ∫ p(y | θ, σ²) p(θ, σ²) dθ dσ²` under truncated
//! `1/σ^q` priors.
//!
//! [`laplace_evidence`] works in `(θ, σ²)` coordinates: the mode is located by
//! simplex search in `(θ, ln σ²)` and the curvature is taken by central
//! differences in `(θ, σ²)`. [`grid_evidence`] is a brute-force quadrature
//! oracle in whitened coordinates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::PI;

use crate::conjugate::{PriorNormalization, SigmaPowerPrior};
use crate::diff;
use crate::error::{domain, Error, Result};
use crate::linalg::{cholesky, spd_inverse};
use crate::linmodel::{ols_fit, Dataset};
use crate::optim::{nelder_mead, SimplexOptions};
use crate::quad::log_integral_grid;

/// Prior support multipliers applied to the OLS residual scale by
/// [`default_support`].
pub const DEFAULT_SUPPORT_FACTORS: (f64, f64) = (1e-4, 1e3);

/// Log prior plus Gaussian log likelihood, with the prior normalizer cached.
struct JointEval<'a> {
    data: &'a Dataset,
    q: f64,
    ln_z: f64,
    bounds: (f64, f64),
}

impl<'a> JointEval<'a> {
    fn new(data: &'a Dataset, prior: &SigmaPowerPrior) -> Self {
        Self { data, q: prior.q, ln_z: prior.ln_normalizer(), bounds: prior.sigma2_bounds() }
    }

    fn given_sse(&self, sse: f64, sigma2: f64) -> f64 {
        if !(sigma2 > self.bounds.0 && sigma2 < self.bounds.1) {
            return f64::NEG_INFINITY;
        }
        let n = self.data.n() as f64;
        let ln_s2 = sigma2.ln();
        -0.5 * self.q * ln_s2 - self.ln_z - 0.5 * n * ((2.0 * PI).ln() + ln_s2) - 0.5 * sse / sigma2
    }

    fn at(&self, theta: &[f64], sigma2: f64) -> f64 {
        let x = self.data.design();
        let y = self.data.response();
        let mut sse = 0.0;
        for i in 0..self.data.n() {
            let mut r = y[i];
            for (j, t) in theta.iter().enumerate() {
                r -= x[(i, j)] * t;
            }
            sse += r * r;
        }
        self.given_sse(sse, sigma2)
    }
}

/// `ln[p(θ, σ²) p(y | θ, σ²)]`; `−∞` outside the prior support.
pub fn log_joint(data: &Dataset, prior: &SigmaPowerPrior, theta: &DVector<f64>, sigma2: f64) -> Result<f64> {
    if theta.len() != data.k() {
        return Err(domain(format!("theta has {} entries, design has {} columns", theta.len(), data.k())));
    }
    if !(sigma2 > 0.0) {
        return Err(domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(JointEval::new(data, prior).at(theta.as_slice(), sigma2))
}

/// Laplace approximation of `ln ∫ exp(f)` about `mode`, with Hessian steps `h`.
///
/// Returns `(ln integral, covariance)` where the covariance is the inverse of
/// the negative Hessian.
pub fn laplace_log_integral<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    mode: &DVector<f64>,
    h: &DVector<f64>,
) -> Result<(f64, DMatrix<f64>)> {
    let peak = f(mode);
    if !peak.is_finite() {
        return Err(Error::Curvature(format!("integrand is {peak} at the mode")));
    }
    let neg_h = -diff::hessian(&f, mode, h);
    let chol = cholesky(&neg_h, "negative Hessian").map_err(|_| {
        Error::Curvature(format!("Hessian at the mode is not negative definite: {:?}", neg_h.as_slice()))
    })?;
    let ln_det_neg_h = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let cov = spd_inverse(&neg_h, "negative Hessian")?;
    let d = mode.len() as f64;
    Ok((peak + 0.5 * d * (2.0 * PI).ln() - 0.5 * ln_det_neg_h, cov))
}

/// Mode, local covariance and Laplace log-evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceResult {
    /// `(θ, σ²)` at the maximum of the log joint.
    pub mode: DVector<f64>,
    /// Inverse of the negative finite-difference Hessian at the mode.
    pub covariance: DMatrix<f64>,
    pub log_evidence: f64,
    pub log_joint_at_mode: f64,
}

fn default_init(data: &Dataset, prior: &SigmaPowerPrior) -> Result<DVector<f64>> {
    let fit = ols_fit(data)?;
    let (lo, hi) = prior.sigma2_bounds();
    let mut s2 = fit.sse / data.n() as f64;
    if !(s2 > lo && s2 < hi) {
        s2 = (lo * hi).sqrt();
    }
    let mut v = fit.theta_hat.clone().insert_row(data.k(), 0.0);
    v[data.k()] = s2;
    Ok(v)
}

/// Laplace approximation of the log-evidence.
///
/// The mode search starts at `init` (or at the OLS estimate with
/// `σ² = SSE/n`) and restarts at half and double the starting variance; the
/// best converged run wins.
pub fn laplace_evidence(data: &Dataset, prior: &SigmaPowerPrior, init: Option<&DVector<f64>>) -> Result<LaplaceResult> {
    let k = data.k();
    let start = match init {
        Some(v) => {
            if v.len() != k + 1 || !(v[k] > 0.0) {
                return Err(domain(format!("init must have {} entries with positive variance", k + 1)));
            }
            v.clone()
        }
        None => default_init(data, prior)?,
    };
    let joint = JointEval::new(data, prior);
    if !joint.at(&start.as_slice()[..k], start[k]).is_finite() {
        return Err(Error::Initialization(format!("log joint is not finite at the start point {:?}", start.as_slice())));
    }
    // internal coordinates (θ, ln σ²)
    let neg = |v: &DVector<f64>| -joint.at(&v.as_slice()[..k], v[k].exp());
    let theta_step = {
        let g = ols_fit(data).map(|f| f.gram_inverse.diagonal()).ok();
        DVector::from_fn(k, |j, _| {
            let sd = g.as_ref().map(|d| (d[j] * start[k]).sqrt()).unwrap_or(0.0);
            if sd.is_finite() && sd > 0.0 {
                sd
            } else {
                0.1 * start[j].abs().max(1.0)
            }
        })
    };
    let step = theta_step.insert_row(k, 0.3);
    let mut best: Option<crate::optim::SimplexResult> = None;
    let mut any_converged = false;
    for factor in [1.0, 0.5, 2.0] {
        let mut x0 = start.clone();
        x0[k] = (start[k] * factor).ln();
        if !neg(&x0).is_finite() {
            continue;
        }
        let run = nelder_mead(neg, &x0, &step, SimplexOptions::default());
        any_converged |= run.converged;
        let better = match &best {
            None => true,
            Some(b) => (run.converged && !b.converged) || (run.converged == b.converged && run.value < b.value),
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.ok_or_else(|| Error::Initialization("no restart point lies inside the prior support".into()))?;
    if !any_converged {
        let mut last = best.x.clone();
        last[k] = last[k].exp();
        return Err(Error::Convergence { iterations: best.iterations, last: last.as_slice().to_vec() });
    }
    let mut mode = best.x.clone();
    mode[k] = mode[k].exp();

    let (lo, hi) = prior.sigma2_bounds();
    let base = diff::step_first();
    let mut h = diff::scaled_steps(&mode, base);
    let s2 = mode[k];
    if s2 - h[k] <= lo || s2 + h[k] >= hi {
        h[k] = base * s2;
        if s2 - h[k] <= lo || s2 + h[k] >= hi {
            h[k] = 0.5 * (s2 - lo).min(hi - s2);
        }
    }
    let f = |v: &DVector<f64>| joint.at(&v.as_slice()[..k], v[k]);
    let (log_evidence, covariance) = laplace_log_integral(f, &mode, &h)?;
    Ok(LaplaceResult { log_joint_at_mode: f(&mode), mode, covariance, log_evidence })
}

/// Integration box for [`grid_evidence`] in whitened coordinates: each
/// `zⱼ ∈ [−z_half_width, z_half_width]` and `ln σ² ∈ ln_sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridBox {
    pub z_half_width: f64,
    pub ln_sigma2: (f64, f64),
}

impl GridBox {
    /// `z` within ±8 and `ln σ²` over the region where the profile integrand
    /// is within 40 nats of its peak, clipped to the prior support.
    pub fn auto(data: &Dataset, prior: &SigmaPowerPrior) -> Result<Self> {
        let fit = ols_fit(data)?;
        let joint = JointEval::new(data, prior);
        let k = data.k() as f64;
        let theta = fit.theta_hat.as_slice();
        // log integrand along θ = θ̂ with the σ^k and σ² Jacobians
        let h = |t: f64| joint.at(theta, t.exp()) + (0.5 * k + 1.0) * t;
        let (lo, hi) = prior.sigma2_bounds();
        let (mut a, mut b) = (lo.ln(), hi.ln());
        let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - inv_phi * (b - a);
            let d = a + inv_phi * (b - a);
            if h(c) >= h(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let peak_t = 0.5 * (a + b);
        let peak = h(peak_t);
        if !peak.is_finite() {
            return Err(Error::Numeric("profile integrand has no finite peak inside the prior support".into()));
        }
        let cut = peak - 40.0;
        let edge = |mut inside: f64, mut outside: f64| {
            if h(outside) >= cut {
                return outside;
            }
            for _ in 0..200 {
                let m = 0.5 * (inside + outside);
                if h(m) >= cut {
                    inside = m;
                } else {
                    outside = m;
                }
            }
            outside
        };
        Ok(Self { z_half_width: 8.0, ln_sigma2: (edge(peak_t, lo.ln()), edge(peak_t, hi.ln())) })
    }
}

/// Grid quadrature result at `resolution`, with the change from half
/// resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridEvidence {
    pub log_evidence: f64,
    /// `result(resolution) − result(resolution / 2)`.
    pub delta: f64,
    pub resolution: usize,
    pub grid_box: GridBox,
}

/// `ln P(y)` on a single tensor grid with `resolution` nodes per axis.
///
/// Coordinates are `θ = θ̂ + σ L z` with `L Lᵀ = (xᵀx)⁻¹` and `t = ln σ²`, so
/// the integrand carries the Jacobian `σ^k |L| σ²`.
pub fn grid_log_evidence(data: &Dataset, prior: &SigmaPowerPrior, grid_box: &GridBox, resolution: usize) -> Result<f64> {
    let (lo, hi) = prior.sigma2_bounds();
    let (t0, t1) = grid_box.ln_sigma2;
    let t0 = t0.max(lo.ln());
    let t1 = t1.min(hi.ln());
    if !(t0 < t1) {
        return Err(domain(format!(
            "grid variance range ({:e}, {:e}) lies outside the prior support ({lo:e}, {hi:e})",
            grid_box.ln_sigma2.0.exp(),
            grid_box.ln_sigma2.1.exp()
        )));
    }
    if !(grid_box.z_half_width > 0.0) {
        return Err(domain("grid half width must be positive"));
    }
    let fit = ols_fit(data)?;
    let k = data.k();
    let l = cholesky(&fit.gram_inverse, "inverse Gram matrix")?.l();
    let ln_det_l: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
    let joint = JointEval::new(data, prior);
    let xl = data.design() * &l;
    let r0 = data.response() - data.design() * &fit.theta_hat;
    let n = data.n();
    let integrand = |p: &[f64]| {
        let t = p[k];
        let sigma = (0.5 * t).exp();
        let mut sse = 0.0;
        for i in 0..n {
            let mut r = r0[i];
            for j in 0..k {
                r -= sigma * xl[(i, j)] * p[j];
            }
            sse += r * r;
        }
        joint.given_sse(sse, t.exp()) + 0.5 * k as f64 * t + ln_det_l + t
    };
    let w = grid_box.z_half_width;
    let mut lo_v = vec![-w; k];
    let mut hi_v = vec![w; k];
    lo_v.push(t0);
    hi_v.push(t1);
    log_integral_grid(integrand, &lo_v, &hi_v, resolution)
}

/// Brute-force quadrature oracle for the log-evidence.
///
/// Uses [`GridBox::auto`] unless a box is supplied. `resolution` must be at
/// least 32; the result reports its change from half resolution.
pub fn grid_evidence(
    data: &Dataset,
    prior: &SigmaPowerPrior,
    grid_box: Option<&GridBox>,
    resolution: usize,
) -> Result<GridEvidence> {
    if resolution < 32 {
        return Err(domain(format!("grid resolution must be at least 32, got {resolution}")));
    }
    let grid_box = match grid_box {
        Some(b) => *b,
        None => GridBox::auto(data, prior)?,
    };
    let full = grid_log_evidence(data, prior, &grid_box, resolution)?;
    let half = grid_log_evidence(data, prior, &grid_box, resolution / 2)?;
    Ok(GridEvidence { log_evidence: full, delta: full - half, resolution, grid_box })
}

/// Fitting and predictive evidence for one prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveEvidence {
    /// `ln P(ỹ, y)`: Laplace evidence of observed and future rows together.
    pub log_joint: f64,
    /// `ln P(ỹ | y) = ln P(ỹ, y) − ln P(y)`.
    pub log_conditional: f64,
    pub fit: LaplaceResult,
    pub joint: LaplaceResult,
}

/// Predictive evidence of `future` given `data`.
///
/// The joint term is the Laplace evidence of the stacked dataset, so an empty
/// `future` reproduces [`laplace_evidence`] exactly.
pub fn predictive_evidence(data: &Dataset, future: &Dataset, prior: &SigmaPowerPrior) -> Result<PredictiveEvidence> {
    let fit = laplace_evidence(data, prior, None)?;
    let joint = laplace_evidence(&data.concat(future)?, prior, None)?;
    Ok(PredictiveEvidence {
        log_joint: joint.log_evidence,
        log_conditional: joint.log_evidence - fit.log_evidence,
        fit,
        joint,
    })
}

/// `(1e-4·s, 1e3·s)` with `s = √(SSE/(n − k))` from the OLS fit.
pub fn default_support(data: &Dataset) -> Result<(f64, f64)> {
    let fit = ols_fit(data)?;
    let s2 = fit.residual_variance()?;
    if !(s2 > 0.0) {
        return Err(Error::DegeneratePosterior("zero residual variance, cannot scale the prior support".into()));
    }
    let s = s2.sqrt();
    Ok((DEFAULT_SUPPORT_FACTORS.0 * s, DEFAULT_SUPPORT_FACTORS.1 * s))
}

/// Per-exponent fitting and predictive log-evidence on a shared support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorComparison {
    pub q_values: Vec<f64>,
    /// `ln P(y)` for each exponent.
    pub log_fit: Vec<f64>,
    /// `ln P(ỹ, y)` for each exponent.
    pub log_joint_pred: Vec<f64>,
    /// `ln P(ỹ | y)` for each exponent.
    pub log_cond_pred: Vec<f64>,
    pub best_fit_q: f64,
    pub best_pred_q: f64,
    pub sigma_support: (f64, f64),
    pub normalization: PriorNormalization,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl PriorComparison {
    /// Fitting Bayes factor of `q_values[i]` against `q_values[j]`.
    pub fn bayes_factor_fit(&self, i: usize, j: usize) -> f64 {
        (self.log_fit[i] - self.log_fit[j]).exp()
    }

    /// Joint-predictive Bayes factor of `q_values[i]` against `q_values[j]`.
    pub fn bayes_factor_pred(&self, i: usize, j: usize) -> f64 {
        (self.log_joint_pred[i] - self.log_joint_pred[j]).exp()
    }

    /// Exponents ordered by decreasing fitting evidence.
    pub fn ranked_fit(&self) -> Vec<f64> {
        ranked(&self.q_values, &self.log_fit)
    }

    /// Exponents ordered by decreasing joint-predictive evidence.
    pub fn ranked_pred(&self) -> Vec<f64> {
        ranked(&self.q_values, &self.log_joint_pred)
    }
}

fn ranked(q: &[f64], v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    idx.into_iter().map(|i| q[i]).collect()
}

/// [`compare_priors_with`] using the default normalization.
pub fn compare_priors(
    data: &Dataset,
    future: &Dataset,
    q_list: &[f64],
    support: Option<(f64, f64)>,
) -> Result<PriorComparison> {
    compare_priors_with(data, future, q_list, support, PriorNormalization::default())
}

/// Evidence of each `1/σ^q` prior in `q_list` on a common support
/// ([`default_support`] when `None`). Equal model priors are assumed.
pub fn compare_priors_with(
    data: &Dataset,
    future: &Dataset,
    q_list: &[f64],
    support: Option<(f64, f64)>,
    normalization: PriorNormalization,
) -> Result<PriorComparison> {
    if q_list.is_empty() {
        return Err(domain("q list must not be empty"));
    }
    let (s_lo, s_hi) = match support {
        Some(s) => s,
        None => default_support(data)?,
    };
    let stacked = data.concat(future)?;
    let mut log_fit = Vec::with_capacity(q_list.len());
    let mut log_joint_pred = Vec::with_capacity(q_list.len());
    for &q in q_list {
        let prior = SigmaPowerPrior::with_normalization(q, s_lo, s_hi, normalization)?;
        log_fit.push(laplace_evidence(data, &prior, None)?.log_evidence);
        log_joint_pred.push(laplace_evidence(&stacked, &prior, None)?.log_evidence);
    }
    let log_cond_pred = log_joint_pred.iter().zip(&log_fit).map(|(j, f)| j - f).collect();
    Ok(PriorComparison {
        q_values: q_list.to_vec(),
        best_fit_q: q_list[argmax(&log_fit)],
        best_pred_q: q_list[argmax(&log_joint_pred)],
        log_fit,
        log_joint_pred,
        log_cond_pred,
        sigma_support: (s_lo, s_hi),
        normalization,
    })
}
