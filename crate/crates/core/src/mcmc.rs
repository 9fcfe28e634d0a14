//! Seedable random-walk Metropolis sampling and marginal checks against the
//! closed-form posteriors.
//!
//! Each draw is one sweep of single-coordinate Gaussian proposals. Under
//! [`SampleSpace::LogVariance`] the last coordinate is `σ²` and is proposed on
//! the `ln σ²` scale with the Jacobian added to the target. The generator is
//! ChaCha8, so chains are reproducible across platforms.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::io::Write;

use crate::conjugate::{marginal_sigma2, marginal_theta, PosteriorNig, SigmaPowerPrior};
use crate::error::{domain, Error, Result};
use crate::evidence::log_joint;
use crate::linmodel::Dataset;
use crate::special::trigamma;

/// Name of the pseudo-random generator, recorded in reports.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Coordinates in which proposals are made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSpace {
    /// Last coordinate is a variance, proposed on the log scale.
    LogVariance,
    /// All coordinates proposed as given.
    Unconstrained,
}

/// Retained draws and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub samples: Vec<DVector<f64>>,
    /// Fraction of accepted single-coordinate proposals over the whole run.
    pub acceptance_rate: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub warnings: Vec<String>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.len())
    }

    /// Values of coordinate `i` across the chain.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[i]).collect()
    }

    /// Writes one row per draw with columns `theta_1..theta_k,sigma2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let k = self.dim().saturating_sub(1);
        let mut header: Vec<String> = (1..=k).map(|j| format!("theta_{j}")).collect();
        header.push("sigma2".into());
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let row: Vec<String> = s.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Run parameters for [`metropolis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetropolisOptions {
    /// Total sweeps, including burn-in.
    pub draws: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub space: SampleSpace,
}

/// Component-wise random-walk Metropolis.
///
/// `proposal_scales` are standard deviations of the Gaussian steps, in the
/// proposal coordinates (`ln σ²` for the last entry under
/// [`SampleSpace::LogVariance`]). The first `burn_in` sweeps are discarded, so
/// the chain holds `draws − burn_in` samples.
pub fn metropolis<F: Fn(&DVector<f64>) -> f64>(
    log_target: F,
    init: &DVector<f64>,
    proposal_scales: &DVector<f64>,
    opts: MetropolisOptions,
) -> Result<Chain> {
    let d = init.len();
    if d == 0 || proposal_scales.len() != d {
        return Err(domain(format!("init has {d} entries, proposal scales {}", proposal_scales.len())));
    }
    if proposal_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(domain("proposal scales must be positive and finite"));
    }
    if opts.draws <= opts.burn_in {
        return Err(domain(format!("draws ({}) must exceed burn-in ({})", opts.draws, opts.burn_in)));
    }
    let log_var = opts.space == SampleSpace::LogVariance;
    if log_var && !(init[d - 1] > 0.0) {
        return Err(Error::Initialization(format!("initial variance must be positive, got {}", init[d - 1])));
    }
    // internal state u; target includes the ln σ² Jacobian when applicable
    let to_outer = |u: &DVector<f64>| {
        let mut x = u.clone();
        if log_var {
            x[d - 1] = u[d - 1].exp();
        }
        x
    };
    let target = |u: &DVector<f64>| {
        let v = log_target(&to_outer(u));
        if log_var {
            v + u[d - 1]
        } else {
            v
        }
    };
    let mut u = init.clone();
    if log_var {
        u[d - 1] = init[d - 1].ln();
    }
    let mut current = target(&u);
    if current.is_nan() || current == f64::NEG_INFINITY || current == f64::INFINITY {
        return Err(Error::Initialization(format!("log target is {current} at the initial point")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut samples = Vec::with_capacity(opts.draws - opts.burn_in);
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let mut warnings = Vec::new();
    let stuck_window = 10 * d;
    for sweep in 0..opts.draws {
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            let old = u[i];
            u[i] = old + proposal_scales[i] * z;
            let cand = target(&u);
            let log_u: f64 = rng.random::<f64>().ln();
            proposed += 1;
            if cand.is_finite() && log_u < cand - current {
                current = cand;
                accepted += 1;
            } else {
                u[i] = old;
            }
            if proposed == stuck_window && accepted == 0 {
                warnings.push(format!("no proposal accepted in the first {stuck_window} proposals"));
            }
        }
        if sweep >= opts.burn_in {
            samples.push(to_outer(&u));
        }
    }
    let acceptance_rate = accepted as f64 / proposed as f64;
    if accepted == 0 && warnings.is_empty() {
        warnings.push("no proposal accepted".into());
    }
    Ok(Chain { samples, acceptance_rate, seed: opts.seed, burn_in: opts.burn_in, warnings })
}

/// Default proposal scales for the posterior of a linear model:
/// `2.4/√(k+1)` times the marginal posterior standard deviations of each
/// `θⱼ` and of `ln σ²`.
pub fn default_proposal_scales(post: &PosteriorNig) -> Result<DVector<f64>> {
    let t = marginal_theta(post)?;
    let ig = marginal_sigma2(post)?;
    let k = post.k;
    let factor = 2.4 / ((k + 1) as f64).sqrt();
    let nu = t.dof();
    // t standard deviation, or the scale when the variance is infinite
    let inflate = if nu > 2.0 { (nu / (nu - 2.0)).sqrt() } else { 1.0 };
    let mut s = DVector::from_fn(k + 1, |j, _| if j < k { t.scale()[(j, j)].sqrt() * inflate * factor } else { 0.0 });
    // ln σ² = −ln G with G ~ Gamma(α*), so its variance is ψ′(α*)
    s[k] = trigamma(ig.alpha())?.sqrt() * factor;
    Ok(s)
}

/// Metropolis over the posterior `p(θ, σ²) p(y | θ, σ²)` of `data` under
/// `prior`, started at `(μ*, mode of σ²)` with [`default_proposal_scales`].
pub fn sample_posterior(
    data: &Dataset,
    prior: &SigmaPowerPrior,
    post: &PosteriorNig,
    draws: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Chain> {
    let k = data.k();
    if post.k != k {
        return Err(domain(format!("posterior has {} coefficients, design has {k} columns", post.k)));
    }
    let mut init = post.mu_star.clone().insert_row(k, 0.0);
    init[k] = marginal_sigma2(post)?.mode();
    let scales = default_proposal_scales(post)?;
    let target = |v: &DVector<f64>| {
        let theta = v.rows(0, k).into_owned();
        log_joint(data, prior, &theta, v[k]).unwrap_or(f64::NEG_INFINITY)
    };
    metropolis(target, &init, &scales, MetropolisOptions { draws, burn_in, seed, space: SampleSpace::LogVariance })
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `values` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// 95% critical value `1.36/√n` of the one-sample KS statistic.
pub fn ks_critical_95(n: usize) -> f64 {
    1.36 / (n as f64).sqrt()
}

/// Effective sample size by Geyer's initial positive sequence estimator.
pub fn effective_sample_size(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 4 {
        return n as f64;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * var);
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    n as f64 / tau.max(1e-12)
}

/// KS distances of chain marginals against the closed-form posterior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsReport {
    pub ks_sigma2: f64,
    pub ks_theta: Vec<f64>,
    pub samples: usize,
    pub critical_95: f64,
}

/// Compares the `σ²` draws with `IG(α*, β*)` and each `θⱼ` with its scalar
/// t marginal.
pub fn validate_against_analytic(chain: &Chain, post: &PosteriorNig) -> Result<KsReport> {
    let k = post.k;
    if chain.dim() != k + 1 {
        return Err(domain(format!("chain has dimension {}, posterior expects {}", chain.dim(), k + 1)));
    }
    let ig = marginal_sigma2(post)?;
    let t = marginal_theta(post)?;
    let ks_sigma2 = ks_statistic(&chain.component(k), |x| ig.cdf(x).unwrap_or(if x <= 0.0 { 0.0 } else { f64::NAN }));
    let mut ks_theta = Vec::with_capacity(k);
    for j in 0..k {
        let m = t.marginal(j)?;
        ks_theta.push(ks_statistic(&chain.component(j), |x| m.cdf(x)));
    }
    Ok(KsReport { ks_sigma2, ks_theta, samples: chain.len(), critical_95: ks_critical_95(chain.len()) })
}
