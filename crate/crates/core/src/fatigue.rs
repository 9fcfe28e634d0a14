//! Strain-life regression `ln N = a₀ + a₁ ln(Δε/2)` and fatigue lives at a
//! prescribed probability of failure.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::conjugate::{limiting_nig_from_q, posterior_update, predictive_row, PosteriorNig, SigmaPowerPrior};
use crate::error::{domain, Result};
use crate::evidence::{compare_priors, default_support, PriorComparison};
use crate::linmodel::{ls_one_sided_bound, ols_fit, Dataset, OlsFit};
use crate::mcmc::{sample_posterior, Chain};

/// One fatigue test: strain amplitude `Δε/2` and cycles to failure `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FatigueRecord {
    pub strain_amplitude: f64,
    pub cycles: f64,
}

impl FatigueRecord {
    pub fn new(strain_amplitude: f64, cycles: f64) -> Result<Self> {
        if !(strain_amplitude > 0.0 && strain_amplitude.is_finite() && cycles > 0.0 && cycles.is_finite()) {
            return Err(domain(format!(
                "fatigue record needs positive finite strain and cycles, got ({strain_amplitude}, {cycles})"
            )));
        }
        Ok(Self { strain_amplitude, cycles })
    }
}

/// Design row `[1, ln(Δε/2)]`.
pub fn design_row(strain_amplitude: f64) -> DVector<f64> {
    DVector::from_vec(vec![1.0, strain_amplitude.ln()])
}

/// Log-transformed dataset: rows `[1, ln(Δε/2)]`, response `ln N`.
pub fn strain_life_dataset(records: &[FatigueRecord]) -> Result<Dataset> {
    let x: Vec<f64> = records.iter().map(|r| r.strain_amplitude.ln()).collect();
    let y: Vec<f64> = records.iter().map(|r| r.cycles.ln()).collect();
    Dataset::with_intercept(&x, &y)
}

/// Posterior of `(a₀, a₁)` under a `1/σ^q` prior.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainLifeFit {
    pub posterior: PosteriorNig,
    pub q: f64,
    /// 0-based indices of records excluded from the fit.
    pub holdout: Vec<usize>,
    pub data: Dataset,
    pub ols: OlsFit,
    /// Truncated prior used when the posterior is sampled.
    pub prior: SigmaPowerPrior,
}

fn split(records: &[FatigueRecord], holdout: &[usize]) -> Result<(Vec<FatigueRecord>, Vec<FatigueRecord>)> {
    let mut seen = vec![false; records.len()];
    for &h in holdout {
        if h >= records.len() {
            return Err(domain(format!("holdout index {h} out of range for {} records", records.len())));
        }
        if seen[h] {
            return Err(domain(format!("holdout index {h} listed twice")));
        }
        seen[h] = true;
    }
    let fit = records.iter().zip(&seen).filter(|(_, s)| !**s).map(|(r, _)| *r).collect();
    let held = holdout.iter().map(|&h| records[h]).collect();
    Ok((fit, held))
}

/// Fits the strain-life model to all records not in `holdout` (0-based).
pub fn fit_strain_life(records: &[FatigueRecord], q: f64, holdout: &[usize]) -> Result<StrainLifeFit> {
    let (fit_rows, _) = split(records, holdout)?;
    if fit_rows.len() < 3 {
        return Err(domain(format!("need at least 3 records to fit, got {}", fit_rows.len())));
    }
    let data = strain_life_dataset(&fit_rows)?;
    let ols = ols_fit(&data)?;
    let posterior = posterior_update(&limiting_nig_from_q(q, 2), &data)?;
    let (lo, hi) = default_support(&data)?;
    let prior = SigmaPowerPrior::new(q, lo, hi)?;
    Ok(StrainLifeFit { posterior, q, holdout: holdout.to_vec(), data, ols, prior })
}

/// Estimator used for a probability-of-failure life.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LifeMethod {
    /// Quantile of the Bayesian posterior predictive.
    Bayes,
    /// One-sided least-squares prediction bound.
    LeastSquares,
}

/// Which Bayesian predictive the life quantile is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PredictiveKind {
    /// Posterior of the model curve `a₀ + a₁ ln(Δε/2)`.
    #[default]
    MeanResponse,
    /// Posterior predictive of a new observation, including scatter.
    Observation,
}

fn check_pof(pof: f64) -> Result<()> {
    if !(pof > 0.0 && pof < 1.0) {
        return Err(domain(format!("probability of failure must lie in (0, 1), got {pof}")));
    }
    Ok(())
}

/// Cycles `N` with `P(life < N) = pof` at a strain amplitude.
///
/// Bayesian lives are `exp` of the `pof` quantile of the t predictive of
/// `ln N`; least-squares lives are `exp(x̃θ̂ + t(pof; n − k)·σ_y)`. `kind` only
/// affects the Bayesian method.
pub fn life_at_pof(fit: &StrainLifeFit, strain_amplitude: f64, pof: f64, method: LifeMethod, kind: PredictiveKind) -> Result<f64> {
    check_pof(pof)?;
    if !(strain_amplitude > 0.0) {
        return Err(domain(format!("strain amplitude must be positive, got {strain_amplitude}")));
    }
    let x = design_row(strain_amplitude);
    let ln_n = match method {
        LifeMethod::Bayes => {
            let t = predictive_row(&fit.posterior, &x, kind == PredictiveKind::Observation)?;
            t.quantile(pof)?
        }
        LifeMethod::LeastSquares => ls_one_sided_bound(&fit.ols, &x, pof)?,
    };
    Ok(ln_n.exp())
}

/// Type-7 empirical quantile of unsorted values.
pub fn empirical_quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(domain("empirical quantile of an empty sample"));
    }
    check_pof(p)?;
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Draws `(a₀, a₁, σ²)` from the posterior by Metropolis sampling.
pub fn sample_fit_posterior(fit: &StrainLifeFit, draws: usize, burn_in: usize, seed: u64) -> Result<Chain> {
    sample_posterior(&fit.data, &fit.prior, &fit.posterior, draws, burn_in, seed)
}

/// Bayesian lives at each strain from the empirical `pof` quantile of
/// predictive draws built on a posterior chain. With
/// [`PredictiveKind::Observation`] each draw adds `σ·z`, `z` standard normal
/// from a generator seeded with `seed`.
pub fn lives_from_chain(chain: &Chain, strains: &[f64], pof: f64, kind: PredictiveKind, seed: u64) -> Result<Vec<f64>> {
    check_pof(pof)?;
    if chain.dim() != 3 {
        return Err(domain(format!("strain-life chain must have 3 coordinates, got {}", chain.dim())));
    }
    let noise: Vec<f64> = match kind {
        PredictiveKind::MeanResponse => vec![0.0; chain.len()],
        PredictiveKind::Observation => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..chain.len()).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    strains
        .iter()
        .map(|&s| {
            let lx = s.ln();
            let pred: Vec<f64> =
                chain.samples.iter().zip(&noise).map(|(d, z)| d[0] + d[1] * lx + d[2].sqrt() * z).collect();
            empirical_quantile(&pred, pof).map(f64::exp)
        })
        .collect()
}

/// Fitting and joint-predictive evidence of each exponent, with the held-out
/// records as future data.
pub fn holdout_performance(records: &[FatigueRecord], holdout: &[usize], q_list: &[f64]) -> Result<PriorComparison> {
    let (fit_rows, held) = split(records, holdout)?;
    let data = strain_life_dataset(&fit_rows)?;
    let future = if held.is_empty() { Dataset::empty(2) } else { strain_life_dataset(&held)? };
    compare_priors(&data, &future, q_list, None)
}
