//! Noninformative Bayesian linear regression.
//!
//! The `1/σ^q` family of priors on `(θ, σ²)` is handled as the limiting state
//! of the Normal-Inverse-Gamma conjugate prior, which keeps posteriors and
//! predictive distributions in closed form. Around that core sit:
//!
//! * [`special`] and [`dist`]: incomplete gamma/beta functions and the
//!   inverse-gamma, Student t, multivariate t and F distributions,
//! * [`linmodel`]: datasets, ordinary least squares and classical prediction
//!   bounds,
//! * [`conjugate`]: NIG updates, limiting priors, marginals and predictives,
//! * [`evidence`]: Laplace-approximated global likelihood, a quadrature
//!   oracle and prior comparison,
//! * [`mcmc`]: a seedable random-walk Metropolis sampler and KS validation,
//! * [`infogeom`]: numerical Fisher information, KL divergence and prior
//!   exponent extraction,
//! * [`fatigue`]: strain-life fitting and probability-of-failure lives.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conjugate;
pub mod diff;
pub mod dist;
mod error;
pub mod evidence;
pub mod fatigue;
pub mod fixtures;
pub mod infogeom;
mod linalg;
pub mod linmodel;
pub mod mcmc;
pub mod optim;
pub mod quad;
pub mod special;

pub use conjugate::{
    limiting_nig_from_q, posterior_update, NigParams, PosteriorNig, PriorNormalization,
    SigmaPowerPrior,
};
pub use dist::{FDist, InverseGamma, MultivariateT, StudentT};
pub use error::{Error, Result};
pub use evidence::{LaplaceResult, PriorComparison};
pub use linmodel::{Dataset, OlsFit};
pub use mcmc::Chain;

pub use nalgebra::{DMatrix, DVector};
