//! Probability distributions used by the closed-form posteriors.
//!
//! Densities are computed in log space; `pdf` is `ln_pdf().exp()`. Quantiles
//! invert the cdf on whichever tail is smaller, with bracketed bisection
//! safeguarding Newton steps.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::special::{beta_inc_pair, gamma_pq, ln_beta, ln_gamma_unchecked};

fn check_prob(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("probability must lie in (0, 1), got {p}")))
    }
}

/// Solve `tail(x) = target` for a monotone tail function.
///
/// `tail` is the lower cdf when `increasing` is true and the survival function
/// otherwise; `density` is its derivative magnitude. `lo`/`hi` are an initial
/// bracket that is widened geometrically (within `[floor, ∞)`) until it
/// straddles the target.
fn solve_tail<T, D>(
    tail: T,
    density: D,
    target: f64,
    increasing: bool,
    mut lo: f64,
    mut hi: f64,
    floor: f64,
) -> Result<f64>
where
    T: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> f64,
{
    // g(x) < 0 left of the root, > 0 right of it
    let g = |x: f64| -> Result<f64> {
        let t = tail(x)?;
        Ok(if increasing { t - target } else { target - t })
    };
    let mut expand = 0;
    while g(lo)? > 0.0 {
        let width = (hi - lo).max(1.0);
        hi = lo;
        lo = if lo - 2.0 * width < floor { floor + 0.5 * (lo - floor) } else { lo - 2.0 * width };
        expand += 1;
        if expand > 2000 {
            return Err(Error::Numeric(format!("quantile bracket search failed below [{lo}, {hi}] for target {target}")));
        }
    }
    expand = 0;
    while g(hi)? < 0.0 {
        let width = (hi - lo).max(1.0);
        lo = hi;
        hi += 2.0 * width;
        expand += 1;
        if expand > 2000 {
            return Err(Error::Numeric(format!("quantile bracket search failed above [{lo}, {hi}] for target {target}")));
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let gx = g(x)?;
        if gx == 0.0 || gx.abs() <= 1e-15 * target {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if (hi - lo) <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(0.5 * (lo + hi));
        }
        let slope = density(x);
        let newton = if slope > 0.0 && slope.is_finite() { x - gx / slope } else { f64::NAN };
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::Numeric(format!("quantile iteration did not converge in bracket [{lo}, {hi}] for target {target}")))
}

/// Inverse gamma distribution `IG(alpha, beta)` with density
/// `β^α / Γ(α) · x^-(α+1) · exp(-β/x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseGamma {
    alpha: f64,
    beta: f64,
}

impl InverseGamma {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(domain(format!("inverse gamma requires alpha, beta > 0, got ({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> f64 {
        self.beta / (self.alpha + 1.0)
    }

    /// Mean, finite only for `alpha > 1`.
    pub fn mean(&self) -> Option<f64> {
        (self.alpha > 1.0).then(|| self.beta / (self.alpha - 1.0))
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(domain(format!("inverse gamma density requires x > 0, got {x}")));
        }
        Ok(self.alpha * self.beta.ln() - ln_gamma_unchecked(self.alpha) - (self.alpha + 1.0) * x.ln() - self.beta / x)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(domain(format!("inverse gamma cdf requires x > 0, got {x}")));
        }
        gamma_pq(self.alpha, self.beta / x).map(|(_, q)| q)
    }

    pub fn sf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(domain(format!("inverse gamma sf requires x > 0, got {x}")));
        }
        gamma_pq(self.alpha, self.beta / x).map(|(p, _)| p)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_prob(p)?;
        let pdf = |x: f64| self.pdf(x).unwrap_or(0.0);
        let m = self.mode();
        if p <= 0.5 {
            solve_tail(|x| self.cdf(x), pdf, p, true, 0.5 * m, 2.0 * m, 0.0)
        } else {
            solve_tail(|x| self.sf(x), pdf, 1.0 - p, false, 0.5 * m, 2.0 * m, 0.0)
        }
    }
}

/// Location-scale Student t distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudentT {
    dof: f64,
    location: f64,
    scale: f64,
}

impl StudentT {
    pub fn new(dof: f64, location: f64, scale: f64) -> Result<Self> {
        if !(dof > 0.0) || dof.is_nan() {
            return Err(domain(format!("student t requires dof > 0, got {dof}")));
        }
        if !(scale > 0.0 && scale.is_finite()) || !location.is_finite() {
            return Err(domain(format!("student t requires finite location and scale > 0, got ({location}, {scale})")));
        }
        Ok(Self { dof, location, scale })
    }

    pub fn standard(dof: f64) -> Result<Self> {
        Self::new(dof, 0.0, 1.0)
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn ln_norm(&self) -> f64 {
        let v = self.dof;
        ln_gamma_unchecked(0.5 * (v + 1.0)) - ln_gamma_unchecked(0.5 * v) - 0.5 * (v * PI).ln() - self.scale.ln()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        self.ln_norm() - 0.5 * (self.dof + 1.0) * (z * z / self.dof).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Lower-tail mass beyond `|z|` standard units, i.e. `P(T < -|z|)`.
    fn tail_standard(&self, z: f64) -> f64 {
        let v = self.dof;
        let z2 = z * z;
        let x = v / (v + z2);
        let y = z2 / (v + z2);
        // I_x(v/2, 1/2) / 2
        beta_inc_pair(0.5 * v, 0.5, x, y).map(|(i, _)| 0.5 * i).unwrap_or(f64::NAN)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if z.is_infinite() {
            return if z > 0.0 { 1.0 } else { 0.0 };
        }
        let tail = self.tail_standard(z);
        if z <= 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if z.is_infinite() {
            return if z > 0.0 { 0.0 } else { 1.0 };
        }
        let tail = self.tail_standard(z);
        if z >= 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_prob(p)?;
        if p == 0.5 {
            return Ok(self.location);
        }
        let std = StudentT { dof: self.dof, location: 0.0, scale: 1.0 };
        let lower = p.min(1.0 - p);
        let z = solve_tail(|z| Ok(std.cdf(z)), |z| std.pdf(z), lower, true, -2.0, 0.0, f64::NEG_INFINITY)?;
        let z = if p < 0.5 { z } else { -z };
        Ok(self.location + self.scale * z)
    }
}

/// Quantile of the standard Student t with `dof` degrees of freedom.
pub fn student_t_quantile(dof: f64, p: f64) -> Result<f64> {
    StudentT::standard(dof)?.quantile(p)
}

/// Fisher-Snedecor F distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FDist {
    d1: f64,
    d2: f64,
}

impl FDist {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 > 0.0 && d1.is_finite()) || !(d2 > 0.0 && d2.is_finite()) {
            return Err(domain(format!("F distribution requires d1, d2 > 0, got ({d1}, {d2})")));
        }
        Ok(Self { d1, d2 })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let (d1, d2) = (self.d1, self.d2);
        0.5 * (d1 * (d1 * x).ln() + d2 * d2.ln() - (d1 + d2) * (d1 * x + d2).ln()) - x.ln() - ln_beta(0.5 * d1, 0.5 * d2)
    }

    fn pair(&self, x: f64) -> Result<(f64, f64)> {
        if x <= 0.0 {
            return Ok((0.0, 1.0));
        }
        let den = self.d1 * x + self.d2;
        beta_inc_pair(0.5 * self.d1, 0.5 * self.d2, self.d1 * x / den, self.d2 / den)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.pair(x).map(|(c, _)| c)
    }

    pub fn sf(&self, x: f64) -> Result<f64> {
        self.pair(x).map(|(_, s)| s)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_prob(p)?;
        let pdf = |x: f64| self.ln_pdf(x).exp();
        if p <= 0.5 {
            solve_tail(|x| self.cdf(x), pdf, p, true, 0.5, 2.0, 0.0)
        } else {
            solve_tail(|x| self.sf(x), pdf, 1.0 - p, false, 0.5, 2.0, 0.0)
        }
    }
}

/// Quantile of `F(d1, d2)` at probability `p`.
pub fn f_quantile(p: f64, d1: f64, d2: f64) -> Result<f64> {
    FDist::new(d1, d2)?.quantile(p)
}

/// Multivariate Student t with `dof` degrees of freedom, location vector and
/// symmetric positive-definite scale matrix.
#[derive(Debug, Clone)]
pub struct MultivariateT {
    dof: f64,
    location: DVector<f64>,
    scale: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    ln_det: f64,
}

impl MultivariateT {
    pub fn new(dof: f64, location: DVector<f64>, scale: DMatrix<f64>) -> Result<Self> {
        if !(dof > 0.0) || dof.is_nan() {
            return Err(domain(format!("multivariate t requires dof > 0, got {dof}")));
        }
        let k = location.len();
        if k == 0 || scale.nrows() != k || scale.ncols() != k {
            return Err(domain(format!(
                "multivariate t location has length {k} but scale is {}x{}",
                scale.nrows(),
                scale.ncols()
            )));
        }
        let chol = Cholesky::new(scale.clone())
            .ok_or_else(|| Error::LinAlg("multivariate t scale matrix is not positive definite".into()))?;
        let ln_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self { dof, location, scale, chol, ln_det })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn location(&self) -> &DVector<f64> {
        &self.location
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.scale
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    /// One-dimensional marginal of component `i`.
    pub fn marginal(&self, i: usize) -> Result<StudentT> {
        if i >= self.dim() {
            return Err(domain(format!("component {i} out of range for dimension {}", self.dim())));
        }
        StudentT::new(self.dof, self.location[i], self.scale[(i, i)].sqrt())
    }

    pub fn ln_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        let k = self.dim();
        if x.len() != k {
            return Err(domain(format!("point has length {} but distribution has dimension {k}", x.len())));
        }
        let d = x - &self.location;
        let maha = d.dot(&self.chol.solve(&d));
        let v = self.dof;
        let kf = k as f64;
        Ok(ln_gamma_unchecked(0.5 * (v + kf)) - ln_gamma_unchecked(0.5 * v) - 0.5 * kf * (v * PI).ln() - 0.5 * self.ln_det
            - 0.5 * (v + kf) * (maha / v).ln_1p())
    }
}

/// Log-density of a multivariate t at `x`.
pub fn mv_t_logpdf(dist: &MultivariateT, x: &DVector<f64>) -> Result<f64> {
    dist.ln_pdf(x)
}
