//! Small dense helpers shared by the modules.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values of `x` below this fraction of the largest mark rank loss.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// Ratio of largest to smallest singular value, or an error past [`RANK_TOL`].
pub(crate) fn check_full_rank(x: &DMatrix<f64>) -> Result<f64> {
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < RANK_TOL * max {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::Singular { condition });
    }
    Ok(max / min)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(symmetrize(m)).ok_or_else(|| Error::LinAlg(format!("{what} is not positive definite")))
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub(crate) fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(symmetrize(&cholesky(m, what)?.inverse()))
}

/// Least-squares solve by Householder QR; returns `(solution, (xᵀx)⁻¹)`.
/// The caller has already checked rank.
pub(crate) fn qr_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let r = r.rows(0, k).into_owned();
    let theta = r
        .solve_upper_triangular(&qty.rows(0, k).into_owned())
        .ok_or_else(|| Error::LinAlg("triangular factor is singular".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::LinAlg("triangular factor is singular".into()))?;
    Ok((theta, symmetrize(&(&r_inv * r_inv.transpose()))))
}
