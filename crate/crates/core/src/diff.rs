//! Central finite differences.

use nalgebra::{DMatrix, DVector};

/// `eps^(1/3)`, the balanced step for first-order central differences.
pub fn step_first() -> f64 {
    f64::EPSILON.cbrt()
}

/// `eps^(1/4)`, the balanced step for second-order central differences.
pub fn step_second() -> f64 {
    f64::EPSILON.sqrt().sqrt()
}

/// Per-coordinate steps `base · max(|xᵢ|, 1)`.
pub fn scaled_steps(x: &DVector<f64>, base: f64) -> DVector<f64> {
    x.map(|v| base * v.abs().max(1.0))
}

/// Central-difference gradient with per-coordinate steps `h`.
pub fn gradient<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut p = x.clone();
    for i in 0..x.len() {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h[i]);
    }
    g
}

/// Central-difference Hessian with per-coordinate steps `h`, symmetrized.
///
/// Diagonal entries use the three-point rule, off-diagonals the four-point
/// cross rule.
pub fn hessian<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: &DVector<f64>) -> DMatrix<f64> {
    let d = x.len();
    let f0 = f(x);
    let mut m = DMatrix::zeros(d, d);
    let mut p = x.clone();
    for i in 0..d {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    (&m + m.transpose()) * 0.5
}
