//! Derivative-free minimization by the Nelder–Mead simplex method.

use nalgebra::DVector;

/// Outcome of a simplex run.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Stopping rules for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Stop when the spread of function values across the simplex falls below this.
    pub f_tol: f64,
    /// and the simplex diameter (max-norm) falls below this times `1 + |x|∞`.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { f_tol: 1e-13, x_tol: 1e-10, max_iter: 20_000 }
    }
}

/// Minimize `f` from `x0` with initial simplex edge lengths `step`.
///
/// Non-finite function values are treated as `+∞`, so infeasible points are
/// rejected rather than followed. Standard coefficients (1, 2, ½, ½) are used.
pub fn nelder_mead<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    x0: &DVector<f64>,
    step: &DVector<f64>,
    opts: SimplexOptions,
) -> SimplexResult {
    let n = x0.len();
    let eval = |x: &DVector<f64>| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<DVector<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.clone());
    for i in 0..n {
        let mut p = x0.clone();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(eval).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[n] - vals[0]).abs();
        let diameter = pts[1..].iter().map(|p| (p - &pts[0]).amax()).fold(0.0, f64::max);
        if vals[0].is_finite()
            && spread <= opts.f_tol * vals[0].abs().max(1.0)
            && diameter <= opts.x_tol * (1.0 + pts[0].amax())
        {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid = pts[..n].iter().fold(DVector::zeros(n), |acc, p| acc + p) / n as f64;
        let worst = pts[n].clone();
        let reflected = &centroid + (&centroid - &worst);
        let fr = eval(&reflected);
        if fr < vals[0] {
            let expanded = &centroid + (&reflected - &centroid) * 2.0;
            let fe = eval(&expanded);
            if fe < fr {
                pts[n] = expanded;
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = reflected;
            vals[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[n] {
            let c = &centroid + (&reflected - &centroid) * 0.5;
            let v = eval(&c);
            (c, v)
        } else {
            let c = &centroid + (&worst - &centroid) * 0.5;
            let v = eval(&c);
            (c, v)
        };
        if fc < vals[n].min(fr) {
            pts[n] = contracted;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            pts[i] = &pts[0] + (&pts[i] - &pts[0]) * 0.5;
            vals[i] = eval(&pts[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    SimplexResult { x: pts[best].clone(), value: vals[best], iterations, converged }
}
