//! Numerical integration: adaptive Gauss–Kronrod (7/15) on finite intervals
//! and log-space helpers for tensor-product trapezoid rules.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integrate `f` over `[a, b]` to within `max(abs_tol, rel_tol·|I|)`.
///
/// Segments are bisected in order of largest error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (v, e) = gk15(&f, lo, hi);
    let mut segs = vec![(lo, hi, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::Numeric(format!(
                "adaptive quadrature on [{a}, {b}] stopped at {MAX_SEGMENTS} segments with error estimate {err:e}"
            )));
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one segment");
        let (s0, s1, sv, se) = segs.swap_remove(idx);
        let mid = 0.5 * (s0 + s1);
        if mid <= s0 || mid >= s1 {
            // interval exhausted at machine precision
            segs.push((s0, s1, sv, 0.0));
            err = segs.iter().map(|s| s.3).sum();
            continue;
        }
        let (lv, le) = gk15(&f, s0, mid);
        let (rv, re) = gk15(&f, mid, s1);
        total += lv + rv - sv;
        err += le + re - se;
        segs.push((s0, mid, lv, le));
        segs.push((mid, s1, rv, re));
        if !total.is_finite() {
            return Err(Error::Numeric(format!("integrand is not finite on [{a}, {b}]")));
        }
        // refresh sums now and then to stop drift from incremental updates
        if segs.len() % 64 == 0 {
            total = segs.iter().map(|s| s.2).sum();
            err = segs.iter().map(|s| s.3).sum();
        }
    }
    Ok(sign * segs.iter().map(|s| s.2).sum::<f64>())
}

/// `ln Σ exp(xᵢ)` without overflow; `-∞` for an empty or all `-∞` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    scaled: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogAccumulator {
    pub fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.scaled += (v - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub fn merge(&mut self, other: &LogAccumulator) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Trapezoid weights (log space) for `n` equally spaced nodes over `[lo, hi]`.
pub fn log_trapezoid_weights(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == 0 || i == n - 1 { (0.5 * h).ln() } else { h.ln() })
        .collect()
}

/// `ln ∫ exp(f)` over the box `[lo, hi]` by the tensor-product trapezoid rule
/// with `resolution` nodes per axis, accumulated in log space.
pub fn log_integral_grid<F: FnMut(&[f64]) -> f64>(mut f: F, lo: &[f64], hi: &[f64], resolution: usize) -> Result<f64> {
    let d = lo.len();
    if d == 0 || hi.len() != d {
        return Err(Error::Domain("grid box must have matching nonempty bounds".into()));
    }
    if resolution < 2 {
        return Err(Error::Domain(format!("grid resolution must be at least 2, got {resolution}")));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
        return Err(Error::Domain(format!("grid box {lo:?}..{hi:?} is empty or unbounded")));
    }
    let nodes: Vec<Vec<f64>> = (0..d)
        .map(|a| (0..resolution).map(|i| lo[a] + (hi[a] - lo[a]) * i as f64 / (resolution - 1) as f64).collect())
        .collect();
    let weights: Vec<Vec<f64>> = (0..d).map(|a| log_trapezoid_weights(lo[a], hi[a], resolution)).collect();
    let mut idx = vec![0usize; d];
    let mut point: Vec<f64> = nodes.iter().map(|n| n[0]).collect();
    let mut acc = LogAccumulator::default();
    loop {
        let w: f64 = (0..d).map(|a| weights[a][idx[a]]).sum();
        let v = f(&point);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Numeric(format!("integrand is {v} at {point:?}")));
        }
        acc.add(v + w);
        // odometer, last axis fastest
        let mut a = d;
        loop {
            if a == 0 {
                return Ok(acc.value());
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < resolution {
                point[a] = nodes[a][idx[a]];
                break;
            }
            idx[a] = 0;
            point[a] = nodes[a][0];
        }
    }
}
