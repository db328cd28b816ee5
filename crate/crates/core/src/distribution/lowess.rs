//! Locally weighted linear regression with tricube weights and bisquare
//! robustness passes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robust::median;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LowessError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("span must lie in (0, 1], got {0}")]
    InvalidSpan(f64),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowessConfig {
    /// Fraction of points in each local neighborhood.
    pub span: f64,
    pub robustness_iters: usize,
}

impl Default for LowessConfig {
    fn default() -> Self {
        LowessConfig {
            span: 0.75,
            robustness_iters: 3,
        }
    }
}

fn tricube(d: f64) -> f64 {
    if d >= 1.0 {
        0.0
    } else {
        let t = 1.0 - d * d * d;
        t * t * t
    }
}

fn bisquare(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u;
        t * t
    }
}

/// Number of neighbors used by each local fit.
pub fn neighborhood_size(span: f64, n: usize) -> usize {
    ((span * n as f64 + 1e-7).floor() as usize).clamp(2, n)
}

/// Fit at sorted position `i` from the `q` nearest neighbors.
fn local_fit(xs: &[f64], ys: &[f64], robust: &[f64], i: usize, q: usize) -> f64 {
    let n = xs.len();
    let x0 = xs[i];
    let (mut lo, mut hi) = (i, i);
    while hi - lo + 1 < q {
        if lo == 0 {
            hi += 1;
        } else if hi == n - 1 {
            lo -= 1;
        } else if x0 - xs[lo - 1] <= xs[hi + 1] - x0 {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    let h = (x0 - xs[lo]).max(xs[hi] - x0);

    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let weights: Vec<f64> = (lo..=hi)
        .map(|j| {
            let w = if h > 0.0 {
                tricube((xs[j] - x0).abs() / h)
            } else {
                1.0
            } * robust[j];
            sw += w;
            sx += w * xs[j];
            sy += w * ys[j];
            w
        })
        .collect();
    if sw <= 0.0 {
        return ys[i];
    }
    let xbar = sx / sw;
    let ybar = sy / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (w, j) in weights.iter().zip(lo..=hi) {
        let dx = xs[j] - xbar;
        sxx += w * dx * dx;
        sxy += w * dx * (ys[j] - ybar);
    }
    let range = xs[n - 1] - xs[0];
    if sxx > 0.0 && (sxx / sw).sqrt() > 1e-7 * range {
        ybar + sxy / sxx * (x0 - xbar)
    } else {
        ybar
    }
}

/// Smoothed value at every input point, returned in input order.
pub fn lowess(points: &[(f64, f64)], config: &LowessConfig) -> Result<Vec<f64>, LowessError> {
    let n = points.len();
    if n < 3 {
        return Err(LowessError::TooFewPoints(n));
    }
    if !(config.span > 0.0 && config.span <= 1.0) {
        return Err(LowessError::InvalidSpan(config.span));
    }
    if let Some(i) = points
        .iter()
        .position(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(LowessError::NonFinite(i));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    let xs: Vec<f64> = order.iter().map(|&i| points[i].0).collect();
    let ys: Vec<f64> = order.iter().map(|&i| points[i].1).collect();
    let q = neighborhood_size(config.span, n);

    let y_scale = ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    let mut robust = vec![1.0; n];
    let mut fitted = vec![0.0; n];
    for iteration in 0..=config.robustness_iters {
        for (i, f) in fitted.iter_mut().enumerate() {
            *f = local_fit(&xs, &ys, &robust, i, q);
        }
        if iteration == config.robustness_iters {
            break;
        }
        let residuals: Vec<f64> = ys.iter().zip(&fitted).map(|(y, f)| y - f).collect();
        let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
        let s = median(&abs).unwrap_or(0.0);
        let mean_abs = abs.iter().sum::<f64>() / n as f64;
        // Residuals are already (numerically) zero for most points.
        if s <= 1e-7 * mean_abs || s <= 1e-10 * y_scale || s == 0.0 {
            break;
        }
        for (w, r) in robust.iter_mut().zip(&residuals) {
            *w = bisquare(r / (6.0 * s));
        }
    }

    let mut out = vec![0.0; n];
    for (sorted_pos, &original) in order.iter().enumerate() {
        out[original] = fitted[sorted_pos];
    }
    Ok(out)
}
