//! Median and median absolute deviation.

/// Scales the MAD of normal data to its standard deviation.
pub const MAD_TO_SIGMA: f64 = 1.4826;

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    })
}

/// Median absolute deviation about the median (unscaled).
pub fn mad(values: &[f64]) -> Option<f64> {
    let center = median(values)?;
    let deviations: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    median(&deviations)
}

/// `1.4826 · MAD`, a consistent estimate of sigma under normality.
pub fn robust_scale(values: &[f64]) -> Option<f64> {
    mad(values).map(|m| MAD_TO_SIGMA * m)
}

/// True when `scale` is zero relative to the magnitude of `values`.
pub(crate) fn is_degenerate_scale(scale: f64, values: &[f64]) -> bool {
    let magnitude = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    !(scale > 1e-10 * magnitude.max(f64::MIN_POSITIVE))
}
