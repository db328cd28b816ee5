use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EncodedDataset, ModelError, TrainedModel};
use crate::robust::{is_degenerate_scale, median, robust_scale};

/// Per-feature scores in `[0, 1]`, in dataset column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub features: Vec<String>,
    pub scores: Vec<f64>,
}

impl ImportanceTable {
    pub fn score(&self, feature: &str) -> Option<f64> {
        self.features
            .iter()
            .position(|f| f == feature)
            .map(|i| self.scores[i])
    }

    /// Column indices by descending score; ties keep column order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }
}

/// Mean increase in MSE when each column is shuffled, clamped at zero and
/// divided by the largest increase.
///
/// A single generator seeded from `seed` drives every shuffle, visiting
/// columns in order and drawing `repeats` row permutations per column.
pub fn permutation_importance(
    model: &TrainedModel,
    data: &EncodedDataset,
    repeats: usize,
    seed: u64,
) -> ImportanceTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.len();
    let base = model.mse(data.features.view(), data.targets.view());
    let mut raw = Vec::with_capacity(data.dim());
    let mut perm: Vec<usize> = (0..n).collect();
    let mut shuffled = data.features.clone();
    for j in 0..data.dim() {
        let column = data.features.column(j);
        let mut total = 0.0;
        for _ in 0..repeats {
            perm.shuffle(&mut rng);
            for (i, &p) in perm.iter().enumerate() {
                shuffled[[i, j]] = column[p];
            }
            total += model.mse(shuffled.view(), data.targets.view()) - base;
        }
        shuffled.column_mut(j).assign(&column);
        let mean = if repeats > 0 { total / repeats as f64 } else { 0.0 };
        raw.push(mean.max(0.0));
    }
    let top = raw.iter().copied().fold(0.0_f64, f64::max);
    let scores = if top > 0.0 {
        raw.iter().map(|r| if *r == top { 1.0 } else { r / top }).collect()
    } else {
        raw
    };
    ImportanceTable {
        features: data.feature_names.clone(),
        scores,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub feature: String,
    pub services: f64,
    pub surveillance: f64,
    /// `services − surveillance`; positive means more important for services.
    pub diff: f64,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceDiff {
    pub entries: Vec<DiffEntry>,
    /// Robust spread of the differences used for the band.
    pub scale: f64,
}

impl ImportanceDiff {
    pub fn flagged(&self) -> impl Iterator<Item = &DiffEntry> {
        self.entries.iter().filter(|e| e.flag)
    }
}

/// Signed per-feature differences between two importance tables, flagging
/// `|diff| > k · scale`.
///
/// `scale` is `1.4826 · MAD(diffs)`. When most features share one
/// difference (typically zero) the MAD collapses, so the scale falls back
/// to `1.2533 · mean |diff − median|`. If that is also zero nothing is
/// flagged.
pub fn importance_diff(
    services: &ImportanceTable,
    surveillance: &ImportanceTable,
    k: f64,
) -> Result<ImportanceDiff, ModelError> {
    let mut a: Vec<(&String, f64)> = services.features.iter().zip(services.scores.iter().copied()).collect();
    let mut b: Vec<(&String, f64)> = surveillance.features.iter().zip(surveillance.scores.iter().copied()).collect();
    a.sort_by(|x, y| x.0.cmp(y.0));
    b.sort_by(|x, y| x.0.cmp(y.0));
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.0 != y.0) {
        return Err(ModelError::FeatureSetMismatch);
    }
    let scores: std::collections::HashMap<&String, f64> = b.into_iter().collect();
    let diffs: Vec<f64> = services
        .features
        .iter()
        .zip(&services.scores)
        .map(|(f, s)| s - scores[f])
        .collect();
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let mut scale = robust_scale(&diffs).unwrap_or(0.0);
    if is_degenerate_scale(scale, &magnitudes) {
        if let Some(m) = median(&diffs) {
            scale = 1.2533 * diffs.iter().map(|d| (d - m).abs()).sum::<f64>() / diffs.len() as f64;
        }
    }
    let degenerate = is_degenerate_scale(scale, &magnitudes);
    let entries = services
        .features
        .iter()
        .zip(&services.scores)
        .zip(&diffs)
        .map(|((f, &s), &d)| DiffEntry {
            feature: f.clone(),
            services: s,
            surveillance: scores[f],
            diff: d,
            flag: !degenerate && d.abs() > k * scale,
        })
        .collect();
    Ok(ImportanceDiff { entries, scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(pairs: &[(&str, f64)]) -> ImportanceTable {
        ImportanceTable {
            features: pairs.iter().map(|p| p.0.to_string()).collect(),
            scores: pairs.iter().map(|p| p.1).collect(),
        }
    }

    #[test]
    fn published_pair_difference() {
        let services = table(&[("Origin.RWA", 1.0), ("Year", 0.3)]);
        let surveillance = table(&[("Year", 0.3), ("Origin.RWA", 0.9509)]);
        let diff = importance_diff(&services, &surveillance, 2.5).unwrap();
        assert!((diff.entries[0].diff - 0.0491).abs() < 1e-12);
        assert_eq!(diff.entries[1].diff, 0.0);
    }

    #[test]
    fn identical_tables_have_no_flags() {
        let t = table(&[("a", 1.0), ("b", 0.4), ("c", 0.0)]);
        let diff = importance_diff(&t, &t, 2.5).unwrap();
        assert!(diff.entries.iter().all(|e| e.diff == 0.0 && !e.flag));
    }

    #[test]
    fn single_outlying_difference_is_flagged() {
        let services = table(&[("a", 1.0), ("b", 0.5), ("c", 0.5), ("d", 0.5), ("e", 0.1)]);
        let surveillance = table(&[("a", 0.2), ("b", 0.5), ("c", 0.5), ("d", 0.5), ("e", 0.1)]);
        let diff = importance_diff(&services, &surveillance, 2.5).unwrap();
        let flagged: Vec<&str> = diff.flagged().map(|e| e.feature.as_str()).collect();
        assert_eq!(flagged, vec!["a"]);
    }

    #[test]
    fn mismatched_features_are_rejected() {
        let err = importance_diff(&table(&[("a", 1.0)]), &table(&[("b", 1.0)]), 2.5).unwrap_err();
        assert_eq!(err, ModelError::FeatureSetMismatch);
    }

    #[test]
    fn ranking_orders_by_score() {
        let t = table(&[("a", 0.2), ("b", 1.0), ("c", 0.2)]);
        assert_eq!(t.ranking(), vec![1, 0, 2]);
    }
}
