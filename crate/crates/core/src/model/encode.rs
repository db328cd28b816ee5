use std::collections::BTreeSet;
use std::ops::Range;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::index::JoinedRecord;

/// Which volume the model predicts; the other one is a predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Services,
    Surveillance,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Services => "services",
            TargetKind::Surveillance => "surveillance",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    /// `log10(v + 1)`
    #[default]
    Log10,
    Raw,
}

impl TargetTransform {
    pub fn apply(self, volume: u64) -> f64 {
        match self {
            TargetTransform::Log10 => (volume as f64 + 1.0).log10(),
            TargetTransform::Raw => volume as f64,
        }
    }
}

/// A categorical column expanded into one indicator per observed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CategoricalGroup {
    Origin,
    Program,
    Class,
    /// The domain item response, e.g. `65+` or `Maryland Black`.
    Aspect,
}

impl CategoricalGroup {
    pub const ALL: [CategoricalGroup; 4] = [
        CategoricalGroup::Origin,
        CategoricalGroup::Program,
        CategoricalGroup::Class,
        CategoricalGroup::Aspect,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            CategoricalGroup::Origin => "Origin",
            CategoricalGroup::Program => "Program",
            CategoricalGroup::Class => "Class",
            CategoricalGroup::Aspect => "aspect",
        }
    }

    fn value(self, r: &JoinedRecord) -> String {
        match self {
            CategoricalGroup::Origin => r.origin.clone(),
            CategoricalGroup::Program => r.program.clone(),
            CategoricalGroup::Class => r.class.name().to_string(),
            CategoricalGroup::Aspect => r.key.label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingConfig {
    pub groups: Vec<CategoricalGroup>,
    pub transform: TargetTransform,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            groups: CategoricalGroup::ALL.to_vec(),
            transform: TargetTransform::Log10,
        }
    }
}

pub const YEAR_FEATURE: &str = "Year";
pub const ALTERNATE_FEATURE: &str = "Alternate";

/// Design matrix and target for one of the two cross-prediction models.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub feature_names: Vec<String>,
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    /// Column range of each categorical group.
    pub group_spans: Vec<(CategoricalGroup, Range<usize>)>,
}

impl EncodedDataset {
    pub fn from_parts(
        feature_names: Vec<String>,
        features: Array2<f64>,
        targets: Array1<f64>,
    ) -> Result<Self, ModelError> {
        if features.ncols() != feature_names.len() || features.nrows() != targets.len() {
            return Err(ModelError::DimensionMismatch);
        }
        Ok(EncodedDataset {
            feature_names,
            features,
            targets,
            group_spans: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> EncodedDataset {
        EncodedDataset {
            feature_names: self.feature_names.clone(),
            features: self.features.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            group_spans: self.group_spans.clone(),
        }
    }
}

fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    for v in values.iter_mut() {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
}

/// Builds the design matrix from joined records where surveillance volume
/// strictly exceeds service volume. Rows keep the input order.
///
/// Columns: one indicator per observed value of each configured categorical
/// group (values sorted), then standardized year, then the standardized
/// transformed alternate volume. The target is the transformed volume of
/// `target`.
pub fn encode_dataset(
    joined: &[JoinedRecord],
    target: TargetKind,
    config: &EncodingConfig,
) -> Result<EncodedDataset, ModelError> {
    let rows: Vec<&JoinedRecord> = joined
        .iter()
        .filter(|r| r.surveillance_volume > r.service_volume)
        .collect();
    if rows.is_empty() {
        return Err(ModelError::EmptyAfterFilter);
    }

    let mut feature_names = Vec::new();
    let mut group_spans = Vec::new();
    let mut vocabularies = Vec::new();
    for &group in &config.groups {
        let values: BTreeSet<String> = rows.iter().map(|r| group.value(r)).collect();
        let start = feature_names.len();
        feature_names.extend(values.iter().map(|v| format!("{}.{}", group.prefix(), v)));
        group_spans.push((group, start..feature_names.len()));
        vocabularies.push(values.into_iter().collect::<Vec<_>>());
    }
    let year_col = feature_names.len();
    feature_names.push(YEAR_FEATURE.to_string());
    feature_names.push(ALTERNATE_FEATURE.to_string());

    let mut features = Array2::<f64>::zeros((rows.len(), feature_names.len()));
    for (i, r) in rows.iter().enumerate() {
        for ((group, span), vocab) in group_spans.iter().zip(&vocabularies) {
            let value = group.value(r);
            let pos = vocab.binary_search(&value).expect("value drawn from vocabulary");
            features[[i, span.start + pos]] = 1.0;
        }
    }

    let (target_volume, alternate_volume): (fn(&JoinedRecord) -> u64, fn(&JoinedRecord) -> u64) = match target {
        TargetKind::Services => (|r| r.service_volume, |r| r.surveillance_volume),
        TargetKind::Surveillance => (|r| r.surveillance_volume, |r| r.service_volume),
    };
    let mut years: Vec<f64> = rows.iter().map(|r| r.year as f64).collect();
    let mut alternate: Vec<f64> = rows
        .iter()
        .map(|r| config.transform.apply(alternate_volume(r)))
        .collect();
    standardize(&mut years);
    standardize(&mut alternate);
    for i in 0..rows.len() {
        features[[i, year_col]] = years[i];
        features[[i, year_col + 1]] = alternate[i];
    }
    let targets = rows
        .iter()
        .map(|r| config.transform.apply(target_volume(r)))
        .collect();

    Ok(EncodedDataset {
        feature_names,
        features,
        targets,
        group_spans,
    })
}
