use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, train_mlp, EncodedDataset, ModelConfig, ModelError, TrainedModel};

/// `1 − SSE/SST`. `None` when the targets have zero variance.
pub fn r_squared(targets: ArrayView1<f64>, predictions: ArrayView1<f64>) -> Option<f64> {
    let n = targets.len();
    if n == 0 {
        return None;
    }
    let mean = targets.sum() / n as f64;
    let sst: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    if sst <= 0.0 {
        return None;
    }
    let sse: f64 = targets
        .iter()
        .zip(predictions.iter())
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Some(1.0 - sse / sst)
}

/// Seeded partition of `0..n` into (training, evaluation) rows. The training
/// part holds `round(n · fraction)` rows, clamped so both parts are nonempty
/// when `n ≥ 2`. Each part is returned in ascending order.
pub fn split_rows(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = if n < 2 {
        n
    } else {
        ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
    };
    let mut train = order[..n_train].to_vec();
    let mut eval = order[n_train..].to_vec();
    train.sort_unstable();
    eval.sort_unstable();
    (train, eval)
}

/// r² triple in the shape of a per-model metrics row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub r2_train: Option<f64>,
    pub r2_validation: Option<f64>,
    /// Mean evaluation r² over all repeated splits.
    pub r2_cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Model trained on the first split.
    pub model: TrainedModel,
    pub training_rows: Vec<usize>,
    pub evaluation_rows: Vec<usize>,
    pub metrics: ModelMetrics,
    /// Evaluation r² of every split, first split first.
    pub fold_r2: Vec<Option<f64>>,
}

fn fit_split(data: &EncodedDataset, config: &ModelConfig, split: u64) -> Result<(TrainedModel, Vec<usize>, Vec<usize>), ModelError> {
    let (train, eval) = split_rows(data.len(), config.train_fraction, derive_seed(config.seed, 0x5_0117 + split));
    let model = train_mlp(&data.subset(&train), &ModelConfig {
        seed: derive_seed(config.seed, split),
        ..config.clone()
    })?;
    Ok((model, train, eval))
}

fn score(model: &TrainedModel, data: &EncodedDataset, rows: &[usize]) -> Option<f64> {
    let part = data.subset(rows);
    r_squared(part.targets.view(), model.predict(part.features.view()).view())
}

/// Trains on `train_fraction` of the rows and scores on the rest, repeated
/// `folds` times with independent seeded splits.
pub fn evaluate_protocol(data: &EncodedDataset, config: &ModelConfig) -> Result<Evaluation, ModelError> {
    config.validate()?;
    if data.len() < 2 {
        return Err(ModelError::EmptyDataset);
    }
    let (model, training_rows, evaluation_rows) = fit_split(data, config, 0)?;
    let r2_train = score(&model, data, &training_rows);
    let r2_validation = score(&model, data, &evaluation_rows);
    let mut fold_r2 = vec![r2_validation];
    for split in 1..config.folds as u64 {
        let (m, _, eval) = fit_split(data, config, split)?;
        fold_r2.push(score(&m, data, &eval));
    }
    let r2_cv = fold_r2
        .iter()
        .copied()
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64);
    Ok(Evaluation {
        model,
        training_rows,
        evaluation_rows,
        metrics: ModelMetrics {
            r2_train,
            r2_validation,
            r2_cv,
        },
        fold_r2,
    })
}
