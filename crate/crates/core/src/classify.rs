//! Per-label norm classifier and the cross-validation harness.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CloudCollection, PointCloud};
use crate::error::{CderError, Result};
use crate::model::{featurize, train, CderModel, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    /// `sqrt(sum of squared features)` over the coordinates of each label.
    pub per_label_norms: Vec<f64>,
    /// Set when the largest norm is shared by several labels.
    pub low_confidence: bool,
}

/// Predicts the label whose coordinates respond most strongly to `cloud`.
/// Ties go to the lowest label index.
pub fn predict(model: &CderModel, cloud: &PointCloud) -> Result<Prediction> {
    let features = featurize(model, cloud)?;
    let mut sq = vec![0.0; model.n_labels()];
    for (c, v) in model.coordinates.iter().zip(&features) {
        sq[c.label()] += v * v;
    }
    if sq.iter().any(|v| !v.is_finite()) {
        return Err(CderError::Numerical(format!("non-finite feature norm for cloud `{}`", cloud.id)));
    }
    let per_label_norms: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
    let best = per_label_norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let label = per_label_norms.iter().position(|&n| n == best).unwrap_or(0);
    let low_confidence = per_label_norms.iter().filter(|&&n| n == best).count() > 1;
    Ok(Prediction {
        label,
        per_label_norms,
        low_confidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    /// Share of each label's clouds held out per repetition.
    pub test_fraction: f64,
    pub seed: u64,
    /// Partition each label's clouds into `folds` disjoint test sets
    /// instead of drawing independent resamples.
    pub disjoint: bool,
    pub train: TrainConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            test_fraction: 0.2,
            seed: 0,
            disjoint: false,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub per_fold_accuracy: Vec<f64>,
    pub per_fold_train_accuracy: Vec<f64>,
    pub per_fold_test_count: Vec<usize>,
    pub mean_accuracy: f64,
    /// `confusion[true][predicted]`, summed over folds.
    pub confusion: Vec<Vec<usize>>,
    pub labels: Vec<String>,
}

/// Cloud indices of each label, in collection order.
fn by_label(collection: &CloudCollection) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); collection.n_labels()];
    for (i, c) in collection.clouds().iter().enumerate() {
        groups[c.label].push(i);
    }
    groups
}

/// Stratified held-out sets, one per fold. Each fold draws from its own
/// ChaCha8 stream so a fold's split does not depend on the others.
pub fn stratified_splits(collection: &CloudCollection, config: &CvConfig) -> Result<Vec<Vec<usize>>> {
    if config.folds == 0 {
        return Err(CderError::InvalidCollection("at least one fold is required".into()));
    }
    let groups = by_label(collection);
    let min_clouds = if config.disjoint { config.folds.max(2) } else { 2 };
    for (l, g) in groups.iter().enumerate() {
        if g.len() < min_clouds {
            return Err(CderError::CannotStratify(collection.labels()[l].clone(), min_clouds));
        }
    }

    if config.disjoint {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut tests = vec![Vec::new(); config.folds];
        for g in &groups {
            let mut g = g.clone();
            g.shuffle(&mut rng);
            for (pos, idx) in g.into_iter().enumerate() {
                tests[pos % config.folds].push(idx);
            }
        }
        tests.iter_mut().for_each(|t| t.sort_unstable());
        return Ok(tests);
    }

    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) {
        return Err(CderError::InvalidCollection(format!(
            "test fraction must lie in (0, 1), got {}",
            config.test_fraction
        )));
    }
    Ok((0..config.folds)
        .map(|fold| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(fold as u64);
            let mut test = Vec::new();
            for g in &groups {
                let k = ((g.len() as f64 * config.test_fraction).round() as usize).clamp(1, g.len() - 1);
                let mut g = g.clone();
                g.shuffle(&mut rng);
                test.extend_from_slice(&g[..k]);
            }
            test.sort_unstable();
            test
        })
        .collect())
}

struct FoldOutcome {
    accuracy: f64,
    train_accuracy: f64,
    test_count: usize,
    confusion: Vec<Vec<usize>>,
}

fn run_fold(collection: &CloudCollection, test: &[usize], config: &TrainConfig) -> Result<FoldOutcome> {
    let n_labels = collection.n_labels();
    let train_idx: Vec<usize> = (0..collection.clouds().len())
        .filter(|i| test.binary_search(i).is_err())
        .collect();
    let (model, _) = train(&collection.subset(&train_idx)?, config)?;

    let mut confusion = vec![vec![0; n_labels]; n_labels];
    let mut correct = 0;
    for &i in test {
        let cloud = &collection.clouds()[i];
        let p = predict(&model, cloud)?;
        confusion[cloud.label][p.label] += 1;
        correct += usize::from(p.label == cloud.label);
    }
    let mut train_correct = 0;
    for &i in &train_idx {
        let cloud = &collection.clouds()[i];
        train_correct += usize::from(predict(&model, cloud)?.label == cloud.label);
    }
    Ok(FoldOutcome {
        accuracy: correct as f64 / test.len() as f64,
        train_accuracy: train_correct as f64 / train_idx.len() as f64,
        test_count: test.len(),
        confusion,
    })
}

/// Repeated stratified hold-out evaluation, split by cloud. Deterministic
/// for a given seed.
pub fn cross_validate(collection: &CloudCollection, config: &CvConfig) -> Result<CvReport> {
    let splits = stratified_splits(collection, config)?;
    let outcomes: Vec<FoldOutcome> = splits
        .par_iter()
        .map(|test| run_fold(collection, test, &config.train))
        .collect::<Result<_>>()?;

    let n_labels = collection.n_labels();
    let mut confusion = vec![vec![0; n_labels]; n_labels];
    for o in &outcomes {
        for (row, add) in confusion.iter_mut().zip(&o.confusion) {
            for (c, a) in row.iter_mut().zip(add) {
                *c += a;
            }
        }
    }
    let per_fold_accuracy: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let per_fold_train_accuracy: Vec<f64> = outcomes.iter().map(|o| o.train_accuracy).collect();
    let mean_accuracy = per_fold_accuracy.iter().sum::<f64>() / per_fold_accuracy.len() as f64;
    let mean_train = per_fold_train_accuracy.iter().sum::<f64>() / per_fold_train_accuracy.len() as f64;
    log::info!("cross-validation: test accuracy {mean_accuracy:.4}, train accuracy {mean_train:.4}");
    Ok(CvReport {
        folds: outcomes.len(),
        per_fold_accuracy,
        per_fold_train_accuracy,
        per_fold_test_count: outcomes.iter().map(|o| o.test_count).collect(),
        mean_accuracy,
        confusion,
        labels: collection.labels().to_vec(),
    })
}
