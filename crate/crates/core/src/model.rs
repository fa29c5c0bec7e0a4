//! Training: weighting, region selection and coordinate building, plus the
//! serialized model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover_tree::{CoverTreeConfig, RootPolicy};
use crate::data::{CloudCollection, PointCloud, WeightMode};
use crate::error::{CderError, Result};
use crate::gaussian::{build_coordinate, GaussianCoordinate};
use crate::select::{select_regions, LevelTrace, SelectConfig};

/// Schema version written into every model file.
pub const MODEL_VERSION: u32 = 1;

/// Coordinates whose coefficient falls below this fraction of the largest
/// one are dropped.
pub const RELATIVE_COEFFICIENT_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub theta: f64,
    pub root_policy: RootPolicy,
    pub parsimonious: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let tree = CoverTreeConfig::default();
        Self {
            theta: tree.theta,
            root_policy: tree.root_policy,
            parsimonious: true,
            max_level: tree.max_level,
        }
    }
}

impl TrainConfig {
    pub fn select_config(&self) -> SelectConfig {
        SelectConfig {
            tree: CoverTreeConfig {
                theta: self.theta,
                root_policy: self.root_policy,
                max_level: self.max_level,
            },
            parsimonious: self.parsimonious,
        }
    }
}

/// A trained model: the ordered distributional coordinates and the label
/// dictionary they refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CderModel {
    pub version: u32,
    pub dimension: usize,
    pub theta: f64,
    pub parsimonious: bool,
    pub root_policy: RootPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<usize>,
    pub labels: Vec<String>,
    pub coordinates: Vec<GaussianCoordinate>,
}

/// What happened during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    /// Deepest cover-tree level built by the search.
    pub stop_level: usize,
    pub build_events: usize,
    pub coordinates: usize,
    pub dropped: usize,
    /// Smallest and largest coefficient, if any coordinate survived.
    pub coefficient_range: Option<(f64, f64)>,
    pub trace: Vec<LevelTrace>,
}

/// Trains on `collection`. Supplied weights are kept and normalized per
/// label; clouds without weights get the size-based scheme.
pub fn train(collection: &CloudCollection, config: &TrainConfig) -> Result<(CderModel, TrainSummary)> {
    let weighted = collection.assign_weights(WeightMode::PassThrough)?;
    let pooled = weighted.pool()?;
    let selection = select_regions(pooled, &config.select_config())?;
    let pooled = selection.tree.pooled();

    let per_event: Vec<Vec<GaussianCoordinate>> = selection
        .events
        .par_iter()
        .map(|event| {
            event
                .dominant_labels
                .iter()
                .map(|&label| build_coordinate(pooled, event, label))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let built: Vec<GaussianCoordinate> = per_event.into_iter().flatten().collect();

    let max_m = built.iter().map(|c| c.coefficient()).fold(0.0, f64::max);
    let floor = RELATIVE_COEFFICIENT_FLOOR * max_m;
    let n_built = built.len();
    let coordinates: Vec<GaussianCoordinate> = built
        .into_iter()
        .filter(|c| c.coefficient() > 0.0 && c.coefficient() >= floor)
        .collect();
    let coefficient_range = coordinates.iter().map(|c| c.coefficient()).fold(None, |acc, m| match acc {
        None => Some((m, m)),
        Some((lo, hi)) => Some((f64::min(lo, m), f64::max(hi, m))),
    });
    log::info!(
        "selection stopped at level {} with {} build events and {} coordinates",
        selection.stop_level,
        selection.events.len(),
        coordinates.len()
    );

    let summary = TrainSummary {
        stop_level: selection.stop_level,
        build_events: selection.events.len(),
        coordinates: coordinates.len(),
        dropped: n_built - coordinates.len(),
        coefficient_range,
        trace: selection.trace,
    };
    let model = CderModel {
        version: MODEL_VERSION,
        dimension: collection.dim(),
        theta: config.theta,
        parsimonious: config.parsimonious,
        root_policy: config.root_policy,
        max_level: config.max_level,
        labels: collection.labels().to_vec(),
        coordinates,
    };
    Ok((model, summary))
}

impl CderModel {
    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    /// The training configuration recorded in the model.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            theta: self.theta,
            root_policy: self.root_policy,
            parsimonious: self.parsimonious,
            max_level: self.max_level,
        }
    }

    /// Checks that the model is internally consistent. Run after loading.
    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(CderError::Malformed(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        for (i, c) in self.coordinates.iter().enumerate() {
            if c.label() >= self.labels.len() {
                return Err(CderError::Malformed(format!(
                    "coordinate {i} has label index {} outside 0..{}",
                    c.label(),
                    self.labels.len()
                )));
            }
            if c.dim() != self.dimension {
                return Err(CderError::DimensionMismatch {
                    expected: self.dimension,
                    found: c.dim(),
                    context: Some(format!("coordinate {i}")),
                });
            }
        }
        Ok(())
    }

    /// The feature vector of `cloud`, in model order.
    pub fn featurize(&self, cloud: &PointCloud) -> Result<Vec<f64>> {
        featurize(self, cloud)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }
}

/// `v[j] = evaluate(coordinates[j], cloud)`.
pub fn featurize(model: &CderModel, cloud: &PointCloud) -> Result<Vec<f64>> {
    if model.is_empty() {
        return Err(CderError::UntrainedModel);
    }
    model.coordinates.iter().map(|c| c.evaluate(cloud)).collect()
}

/// Plot data for one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub index: usize,
    pub label: String,
    pub label_index: usize,
    pub mean: Vec<f64>,
    /// Principal axes, each an eigenvector scaled by the root of its
    /// eigenvalue.
    pub axes: Vec<Vec<f64>>,
    pub coefficient: f64,
    /// `1 - dS`.
    pub certainty: f64,
    pub level: usize,
    pub radius: f64,
}

/// One record per coordinate, coarse to fine.
pub fn export_regions(model: &CderModel) -> Vec<RegionRecord> {
    let mut records: Vec<RegionRecord> = model
        .coordinates
        .iter()
        .enumerate()
        .map(|(index, c)| RegionRecord {
            index,
            label: model.labels[c.label()].clone(),
            label_index: c.label(),
            mean: c.mean().to_vec(),
            axes: c.ellipse_axes(),
            coefficient: c.coefficient(),
            certainty: 1.0 - c.provenance().delta_entropy,
            level: c.provenance().level,
            radius: c.provenance().radius,
        })
        .collect();
    records.sort_by_key(|r| r.level);
    records
}
