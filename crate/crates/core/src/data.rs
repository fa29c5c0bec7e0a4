//! Labeled, weighted pointclouds and the pooled point set the cover tree is
//! built on.
//!
//! Each label receives total weight `1/L`, each cloud of a label receives an
//! equal share of that, and every point of a cloud an equal share of its
//! cloud: `w(x) = 1 / (L * N_i * |X_i|)` where `N_i` counts the clouds that
//! carry the label of `X_i`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CderError, Result};

/// A point in `R^D`.
pub type Point = Vec<f64>;

/// One labeled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub id: String,
    /// Index into the owning collection's label dictionary.
    pub label: usize,
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(id: impl Into<String>, label: usize, points: Vec<Point>) -> Self {
        Self {
            id: id.into(),
            label,
            points,
            weights: None,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    /// Point weights, falling back to uniform `1/|X|` when none were assigned.
    pub fn weights_or_uniform(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.clone(),
            None => vec![1.0 / self.points.len() as f64; self.points.len()],
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.points.is_empty() {
            return Err(CderError::EmptyCloud(self.id.clone()));
        }
        for p in &self.points {
            if p.len() != dim {
                return Err(CderError::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                    context: Some(format!("cloud `{}`", self.id)),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(CderError::NonFinite(self.id.clone()));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.points.len() {
                return Err(CderError::InvalidCollection(format!(
                    "cloud `{}` has {} weights for {} points",
                    self.id,
                    w.len(),
                    self.points.len()
                )));
            }
            if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(CderError::InvalidWeight(self.id.clone()));
            }
        }
        Ok(())
    }
}

/// How [`CloudCollection::assign_weights`] treats weights already present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Discard any existing weights and recompute them from cloud sizes.
    Overwrite,
    /// Keep supplied weights, rescaled so that each label totals `1/L`.
    /// Clouds without weights get the size-based weights.
    #[default]
    PassThrough,
}

/// A labeled cloud collection sharing one Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudCollection {
    labels: Vec<String>,
    clouds: Vec<PointCloud>,
    dim: usize,
}

impl CloudCollection {
    /// Validates and wraps `clouds`. Every label index must be in range and
    /// every label must be carried by at least one cloud.
    pub fn new(labels: Vec<String>, clouds: Vec<PointCloud>) -> Result<Self> {
        if clouds.is_empty() {
            return Err(CderError::NoClouds);
        }
        let dim = clouds[0]
            .dim()
            .ok_or_else(|| CderError::EmptyCloud(clouds[0].id.clone()))?;
        if dim == 0 {
            return Err(CderError::InvalidCollection("dimension must be at least 1".into()));
        }
        let mut seen = vec![false; labels.len()];
        for cloud in &clouds {
            cloud.validate(dim)?;
            match seen.get_mut(cloud.label) {
                Some(s) => *s = true,
                None => {
                    return Err(CderError::InvalidCollection(format!(
                        "cloud `{}` has label index {} outside 0..{}",
                        cloud.id,
                        cloud.label,
                        labels.len()
                    )))
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(CderError::InvalidCollection(format!(
                "label `{}` has no clouds",
                labels[missing]
            )));
        }
        Ok(Self { labels, clouds, dim })
    }

    /// Builds a collection from string labels, canonicalized to `0..L` in
    /// order of first appearance.
    pub fn from_named<S: AsRef<str>>(clouds: Vec<(String, S, Vec<Point>)>) -> Result<Self> {
        let mut dict = LabelDictionary::default();
        let clouds = clouds
            .into_iter()
            .map(|(id, label, points)| {
                let idx = dict.intern(label.as_ref());
                PointCloud::new(id, idx, points)
            })
            .collect();
        Self::new(dict.into_labels(), clouds)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn clouds(&self) -> &[PointCloud] {
        &self.clouds
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.clouds.iter().map(PointCloud::len).sum()
    }

    pub fn is_weighted(&self) -> bool {
        self.clouds.iter().all(|c| c.weights.is_some())
    }

    /// Number of clouds carrying each label.
    pub fn clouds_per_label(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.len()];
        for c in &self.clouds {
            counts[c.label] += 1;
        }
        counts
    }

    /// The sub-collection made of the clouds at `indices`, keeping the full
    /// label dictionary.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let clouds = indices.iter().map(|&i| self.clouds[i].clone()).collect();
        Self::new(self.labels.clone(), clouds)
    }

    /// Assigns `w(x) = 1/(L * N_i * |X_i|)` to every point.
    pub fn assign_weights(&self, mode: WeightMode) -> Result<Self> {
        let n_labels = self.labels.len() as f64;
        let per_label = self.clouds_per_label();
        let mut clouds = self.clouds.clone();
        let mut supplied = vec![false; self.labels.len()];

        for cloud in &mut clouds {
            let keep = mode == WeightMode::PassThrough && cloud.weights.is_some();
            if keep {
                supplied[cloud.label] = true;
            } else {
                let w = 1.0 / (n_labels * per_label[cloud.label] as f64 * cloud.len() as f64);
                cloud.weights = Some(vec![w; cloud.len()]);
            }
        }

        if supplied.iter().any(|&s| s) {
            let mut totals = vec![0.0; self.labels.len()];
            for cloud in &clouds {
                totals[cloud.label] += cloud.weights.as_ref().unwrap().iter().sum::<f64>();
            }
            for cloud in &mut clouds {
                if supplied[cloud.label] {
                    let scale = 1.0 / (n_labels * totals[cloud.label]);
                    for w in cloud.weights.as_mut().unwrap() {
                        *w *= scale;
                    }
                }
            }
        }

        Ok(Self {
            labels: self.labels.clone(),
            clouds,
            dim: self.dim,
        })
    }

    /// Concatenates all clouds, in cloud order then point order.
    pub fn pool(&self) -> Result<PooledPoints> {
        if !self.is_weighted() {
            return Err(CderError::Unweighted);
        }
        let n = self.n_points();
        let mut pooled = PooledPoints {
            dim: self.dim,
            n_labels: self.labels.len(),
            coords: Vec::with_capacity(n * self.dim),
            weights: Vec::with_capacity(n),
            labels: Vec::with_capacity(n),
            origin: Vec::with_capacity(n),
        };
        for (ci, cloud) in self.clouds.iter().enumerate() {
            let weights = cloud.weights.as_ref().expect("checked above");
            for (p, &w) in cloud.points.iter().zip(weights) {
                pooled.coords.extend_from_slice(p);
                pooled.weights.push(w);
                pooled.labels.push(cloud.label);
                pooled.origin.push(ci);
            }
        }
        Ok(pooled)
    }
}

/// Maps external label names to contiguous indices.
#[derive(Debug, Clone, Default)]
pub struct LabelDictionary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelDictionary {
    pub fn from_names(names: &[String]) -> Result<Self> {
        let mut dict = Self::default();
        for name in names {
            if dict.index.contains_key(name) {
                return Err(CderError::InvalidCollection(format!("duplicate label `{name}`")));
            }
            dict.intern(name);
        }
        Ok(dict)
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn into_labels(self) -> Vec<String> {
        self.names
    }
}

/// The union of all clouds with per-point weight, label and origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledPoints {
    dim: usize,
    n_labels: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    labels: Vec<usize>,
    origin: Vec<usize>,
}

impl PooledPoints {
    /// Builds a pooled set directly from rows; mostly useful in tests and
    /// benchmarks that do not go through a [`CloudCollection`].
    pub fn from_rows(
        points: &[Point],
        weights: Vec<f64>,
        labels: Vec<usize>,
        n_labels: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(CderError::EmptyPointSet);
        }
        let dim = points[0].len();
        if weights.len() != points.len() || labels.len() != points.len() {
            return Err(CderError::InvalidCollection("row count mismatch".into()));
        }
        if labels.iter().any(|&l| l >= n_labels) {
            return Err(CderError::InvalidCollection("label out of range".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(CderError::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                    context: None,
                });
            }
            coords.extend_from_slice(p);
        }
        let n = points.len();
        Ok(Self {
            dim,
            n_labels,
            coords,
            weights,
            labels,
            origin: (0..n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Index of the source cloud of each point.
    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn label_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_labels];
        for (&l, &w) in self.labels.iter().zip(&self.weights) {
            totals[l] += w;
        }
        totals
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
