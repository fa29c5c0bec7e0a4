//! Gaussian distributional coordinates.
//!
//! Each coordinate is a unit-mass Gaussian `g` scaled by a coefficient
//! `m = w * (1 - dS) * r^D`, where `w` is the weight of its label in the
//! selected region, `dS` the entropy lost by erasing non-dominant labels, and
//! `r` the cover-tree radius the region was found at. Integrating it against
//! a weighted cloud gives `m * sum_j w_j g(x_j)`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{PointCloud, PooledPoints};
use crate::error::{CderError, Result};
use crate::select::BuildEvent;

/// Smallest eigenvalue allowed in a fitted covariance.
pub fn covariance_floor(radius: f64) -> f64 {
    f64::max(1e-12, 1e-6 * radius * radius)
}

/// `w * (1 - dS) * r^D`.
pub fn coefficient(weight: f64, delta_entropy: f64, radius: f64, dim: usize) -> f64 {
    weight * (1.0 - delta_entropy) * radius.powi(dim as i32)
}

/// Weighted mean and covariance of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: Vec<f64>,
    /// Row-major `D x D`.
    pub covariance: Vec<f64>,
}

/// Weighted mean and second central moment (normalized by the total
/// weight), with eigenvalues raised to at least `floor`.
pub fn fit_gaussian<'a, I>(points: I, dim: usize, floor: f64) -> Result<GaussianFit>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let points: Vec<(&[f64], f64)> = points.into_iter().collect();
    if points.is_empty() {
        return Err(CderError::EmptyPointSet);
    }
    let total: f64 = points.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(CderError::InvalidWeight("gaussian fit".into()));
    }
    let mut mean = vec![0.0; dim];
    for (p, w) in &points {
        if p.len() != dim {
            return Err(CderError::DimensionMismatch {
                expected: dim,
                found: p.len(),
                context: None,
            });
        }
        for (m, v) in mean.iter_mut().zip(*p) {
            *m += w * v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for (p, w) in &points {
        let centered = DVector::from_iterator(dim, p.iter().zip(&mean).map(|(v, m)| v - m));
        cov.ger(*w / total, &centered, &centered, 1.0);
    }
    let cov = floor_eigenvalues(cov, floor);
    Ok(GaussianFit {
        mean,
        covariance: row_major(&cov),
    })
}

fn floor_eigenvalues(cov: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let dim = cov.nrows();
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return cov;
    }
    let lambda = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(floor)));
    let rebuilt = &eig.eigenvectors * lambda * eig.eigenvectors.transpose();
    let sym = (&rebuilt + rebuilt.transpose()) * 0.5;
    debug_assert_eq!(sym.nrows(), dim);
    sym
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Where a coordinate came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub adult: usize,
    pub level: usize,
    pub radius: f64,
    pub delta_entropy: f64,
    /// Weight of the coordinate's label in the region.
    pub weight: f64,
}

/// Cholesky factor and log normalizer, derived from mean and covariance.
#[derive(Debug, Clone)]
struct Density {
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl Density {
    fn new(covariance: &[f64], dim: usize) -> Result<Self> {
        let cov = DMatrix::from_row_slice(dim, dim, covariance);
        let chol = Cholesky::new(cov)
            .ok_or_else(|| CderError::Numerical("covariance is not positive definite".into()))?;
        let l = chol.l();
        let log_det: f64 = 2.0 * (0..dim).map(|i| l[(i, i)].ln()).sum::<f64>();
        let log_norm = -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self { chol: l, log_norm })
    }
}

/// One distributional coordinate: `m * N(mean, covariance)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CoordinateRecord", into = "CoordinateRecord")]
pub struct GaussianCoordinate {
    label: usize,
    mean: Vec<f64>,
    covariance: Vec<f64>,
    coefficient: f64,
    provenance: Provenance,
    density: Density,
}

impl PartialEq for GaussianCoordinate {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.mean == other.mean
            && self.covariance == other.covariance
            && self.coefficient == other.coefficient
            && self.provenance == other.provenance
    }
}

impl GaussianCoordinate {
    pub fn new(
        label: usize,
        mean: Vec<f64>,
        covariance: Vec<f64>,
        coefficient: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        let dim = mean.len();
        if covariance.len() != dim * dim {
            return Err(CderError::DimensionMismatch {
                expected: dim * dim,
                found: covariance.len(),
                context: Some("covariance".into()),
            });
        }
        let density = Density::new(&covariance, dim)?;
        Ok(Self {
            label,
            mean,
            covariance,
            coefficient,
            provenance,
            density,
        })
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major `D x D`.
    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Unit-mass Gaussian density at `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let centered = DVector::from_iterator(self.dim(), x.iter().zip(&self.mean).map(|(v, m)| v - m));
        let z = self
            .density
            .chol
            .solve_lower_triangular(&centered)
            .expect("cholesky factor has a positive diagonal");
        (self.density.log_norm - 0.5 * z.norm_squared()).exp()
    }

    /// `m * sum_j w_j g(x_j)`; clouds without weights count each point as
    /// `1/|X|`.
    pub fn evaluate(&self, cloud: &PointCloud) -> Result<f64> {
        if let Some(d) = cloud.points.iter().map(Vec::len).find(|&d| d != self.dim()) {
            return Err(CderError::DimensionMismatch {
                expected: self.dim(),
                found: d,
                context: Some(format!("cloud `{}`", cloud.id)),
            });
        }
        let weights = cloud.weights_or_uniform();
        let sum: f64 = cloud
            .points
            .iter()
            .zip(&weights)
            .map(|(p, w)| w * self.density(p))
            .sum();
        Ok(self.coefficient * sum)
    }

    /// Principal axes: eigenvectors scaled by the square roots of their
    /// eigenvalues, one axis per entry.
    pub fn ellipse_axes(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let cov = DMatrix::from_row_slice(dim, dim, &self.covariance);
        let eig = SymmetricEigen::new(cov);
        (0..dim)
            .map(|k| {
                let s = eig.eigenvalues[k].max(0.0).sqrt();
                eig.eigenvectors.column(k).iter().map(|v| v * s).collect()
            })
            .collect()
    }
}

/// Flat on-disk form of a coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CoordinateRecord {
    label: usize,
    mean: Vec<f64>,
    covariance: Vec<f64>,
    coefficient: f64,
    adult: usize,
    level: usize,
    radius: f64,
    delta_entropy: f64,
    weight: f64,
}

impl From<GaussianCoordinate> for CoordinateRecord {
    fn from(c: GaussianCoordinate) -> Self {
        Self {
            label: c.label,
            mean: c.mean,
            covariance: c.covariance,
            coefficient: c.coefficient,
            adult: c.provenance.adult,
            level: c.provenance.level,
            radius: c.provenance.radius,
            delta_entropy: c.provenance.delta_entropy,
            weight: c.provenance.weight,
        }
    }
}

impl TryFrom<CoordinateRecord> for GaussianCoordinate {
    type Error = CderError;

    fn try_from(r: CoordinateRecord) -> Result<Self> {
        GaussianCoordinate::new(
            r.label,
            r.mean,
            r.covariance,
            r.coefficient,
            Provenance {
                adult: r.adult,
                level: r.level,
                radius: r.radius,
                delta_entropy: r.delta_entropy,
                weight: r.weight,
            },
        )
    }
}

/// Fits the Gaussian for one dominant label of a build event.
pub fn build_coordinate(
    pooled: &PooledPoints,
    event: &BuildEvent,
    label: usize,
) -> Result<GaussianCoordinate> {
    if !event.dominant_labels.contains(&label) {
        return Err(CderError::NotDominant(label));
    }
    let dim = pooled.dim();
    let fit = fit_gaussian(
        event
            .region
            .iter()
            .filter(|&&x| pooled.label(x) == label)
            .map(|&x| (pooled.point(x), pooled.weight(x))),
        dim,
        covariance_floor(event.radius),
    )?;
    let weight = event.label_weights[label];
    let provenance = Provenance {
        adult: event.adult,
        level: event.level,
        radius: event.radius,
        delta_entropy: event.delta_entropy,
        weight,
    };
    GaussianCoordinate::new(
        label,
        fit.mean,
        fit.covariance,
        coefficient(weight, event.delta_entropy, event.radius, dim),
        provenance,
    )
}
