//! Seeded synthetic cloud collections.
//!
//! Every cloud draws from its own ChaCha8 stream: the generator is seeded
//! with `seed_from_u64(seed)` and switched to stream `cloud_index`, so a
//! cloud's points do not depend on how many numbers other clouds consumed.
//! Experiment-wide draws (deep-field components and cloud counts) use
//! stream [`GLOBAL_STREAM`].

use std::f64::consts::PI;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{CloudCollection, Point, PointCloud};
use crate::error::{CderError, Result};

pub const GLOBAL_STREAM: u64 = u64::MAX;

pub const TWO_LABELS: [&str; 2] = ["magenta", "green"];
pub const THREE_LABELS: [&str; 3] = ["magenta", "green", "orange"];

pub const BLOBS_CLOUDS_PER_LABEL: usize = 25;
pub const BLOBS_BACKGROUND: usize = 100;
pub const BLOBS_BUMP_POINTS: usize = 2;
pub const BLOBS_BUMP_SIGMA: f64 = 0.2;
pub const BLOBS_BUMPS: [[[f64; 2]; 4]; 2] = [
    [[4.0, 0.0], [5.0, 0.0], [-3.0, 0.0], [-6.0, 0.0]],
    [[-4.0, 0.0], [-5.0, 0.0], [3.0, 0.0], [6.0, 0.0]],
];

pub const BLOCKS_CLOUDS_PER_LABEL: usize = 100;
pub const BLOCKS_BACKGROUND: usize = 30;
pub const BLOCKS_BUMP_POINTS: usize = 2;
pub const BLOCKS_BUMP_SIDE: f64 = 0.1;
pub const BLOCKS_BUMPS: [[[f64; 2]; 2]; 2] = [[[0.25, 0.25], [0.5, 0.5]], [[0.75, 0.75], [0.5, 0.5]]];

pub const DEEPFIELD_COMPONENTS: usize = 50;
pub const DEEPFIELD_SIDE: f64 = 10.0;
pub const DEEPFIELD_MAX_VARIANCE: f64 = 0.5;
pub const DEEPFIELD_AMPLIFICATION: (f64, f64) = (50.0, 5000.0);
pub const DEEPFIELD_CLOUDS_PER_LABEL: (usize, usize) = (20, 40);
pub const DEEPFIELD_CLOUD_SIZE: (usize, usize) = (50, 500);

pub const THREE_CLOUDS_PER_LABEL: usize = 25;
pub const THREE_POINTS_PER_CLOUD: usize = 90;
const S3: f64 = 3.464_101_615_137_754_6; // 2 * sqrt(3)
pub const THREE_MEANS: [[[f64; 2]; 3]; 3] = [
    [[0.0, 0.0], [4.0, 0.0], [-2.0, S3]],
    [[0.0, 0.0], [-2.0, S3], [-2.0, -S3]],
    [[0.0, 0.0], [-2.0, -S3], [4.0, 0.0]],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Blobs,
    Blocks,
    DeepField,
    ThreeLabels,
}

impl FromStr for Experiment {
    type Err = CderError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "blobs" => Ok(Self::Blobs),
            "blocks" => Ok(Self::Blocks),
            "deep-field" | "deepfield" => Ok(Self::DeepField),
            "three-labels" | "threelabels" => Ok(Self::ThreeLabels),
            other => Err(CderError::Malformed(format!("unknown experiment `{other}`"))),
        }
    }
}

/// Optional size overrides.
///
/// `points_per_cloud` is the number of background points for blobs and
/// blocks, the total cloud size for three labels, and a fixed cloud size
/// (instead of a random one) for the deep field. `clouds_per_label` fixes
/// the number of clouds of every label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overrides {
    pub clouds_per_label: Option<usize>,
    pub points_per_cloud: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub experiment: Experiment,
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
}

impl GeneratorSpec {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        Self {
            experiment,
            seed,
            overrides: Overrides::default(),
        }
    }

    /// The collection, plus the mixture it was drawn from for the deep
    /// field.
    pub fn generate(&self) -> Result<(CloudCollection, Option<DeepFieldTruth>)> {
        let o = &self.overrides;
        if o.clouds_per_label == Some(0) || o.points_per_cloud == Some(0) {
            return Err(CderError::InvalidCollection("override counts must be positive".into()));
        }
        Ok(match self.experiment {
            Experiment::Blobs => (blobs(self.seed, o)?, None),
            Experiment::Blocks => (blocks(self.seed, o)?, None),
            Experiment::DeepField => {
                let (c, t) = deepfield(self.seed, o)?;
                (c, Some(t))
            }
            Experiment::ThreeLabels => (threelabels(self.seed, o)?, None),
        })
    }
}

fn cloud_rng(seed: u64, cloud: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cloud as u64);
    rng
}

fn normal_point(rng: &mut ChaCha8Rng, mean: [f64; 2], sigma: f64) -> Point {
    let zx: f64 = rng.sample(StandardNormal);
    let zy: f64 = rng.sample(StandardNormal);
    vec![mean[0] + sigma * zx, mean[1] + sigma * zy]
}

fn uniform_point(rng: &mut ChaCha8Rng, center: [f64; 2], side: f64) -> Point {
    let h = side / 2.0;
    vec![
        rng.random_range(center[0] - h..center[0] + h),
        rng.random_range(center[1] - h..center[1] + h),
    ]
}

fn collect(labels: &[&str], clouds: Vec<PointCloud>) -> Result<CloudCollection> {
    CloudCollection::new(labels.iter().map(|s| s.to_string()).collect(), clouds)
}

/// Two labels sharing a standard-normal background, told apart by small
/// bumps placed symmetrically on the x axis.
pub fn gen_blobs(seed: u64) -> Result<CloudCollection> {
    blobs(seed, &Overrides::default())
}

fn blobs(seed: u64, o: &Overrides) -> Result<CloudCollection> {
    let per_label = o.clouds_per_label.unwrap_or(BLOBS_CLOUDS_PER_LABEL);
    let background = o.points_per_cloud.unwrap_or(BLOBS_BACKGROUND);
    let mut clouds = Vec::with_capacity(2 * per_label);
    for label in 0..2 {
        for k in 0..per_label {
            let idx = label * per_label + k;
            let mut rng = cloud_rng(seed, idx);
            let mut pts: Vec<Point> = (0..background).map(|_| normal_point(&mut rng, [0.0, 0.0], 1.0)).collect();
            for mean in BLOBS_BUMPS[label] {
                for _ in 0..BLOBS_BUMP_POINTS {
                    pts.push(normal_point(&mut rng, mean, BLOBS_BUMP_SIGMA));
                }
            }
            clouds.push(PointCloud::new(format!("blobs-{label}-{k:03}"), label, pts));
        }
    }
    collect(&TWO_LABELS, clouds)
}

/// Two labels over uniform unit-square noise, each with two small dense
/// squares, one of them shared.
pub fn gen_blocks(seed: u64) -> Result<CloudCollection> {
    blocks(seed, &Overrides::default())
}

fn blocks(seed: u64, o: &Overrides) -> Result<CloudCollection> {
    let per_label = o.clouds_per_label.unwrap_or(BLOCKS_CLOUDS_PER_LABEL);
    let background = o.points_per_cloud.unwrap_or(BLOCKS_BACKGROUND);
    let mut clouds = Vec::with_capacity(2 * per_label);
    for label in 0..2 {
        for k in 0..per_label {
            let idx = label * per_label + k;
            let mut rng = cloud_rng(seed, idx);
            let mut pts: Vec<Point> = (0..background).map(|_| uniform_point(&mut rng, [0.5, 0.5], 1.0)).collect();
            for center in BLOCKS_BUMPS[label] {
                for _ in 0..BLOCKS_BUMP_POINTS {
                    pts.push(uniform_point(&mut rng, center, BLOCKS_BUMP_SIDE));
                }
            }
            clouds.push(PointCloud::new(format!("blocks-{label}-{k:03}"), label, pts));
        }
    }
    collect(&TWO_LABELS, clouds)
}

/// One anisotropic Gaussian of the deep-field mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub label: usize,
    pub mean: [f64; 2],
    /// Variances along the two principal axes before rotation.
    pub variances: [f64; 2],
    pub angle: f64,
    /// Relative sample size.
    pub amplification: f64,
}

impl MixtureComponent {
    /// Row-major 2x2 covariance `R diag(variances) R^T`.
    pub fn covariance(&self) -> [f64; 4] {
        let (s, c) = self.angle.sin_cos();
        let [a, b] = self.variances;
        let xy = (a - b) * c * s;
        [a * c * c + b * s * s, xy, xy, a * s * s + b * c * c]
    }

    pub fn largest_sigma(&self) -> f64 {
        self.variances[0].max(self.variances[1]).sqrt()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        let (s, c) = self.angle.sin_cos();
        let u: f64 = rng.sample::<f64, _>(StandardNormal) * self.variances[0].sqrt();
        let v: f64 = rng.sample::<f64, _>(StandardNormal) * self.variances[1].sqrt();
        vec![self.mean[0] + c * u - s * v, self.mean[1] + s * u + c * v]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepFieldTruth {
    pub components: Vec<MixtureComponent>,
}

impl DeepFieldTruth {
    /// Indices of the components carrying `label`.
    pub fn components_of(&self, label: usize) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&i| self.components[i].label == label)
            .collect()
    }

    /// Selection probabilities of `label`'s components, proportional to
    /// amplification, aligned with [`Self::components_of`].
    pub fn mixture_weights(&self, label: usize) -> Vec<f64> {
        let idx = self.components_of(label);
        let total: f64 = idx.iter().map(|&i| self.components[i].amplification).sum();
        idx.iter().map(|&i| self.components[i].amplification / total).collect()
    }

    /// Draws one point of `label`'s mixture; returns the component index
    /// with it.
    pub fn sample(&self, label: usize, rng: &mut ChaCha8Rng) -> Result<(usize, Point)> {
        let (idx, pick) = self.sampler(label)?;
        let c = idx[pick.sample(rng)];
        Ok((c, self.components[c].sample(rng)))
    }

    fn sampler(&self, label: usize) -> Result<(Vec<usize>, WeightedIndex<f64>)> {
        let idx = self.components_of(label);
        let amps: Vec<f64> = idx.iter().map(|&i| self.components[i].amplification).collect();
        let pick = WeightedIndex::new(&amps)
            .map_err(|e| CderError::Numerical(format!("mixture weights: {e}")))?;
        Ok((idx, pick))
    }
}

/// Draws the 50-component mixture. If the coin flips leave a label with no
/// component, the last component is given to it.
fn deepfield_truth(rng: &mut ChaCha8Rng) -> DeepFieldTruth {
    let mut components: Vec<MixtureComponent> = (0..DEEPFIELD_COMPONENTS)
        .map(|_| {
            let label = usize::from(rng.random_bool(0.5));
            let mean = [
                rng.random_range(0.0..DEEPFIELD_SIDE),
                rng.random_range(0.0..DEEPFIELD_SIDE),
            ];
            // (0, max]: flip a draw from [0, 1)
            let variances = [
                DEEPFIELD_MAX_VARIANCE * (1.0 - rng.random::<f64>()),
                DEEPFIELD_MAX_VARIANCE * (1.0 - rng.random::<f64>()),
            ];
            let angle = rng.random_range(0.0..2.0 * PI);
            let amplification = rng.random_range(DEEPFIELD_AMPLIFICATION.0..=DEEPFIELD_AMPLIFICATION.1);
            MixtureComponent {
                label,
                mean,
                variances,
                angle,
                amplification,
            }
        })
        .collect();
    for label in 0..2 {
        if components.iter().all(|c| c.label != label) {
            components.last_mut().expect("components").label = label;
        }
    }
    DeepFieldTruth { components }
}

/// Two labels drawn from random anisotropic Gaussian mixtures with unequal
/// cloud counts and sizes.
pub fn gen_deepfield(seed: u64) -> Result<(CloudCollection, DeepFieldTruth)> {
    deepfield(seed, &Overrides::default())
}

fn deepfield(seed: u64, o: &Overrides) -> Result<(CloudCollection, DeepFieldTruth)> {
    let mut global = cloud_rng(seed, 0);
    global.set_stream(GLOBAL_STREAM);
    let truth = deepfield_truth(&mut global);
    let counts: Vec<usize> = (0..2)
        .map(|_| {
            o.clouds_per_label
                .unwrap_or_else(|| global.random_range(DEEPFIELD_CLOUDS_PER_LABEL.0..=DEEPFIELD_CLOUDS_PER_LABEL.1))
        })
        .collect();

    let mut clouds = Vec::new();
    let mut idx = 0;
    for (label, &count) in counts.iter().enumerate() {
        let (members, pick) = truth.sampler(label)?;
        for k in 0..count {
            let mut rng = cloud_rng(seed, idx);
            idx += 1;
            let size = o
                .points_per_cloud
                .unwrap_or_else(|| rng.random_range(DEEPFIELD_CLOUD_SIZE.0..=DEEPFIELD_CLOUD_SIZE.1));
            let pts = (0..size)
                .map(|_| truth.components[members[pick.sample(&mut rng)]].sample(&mut rng))
                .collect();
            clouds.push(PointCloud::new(format!("deepfield-{label}-{k:03}"), label, pts));
        }
    }
    Ok((collect(&TWO_LABELS, clouds)?, truth))
}

/// Three labels, each a sum of three unit Gaussians; every pair of labels
/// shares two components and all three share the origin.
pub fn gen_threelabels(seed: u64) -> Result<CloudCollection> {
    threelabels(seed, &Overrides::default())
}

fn threelabels(seed: u64, o: &Overrides) -> Result<CloudCollection> {
    let per_label = o.clouds_per_label.unwrap_or(THREE_CLOUDS_PER_LABEL);
    let size = o.points_per_cloud.unwrap_or(THREE_POINTS_PER_CLOUD);
    let mut clouds = Vec::with_capacity(3 * per_label);
    for label in 0..3 {
        for k in 0..per_label {
            let idx = label * per_label + k;
            let mut rng = cloud_rng(seed, idx);
            let pts = (0..size)
                .map(|j| normal_point(&mut rng, THREE_MEANS[label][j % 3], 1.0))
                .collect();
            clouds.push(PointCloud::new(format!("three-{label}-{k:03}"), label, pts));
        }
    }
    collect(&THREE_LABELS, clouds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::WeightMode;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn blobs_shape() {
        let c = gen_blobs(7).unwrap();
        assert_eq!(c.clouds().len(), 50);
        assert!(c.clouds().iter().all(|x| x.len() == 108));
        assert_eq!(c.dim(), 2);
        assert_eq!(c.clouds_per_label(), vec![25, 25]);
        let totals = c.assign_weights(WeightMode::Overwrite).unwrap().pool().unwrap().label_totals();
        assert!(totals.iter().all(|t| (t - 0.5).abs() < 1e-9));
    }

    #[test]
    fn generators_are_deterministic() {
        for e in [Experiment::Blobs, Experiment::Blocks, Experiment::DeepField, Experiment::ThreeLabels] {
            let a = GeneratorSpec::new(e, 99).generate().unwrap();
            let b = GeneratorSpec::new(e, 99).generate().unwrap();
            assert_eq!(a, b);
            let c = GeneratorSpec::new(e, 100).generate().unwrap();
            assert_ne!(a.0, c.0);
        }
    }

    #[test]
    fn blocks_shape() {
        let c = gen_blocks(3).unwrap();
        assert_eq!(c.clouds().len(), 200);
        assert!(c.clouds().iter().all(|x| x.len() == 34));
        for p in c.clouds().iter().flat_map(|x| &x.points) {
            assert!(p.iter().all(|v| (-0.05..=1.05).contains(v)));
        }
    }

    #[test]
    fn blocks_bumps_land_in_squares() {
        let c = gen_blocks(5).unwrap();
        for cloud in c.clouds() {
            for (j, center) in BLOCKS_BUMPS[cloud.label].iter().enumerate() {
                for p in &cloud.points[30 + 2 * j..32 + 2 * j] {
                    assert!((p[0] - center[0]).abs() <= 0.05 && (p[1] - center[1]).abs() <= 0.05);
                }
            }
        }
    }

    #[test]
    fn deepfield_ranges() {
        let (c, truth) = gen_deepfield(11).unwrap();
        assert_eq!(truth.components.len(), 50);
        for n in c.clouds_per_label() {
            assert!((20..=40).contains(&n));
        }
        assert!(c.clouds().iter().all(|x| (50..=500).contains(&x.len())));
        for comp in &truth.components {
            assert!(comp.variances.iter().all(|&v| v > 0.0 && v <= 0.5));
            assert!((50.0..=5000.0).contains(&comp.amplification));
            assert!(comp.mean.iter().all(|&v| (0.0..10.0).contains(&v)));
            let cov = comp.covariance();
            let trace = cov[0] + cov[3];
            let det = cov[0] * cov[3] - cov[1] * cov[2];
            let [a, b] = comp.variances;
            assert!((trace - (a + b)).abs() < 1e-12 && (det - a * b).abs() < 1e-12);
        }
    }

    #[test]
    fn deepfield_mixture_occupancy() {
        let (_, truth) = gen_deepfield(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for label in 0..2 {
            let members = truth.components_of(label);
            let probs = truth.mixture_weights(label);
            let n = 100_000;
            let mut counts = vec![0usize; members.len()];
            for _ in 0..n {
                let (c, _) = truth.sample(label, &mut rng).unwrap();
                counts[members.iter().position(|&m| m == c).unwrap()] += 1;
            }
            let chi2: f64 = counts
                .iter()
                .zip(&probs)
                .map(|(&o, &p)| {
                    let e = p * n as f64;
                    (o as f64 - e).powi(2) / e
                })
                .sum();
            let dof = (members.len() - 1).max(1) as f64;
            let p_value = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
            assert!(p_value > 0.01, "label {label}: chi2 {chi2}, p {p_value}");
        }
    }

    #[test]
    fn three_labels_shape() {
        let c = gen_threelabels(1).unwrap();
        assert_eq!(c.n_labels(), 3);
        assert_eq!(c.dim(), 2);
        assert!(c.clouds().iter().all(|x| x.len() == 90));
        let totals = c.assign_weights(WeightMode::Overwrite).unwrap().pool().unwrap().label_totals();
        assert!(totals.iter().all(|t| (t - 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn three_label_components() {
        assert_eq!(S3, 2.0 * 3f64.sqrt());
        let origin = [0.0, 0.0];
        for a in 0..3 {
            assert!(THREE_MEANS[a].contains(&origin));
            for b in 0..3 {
                if a != b {
                    let shared = THREE_MEANS[a].iter().filter(|m| THREE_MEANS[b].contains(m)).count();
                    assert_eq!(shared, 2);
                }
            }
        }
    }

    #[test]
    fn blobs_constants() {
        assert_eq!(BLOBS_BUMPS[0], [[4.0, 0.0], [5.0, 0.0], [-3.0, 0.0], [-6.0, 0.0]]);
        assert_eq!(BLOBS_BUMPS[1], [[-4.0, 0.0], [-5.0, 0.0], [3.0, 0.0], [6.0, 0.0]]);
        assert_eq!(BLOBS_BUMP_SIGMA, 0.2);
    }

    #[test]
    fn overrides_apply() {
        let spec = GeneratorSpec {
            experiment: Experiment::ThreeLabels,
            seed: 1,
            overrides: Overrides {
                clouds_per_label: Some(4),
                points_per_cloud: Some(12),
            },
        };
        let (c, _) = spec.generate().unwrap();
        assert_eq!(c.clouds().len(), 12);
        assert!(c.clouds().iter().all(|x| x.len() == 12));
    }

    #[test]
    fn experiment_names_parse() {
        assert_eq!("deep-field".parse::<Experiment>().unwrap(), Experiment::DeepField);
        assert_eq!("three_labels".parse::<Experiment>().unwrap(), Experiment::ThreeLabels);
        assert!("nope".parse::<Experiment>().is_err());
    }
}
