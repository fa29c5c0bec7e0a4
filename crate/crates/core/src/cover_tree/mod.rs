//! Level-by-level cover tree over a weighted, labeled point set.
//!
//! Every level `l` has radius `r_l = r_0 * theta^l`, a set of adults that are
//! pairwise farther apart than `r_l`, and a guardian for every point within
//! `r_l`. Construction of level `l + 1` only ever looks at small candidate
//! lists derived from the friend lists of level `l`:
//!
//! * an orphan of `a_i` can only be adopted by a type-1 friend of `a_i` or a
//!   new successor of one,
//! * a teen can only move to a successor of a type-2 friend of its
//!   guardian's predecessor,
//! * two adults can only be type-3 friends if their predecessors were.
//!
//! The friend thresholds are `T1 = (2 + theta) r`, `T2 = (2 + 2 theta) r` and
//! `T3 = 2 r / (1 - theta)`.

mod stages;

pub use stages::{
    adopt_or_emancipate, befriend, compute_elders, exchange_teens, find_and_sort_orphans, weigh,
    LevelDraft, Placement,
};

use serde::{Deserialize, Serialize};

use crate::data::PooledPoints;
use crate::error::{CderError, Result};

/// Relative inflation applied to `r_0` so that the farthest point stays
/// covered under rounding.
pub const ROOT_RADIUS_GUARD: f64 = 1e-12;

/// Construction stops once the radius drops below this fraction of `r_0`.
pub const MIN_RELATIVE_RADIUS: f64 = 1e-12;

pub const THETA_SILVER: f64 = std::f64::consts::SQRT_2 - 1.0;
pub const THETA_HALF: f64 = 0.5;
pub const THETA_GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootPolicy {
    FirstPoint,
    #[default]
    NearestToCentroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FriendKind {
    Type1 = 0,
    Type2 = 1,
    Type3 = 2,
}

impl FriendKind {
    pub const ALL: [FriendKind; 3] = [FriendKind::Type1, FriendKind::Type2, FriendKind::Type3];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverTreeConfig {
    pub theta: f64,
    pub root_policy: RootPolicy,
    pub max_level: Option<usize>,
}

impl Default for CoverTreeConfig {
    fn default() -> Self {
        Self {
            theta: THETA_HALF,
            root_policy: RootPolicy::NearestToCentroid,
            max_level: None,
        }
    }
}

impl CoverTreeConfig {
    pub fn with_theta(theta: f64) -> Self {
        Self {
            theta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(CderError::InvalidTheta(self.theta));
        }
        Ok(())
    }

    /// For the three special ratios, half of `T2(l)` coincides with one of
    /// the friend thresholds at `l + 1`, so elders fall out of that friend
    /// list for free.
    pub fn elder_shortcut(&self) -> Option<FriendKind> {
        const TOL: f64 = 1e-12;
        if (self.theta - THETA_GOLDEN).abs() < TOL {
            Some(FriendKind::Type1)
        } else if (self.theta - THETA_HALF).abs() < TOL {
            Some(FriendKind::Type2)
        } else if (self.theta - THETA_SILVER).abs() < TOL {
            Some(FriendKind::Type3)
        } else {
            None
        }
    }
}

/// Friend thresholds `(T1, T2, T3)` at a level of radius `r_level`.
pub fn friend_radii(theta: f64, r_level: f64) -> Result<(f64, f64, f64)> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(CderError::InvalidTheta(theta));
    }
    Ok((
        (2.0 + theta) * r_level,
        (2.0 + 2.0 * theta) * r_level,
        2.0 * r_level / (1.0 - theta),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adult {
    /// Index into the pooled points.
    pub point: usize,
    /// Level at which the point was emancipated.
    pub cohort: usize,
    /// Adult index at the previous level (itself for pre-existing adults).
    pub predecessor: usize,
}

/// One level of the filtration.
///
/// Adults keep their index from one level to the next; new cohorts are
/// appended, grouped by predecessor and ordered by label-mean proximity
/// within each group.
#[derive(Debug, Clone)]
pub struct CoverTreeLevel {
    level: usize,
    radius: f64,
    adults: Vec<Adult>,
    guardian: Vec<usize>,
    children: Vec<Vec<usize>>,
    friends: [Vec<Vec<usize>>; 3],
    elders: Vec<Vec<usize>>,
    successors: Vec<Vec<usize>>,
    n_labels: usize,
    dim: usize,
    label_weights: Vec<f64>,
    label_means: Vec<f64>,
    complete: bool,
}

impl CoverTreeLevel {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn adults(&self) -> &[Adult] {
        &self.adults
    }

    pub fn n_adults(&self) -> usize {
        self.adults.len()
    }

    /// Adult index guarding point `x`.
    pub fn guardian(&self, x: usize) -> usize {
        self.guardian[x]
    }

    pub fn guardians(&self) -> &[usize] {
        &self.guardian
    }

    /// Point indices guarded by `adult`, sorted ascending.
    pub fn children(&self, adult: usize) -> &[usize] {
        &self.children[adult]
    }

    pub fn friends(&self, kind: FriendKind, adult: usize) -> &[usize] {
        &self.friends[kind as usize][adult]
    }

    /// Adults of the previous level within `r_{l-1} + r_l`; a pre-existing
    /// adult is its own sole elder.
    pub fn elders(&self, adult: usize) -> &[usize] {
        &self.elders[adult]
    }

    /// Adults of the next level whose predecessor is `adult`. Empty until
    /// the next level is built.
    pub fn successors(&self, adult: usize) -> &[usize] {
        self.successors.get(adult).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_successors(&self) -> bool {
        !self.successors.is_empty()
    }

    pub fn label_weights(&self, adult: usize) -> &[f64] {
        &self.label_weights[adult * self.n_labels..(adult + 1) * self.n_labels]
    }

    /// Weighted mean of the children of `adult` carrying `label`, or `None`
    /// when that label has no weight there.
    pub fn label_mean(&self, adult: usize, label: usize) -> Option<&[f64]> {
        if self.label_weights(adult)[label] > 0.0 {
            let start = (adult * self.n_labels + label) * self.dim;
            Some(&self.label_means[start..start + self.dim])
        } else {
            None
        }
    }

    /// Labels sorted by weight, heaviest first; ties go to the lower label.
    pub fn label_order(&self, adult: usize) -> Vec<usize> {
        let w = self.label_weights(adult);
        let mut order: Vec<usize> = (0..self.n_labels).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        order
    }

    /// True when every child coincides with its guardian, so no later level
    /// can change the structure.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Number of adults that existed at the previous level.
    pub fn n_previous(&self) -> usize {
        self.adults.iter().take_while(|a| a.cohort < self.level).count()
    }
}

/// The filtration `A_0 ⊂ A_1 ⊂ ...` together with the pooled points.
#[derive(Debug, Clone)]
pub struct CoverTree {
    config: CoverTreeConfig,
    pooled: PooledPoints,
    r0: f64,
    degenerate: bool,
    levels: Vec<CoverTreeLevel>,
}

impl CoverTree {
    /// Level 0: a single root guarding every point.
    pub fn new(pooled: PooledPoints, config: CoverTreeConfig) -> Result<Self> {
        config.validate()?;
        if pooled.is_empty() {
            return Err(CderError::EmptyPointSet);
        }
        let root = choose_root(&pooled, config.root_policy);
        let n = pooled.len();
        let max_dist = (0..n)
            .map(|x| pooled.distance(root, x))
            .fold(0.0f64, f64::max);
        let (r0, degenerate) = if max_dist > 0.0 {
            (max_dist * (1.0 + ROOT_RADIUS_GUARD), false)
        } else {
            (1.0, true)
        };

        let adults = vec![Adult {
            point: root,
            cohort: 0,
            predecessor: 0,
        }];
        let children = vec![(0..n).collect::<Vec<_>>()];
        let (label_weights, label_means) = weigh(&pooled, &children);
        let level = CoverTreeLevel {
            level: 0,
            radius: r0,
            adults,
            guardian: vec![0; n],
            children,
            friends: [vec![vec![0]], vec![vec![0]], vec![vec![0]]],
            elders: vec![vec![0]],
            successors: Vec::new(),
            n_labels: pooled.n_labels(),
            dim: pooled.dim(),
            label_weights,
            label_means,
            complete: degenerate,
        };
        Ok(Self {
            config,
            pooled,
            r0,
            degenerate,
            levels: vec![level],
        })
    }

    /// Builds every level until the tree is complete, the radius underflows
    /// or the configured cap is reached.
    pub fn build(pooled: PooledPoints, config: CoverTreeConfig) -> Result<Self> {
        let mut tree = Self::new(pooled, config)?;
        while tree.should_continue() {
            tree.advance();
        }
        Ok(tree)
    }

    /// Whether a full build would add another level.
    pub fn should_continue(&self) -> bool {
        let last = self.last();
        !last.complete
            && last.radius * self.config.theta >= MIN_RELATIVE_RADIUS * self.r0
            && self.can_advance()
    }

    /// Whether `max_level` still allows another level.
    pub fn can_advance(&self) -> bool {
        self.config.max_level.is_none_or(|cap| self.depth() < cap)
    }

    /// Builds the next level: advance, orphan, adopt or emancipate, exchange
    /// teens, befriend, weigh. Returns false when `max_level` forbids it.
    pub fn advance(&mut self) -> bool {
        if !self.can_advance() {
            return false;
        }
        let theta = self.config.theta;
        let shortcut = self.config.elder_shortcut();
        let prev = self.levels.last().expect("level 0 always exists");
        let pooled = &self.pooled;

        let mut draft = LevelDraft::advance(prev, theta);
        let orphans: Vec<Vec<usize>> = (0..prev.n_adults())
            .map(|i| find_and_sort_orphans(pooled, prev, &mut draft, i))
            .collect();
        for (i, list) in orphans.into_iter().enumerate() {
            for x in list {
                adopt_or_emancipate(pooled, prev, &mut draft, x, i);
            }
        }
        let complete = exchange_teens(pooled, prev, &mut draft);
        let friends = befriend(pooled, prev, &draft, theta);
        let elders = compute_elders(pooled, prev, &draft, &friends, shortcut);
        let (label_weights, label_means) = weigh(pooled, &draft.children);

        let LevelDraft {
            level,
            radius,
            adults,
            children,
            guardian,
            successors,
        } = draft;
        let next = CoverTreeLevel {
            level,
            radius,
            adults,
            guardian,
            children,
            friends,
            elders,
            successors: Vec::new(),
            n_labels: pooled.n_labels(),
            dim: pooled.dim(),
            label_weights,
            label_means,
            complete,
        };
        self.levels.last_mut().unwrap().successors = successors;
        self.levels.push(next);
        true
    }

    pub fn config(&self) -> &CoverTreeConfig {
        &self.config
    }

    pub fn pooled(&self) -> &PooledPoints {
        &self.pooled
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Set when all points coincide and `r_0` had to be replaced by 1.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn levels(&self) -> &[CoverTreeLevel] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &CoverTreeLevel {
        &self.levels[l]
    }

    /// Index of the deepest level built so far.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn last(&self) -> &CoverTreeLevel {
        self.levels.last().unwrap()
    }

    pub fn is_complete(&self) -> bool {
        self.last().complete
    }

    /// Per-level summary for diagnostics.
    pub fn dump(&self) -> Vec<LevelSummary> {
        self.levels
            .iter()
            .map(|lvl| LevelSummary {
                level: lvl.level,
                radius: lvl.radius,
                adults: lvl.adults.iter().map(|a| a.point).collect(),
                cohorts: lvl.adults.iter().map(|a| a.cohort).collect(),
                label_weights: (0..lvl.n_adults())
                    .map(|i| lvl.label_weights(i).to_vec())
                    .collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub radius: f64,
    /// Point index of each adult, in adult order.
    pub adults: Vec<usize>,
    pub cohorts: Vec<usize>,
    pub label_weights: Vec<Vec<f64>>,
}

fn choose_root(pooled: &PooledPoints, policy: RootPolicy) -> usize {
    match policy {
        RootPolicy::FirstPoint => 0,
        RootPolicy::NearestToCentroid => {
            let dim = pooled.dim();
            let mut centroid = vec![0.0; dim];
            let mut total = 0.0;
            for x in 0..pooled.len() {
                let w = pooled.weight(x);
                total += w;
                for (c, v) in centroid.iter_mut().zip(pooled.point(x)) {
                    *c += w * v;
                }
            }
            centroid.iter_mut().for_each(|c| *c /= total);
            let mut best = (f64::INFINITY, 0);
            for x in 0..pooled.len() {
                let d = crate::data::euclidean(pooled.point(x), &centroid);
                if d < best.0 {
                    best = (d, x);
                }
            }
            best.1
        }
    }
}
