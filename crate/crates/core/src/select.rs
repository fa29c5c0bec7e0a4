//! Entropy-guided search over the partial cover tree.
//!
//! For a candidate adult `a_i` at level `l` three nested regions are
//! compared: `alpha` (its children at `l + 1`), `beta` (its children at `l`)
//! and `gamma` (the children at `l - 1` of its elders). A region whose
//! entropy keeps falling as the ball shrinks is turned into a build event;
//! otherwise the search is pushed down to the adult itself, its new
//! successors, or dropped.

use std::sync::Once;

use serde::{Deserialize, Serialize};

use crate::cover_tree::{CoverTree, CoverTreeConfig};
use crate::data::PooledPoints;
use crate::entropy::{dominant_labels, entropy, entropy_loss};
use crate::error::{CderError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionDecision {
    Build,
    Pass,
    AppendSelf,
    AppendSuccessorsExceptSelf,
    AppendAllSuccessors,
}

static SHADOWED_BRANCH: Once = Once::new();

/// The decision list, evaluated top to bottom; the first matching branch
/// wins.
///
/// The list repeats the ordering `gamma <= alpha <= beta` with a `Pass`
/// action after the `AppendSelf` branch, so that later branch can never
/// fire. The ordering `alpha <= gamma <= beta` is not listed at all and
/// falls through to `AppendAllSuccessors`.
pub fn decide(
    s_alpha: f64,
    s_beta: f64,
    s_gamma: f64,
    alpha_count: usize,
    beta_count: usize,
) -> Result<SelectionDecision> {
    use SelectionDecision::*;
    SHADOWED_BRANCH.call_once(|| {
        log::debug!("decision branch `gamma <= alpha <= beta < 1 => pass` is shadowed by the append-self branch");
    });
    if s_alpha.is_nan() || s_beta.is_nan() || s_gamma.is_nan() {
        return Err(CderError::NanEntropy);
    }
    let (a, b, g) = (s_alpha, s_beta, s_gamma);
    let decision = if alpha_count <= 1 || beta_count <= 1 {
        Pass
    } else if a <= b && b <= g && g < 1.0 {
        Build
    } else if g <= a && a <= b && b < 1.0 {
        AppendSelf
    } else if (b <= a && a <= g && g < 1.0) || (b <= g && g <= a && a < 1.0) {
        AppendSuccessorsExceptSelf
    } else if (g <= a && a <= b && b < 1.0) || (g <= b && b <= a && a < 1.0) {
        Pass
    } else {
        AppendAllSuccessors
    };
    Ok(decision)
}

/// Point sets of the three nested regions around one adult.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionTriple {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
}

/// Collects the alpha/beta/gamma point sets of `adult` at `level`. When
/// `level + 1` has not been built, alpha falls back to beta.
pub fn gather_regions(tree: &CoverTree, adult: usize, level: usize) -> RegionTriple {
    let cur = tree.level(level);
    let beta = cur.children(adult).to_vec();
    let alpha = if tree.depth() > level {
        tree.level(level + 1).children(adult).to_vec()
    } else {
        beta.clone()
    };
    let gamma = if level == 0 {
        beta.clone()
    } else {
        let prev = tree.level(level - 1);
        let mut g: Vec<usize> = if cur.adults()[adult].cohort < level {
            prev.children(adult).to_vec()
        } else {
            cur.elders(adult)
                .iter()
                .flat_map(|&e| prev.children(e).iter().copied())
                .collect()
        };
        g.sort_unstable();
        g
    };
    RegionTriple { alpha, beta, gamma }
}

/// Label weights and child count of one region.
#[derive(Debug, Clone, PartialEq)]
struct RegionStats {
    weights: Vec<f64>,
    count: usize,
}

impl RegionStats {
    fn of(tree: &CoverTree, level: usize, adult: usize) -> Self {
        let lvl = tree.level(level);
        Self {
            weights: lvl.label_weights(adult).to_vec(),
            count: lvl.children(adult).len(),
        }
    }

    fn union(tree: &CoverTree, level: usize, adults: &[usize]) -> Self {
        let lvl = tree.level(level);
        let mut weights = vec![0.0; tree.pooled().n_labels()];
        let mut count = 0;
        for &a in adults {
            for (w, v) in weights.iter_mut().zip(lvl.label_weights(a)) {
                *w += v;
            }
            count += lvl.children(a).len();
        }
        Self { weights, count }
    }
}

/// A region selected for Gaussian coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildEvent {
    /// Adult index at `level`.
    pub adult: usize,
    /// Pooled index of the adult's point.
    pub point: usize,
    pub level: usize,
    pub radius: f64,
    /// Labels holding more than `1/L` of the region's weight.
    pub dominant_labels: Vec<usize>,
    /// Per-label weight of the region (the adult's children at `level`).
    pub label_weights: Vec<f64>,
    /// Pooled indices of the adult's children at `level`.
    pub region: Vec<usize>,
    pub s_alpha: f64,
    pub s_beta: f64,
    pub s_gamma: f64,
    /// Entropy lost on the region when non-dominant labels are erased.
    pub delta_entropy: f64,
}

/// One row of the per-level selection table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: usize,
    pub adults: usize,
    pub candidates: usize,
    pub new_builds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub tree: CoverTreeConfig,
    /// When false every `Pass` becomes `AppendAllSuccessors`.
    pub parsimonious: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            tree: CoverTreeConfig::default(),
            parsimonious: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub events: Vec<BuildEvent>,
    /// The cover tree as far as the search needed it.
    pub tree: CoverTree,
    pub trace: Vec<LevelTrace>,
    /// Deepest cover-tree level the search built.
    pub stop_level: usize,
}

/// Grows the cover tree level by level while deciding, for every candidate
/// adult, whether to build, pass, or push the search deeper.
pub fn select_regions(pooled: PooledPoints, config: &SelectConfig) -> Result<Selection> {
    let mut tree = CoverTree::new(pooled, config.tree)?;
    let mut candidates: Vec<usize> = vec![0];
    let mut events = Vec::new();
    let mut trace = Vec::new();
    let mut level = 0;

    loop {
        if candidates.is_empty() {
            break;
        }
        if tree.depth() == level && tree.should_continue() {
            tree.advance();
        }
        let has_next = tree.depth() > level;
        let mut next: Vec<usize> = Vec::new();
        let mut new_builds = 0;

        for &adult in &candidates {
            let beta = RegionStats::of(&tree, level, adult);
            let alpha = if has_next {
                RegionStats::of(&tree, level + 1, adult)
            } else {
                beta.clone()
            };
            let gamma = gamma_stats(&tree, level, adult, &beta);
            let s_alpha = entropy(&alpha.weights)?;
            let s_beta = entropy(&beta.weights)?;
            let s_gamma = entropy(&gamma.weights)?;

            let mut decision = decide(s_alpha, s_beta, s_gamma, alpha.count, beta.count)?;
            if decision == SelectionDecision::Pass && !config.parsimonious {
                decision = SelectionDecision::AppendAllSuccessors;
            }

            let successors: &[usize] = if has_next {
                tree.level(level).successors(adult)
            } else {
                &[]
            };
            match decision {
                SelectionDecision::Build => {
                    let dominant = dominant_labels(&beta.weights);
                    if dominant.is_empty() {
                        continue;
                    }
                    let delta_entropy = entropy_loss(&beta.weights, &dominant)?;
                    let lvl = tree.level(level);
                    events.push(BuildEvent {
                        adult,
                        point: lvl.adults()[adult].point,
                        level,
                        radius: lvl.radius(),
                        dominant_labels: dominant,
                        label_weights: beta.weights.clone(),
                        region: lvl.children(adult).to_vec(),
                        s_alpha,
                        s_beta,
                        s_gamma,
                        delta_entropy,
                    });
                    new_builds += 1;
                }
                SelectionDecision::Pass => {}
                SelectionDecision::AppendSelf => next.push(adult),
                SelectionDecision::AppendSuccessorsExceptSelf => {
                    next.extend(successors.iter().copied().filter(|&s| s != adult))
                }
                SelectionDecision::AppendAllSuccessors => next.extend_from_slice(successors),
            }
        }

        trace.push(LevelTrace {
            level,
            adults: tree.level(level).n_adults(),
            candidates: candidates.len(),
            new_builds,
        });
        if !has_next {
            break;
        }
        next.sort_unstable();
        next.dedup();
        candidates = next;
        level += 1;
    }

    let stop_level = tree.depth();
    Ok(Selection {
        events,
        tree,
        trace,
        stop_level,
    })
}

fn gamma_stats(tree: &CoverTree, level: usize, adult: usize, beta: &RegionStats) -> RegionStats {
    if level == 0 {
        return beta.clone();
    }
    let cur = tree.level(level);
    if cur.adults()[adult].cohort < level {
        RegionStats::of(tree, level - 1, adult)
    } else {
        RegionStats::union(tree, level - 1, cur.elders(adult))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SelectionDecision::*;

    #[test]
    fn decide_examples() {
        assert_eq!(decide(0.2, 0.5, 0.9, 3, 7).unwrap(), Build);
        assert_eq!(decide(1.0, 1.0, 1.0, 3, 7).unwrap(), AppendAllSuccessors);
        assert_eq!(decide(0.5, 0.2, 0.9, 3, 7).unwrap(), AppendSuccessorsExceptSelf);
    }

    #[test]
    fn decide_branch_table() {
        assert_eq!(decide(0.2, 0.5, 0.9, 1, 7).unwrap(), Pass);
        assert_eq!(decide(0.2, 0.5, 0.9, 3, 1).unwrap(), Pass);
        assert_eq!(decide(0.5, 0.6, 0.1, 3, 7).unwrap(), AppendSelf);
        assert_eq!(decide(0.9, 0.2, 0.5, 3, 7).unwrap(), AppendSuccessorsExceptSelf);
        assert_eq!(decide(0.9, 0.5, 0.1, 3, 7).unwrap(), Pass);
        // alpha <= gamma <= beta is not in the list
        assert_eq!(decide(0.1, 0.9, 0.5, 3, 7).unwrap(), AppendAllSuccessors);
        // any entropy at 1 falls through
        assert_eq!(decide(0.2, 0.5, 1.0, 3, 7).unwrap(), AppendAllSuccessors);
    }

    #[test]
    fn decide_ties_take_earliest_branch() {
        assert_eq!(decide(0.5, 0.5, 0.5, 3, 7).unwrap(), Build);
        assert_eq!(decide(0.3, 0.5, 0.3, 3, 7).unwrap(), AppendSelf);
    }

    #[test]
    fn decide_rejects_nan() {
        assert!(matches!(decide(f64::NAN, 0.1, 0.2, 3, 7), Err(CderError::NanEntropy)));
    }

    #[test]
    fn decide_is_total() {
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        for &a in &grid {
            for &b in &grid {
                for &g in &grid {
                    assert!(decide(a, b, g, 2, 2).is_ok());
                }
            }
        }
    }

    fn single_label_pooled() -> PooledPoints {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).sin() * 3.0, i as f64 * 0.1]).collect();
        PooledPoints::from_rows(&rows, vec![0.05; 20], vec![0; 20], 1).unwrap()
    }

    #[test]
    fn single_label_builds_once_at_root() {
        let sel = select_regions(single_label_pooled(), &SelectConfig::default()).unwrap();
        assert_eq!(sel.events.len(), 1);
        let ev = &sel.events[0];
        assert_eq!(ev.level, 0);
        assert_eq!(ev.dominant_labels, vec![0]);
        assert_eq!(ev.delta_entropy, 0.0);
        assert_eq!(ev.region.len(), 20);
        assert_eq!(sel.stop_level, 1);
    }

    #[test]
    fn root_regions() {
        let tree = CoverTree::build(single_label_pooled(), CoverTreeConfig::default()).unwrap();
        let r = gather_regions(&tree, 0, 0);
        assert_eq!(r.beta, (0..20).collect::<Vec<_>>());
        assert_eq!(r.gamma, r.beta);
        assert_eq!(r.alpha, tree.level(1).children(0));
    }
}
