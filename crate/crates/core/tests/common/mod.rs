//! Brute-force checks shared by the integration tests and the acceptance
//! suite.

#![allow(dead_code)]

use cder::cover_tree::{friend_radii, FriendKind};
use cder::data::euclidean;
use cder::select::gather_regions;
use cder::{CoverTree, PooledPoints};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform points in `[0, scale)^dim` with two labels and random positive
/// weights normalized to 1.
pub fn random_pooled(seed: u64, n: usize, dim: usize, n_labels: usize) -> PooledPoints {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clustered = rng.random_bool(0.5);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let v: f64 = rng.random_range(0.0..10.0);
                    // snap half the datasets to a coarse grid so duplicates
                    // and exact ties occur
                    if clustered {
                        v.round()
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_labels)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    PooledPoints::from_rows(&rows, weights, labels, n_labels).unwrap()
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Every invariant of every level, checked by exhaustive scans. Returns
/// one message per violation.
pub fn tree_violations(tree: &CoverTree) -> Vec<String> {
    let mut out = Vec::new();
    let pooled = tree.pooled();
    let n = pooled.len();
    let theta = tree.config().theta;
    let dist = |a: usize, b: usize| euclidean(pooled.point(a), pooled.point(b));

    if tree.level(0).n_adults() != 1 {
        out.push("level 0 must have exactly one adult".into());
    }
    let root = tree.level(0).adults()[0].point;
    if (0..n).any(|x| dist(root, x) > tree.r0()) {
        out.push("a point lies outside r0".into());
    }

    for (l, level) in tree.levels().iter().enumerate() {
        let r = level.radius();
        let adults = level.adults();
        let m = adults.len();
        if l > 0 && r != tree.level(l - 1).radius() * theta {
            out.push(format!("level {l}: radius is not theta times the previous one"));
        }

        // separation
        for i in 0..m {
            for j in i + 1..m {
                if dist(adults[i].point, adults[j].point) <= r {
                    out.push(format!("level {l}: adults {i} and {j} within r"));
                }
            }
        }

        // partition and covering
        let mut seen = vec![0usize; n];
        for a in 0..m {
            for &x in level.children(a) {
                seen[x] += 1;
                if level.guardian(x) != a {
                    out.push(format!("level {l}: child {x} of {a} has guardian {}", level.guardian(x)));
                }
                if dist(adults[a].point, x) > r {
                    out.push(format!("level {l}: point {x} farther than r from its guardian"));
                }
            }
            if !level.children(a).contains(&adults[a].point) {
                out.push(format!("level {l}: adult {a} does not guard itself"));
            }
        }
        if seen.iter().any(|&c| c != 1) {
            out.push(format!("level {l}: guardianship is not a partition"));
        }

        // no child has a strictly nearer adult
        for x in 0..n {
            let g = dist(adults[level.guardian(x)].point, x);
            if adults.iter().any(|a| dist(a.point, x) < g) {
                out.push(format!("level {l}: point {x} has a strictly nearer adult"));
            }
        }

        // friends
        let (t1, t2, t3) = friend_radii(theta, r).unwrap();
        for (kind, t) in FriendKind::ALL.into_iter().zip([t1, t2, t3]) {
            for a in 0..m {
                let brute: Vec<usize> = (0..m).filter(|&b| dist(adults[a].point, adults[b].point) <= t).collect();
                if sorted(level.friends(kind, a).to_vec()) != brute {
                    out.push(format!("level {l}: {kind:?} friends of {a} differ from brute force"));
                }
            }
        }

        // weights partition
        let total: f64 = (0..m).flat_map(|a| level.label_weights(a).iter().copied()).sum();
        if (total - pooled.total_weight()).abs() > 1e-9 {
            out.push(format!("level {l}: label weights sum to {total}"));
        }

        if l == 0 {
            continue;
        }
        let prev = tree.level(l - 1);
        let pm = prev.n_adults();

        // nesting and predecessors
        for (i, a) in prev.adults().iter().enumerate() {
            if adults.get(i).map(|b| (b.point, b.cohort)) != Some((a.point, a.cohort)) {
                out.push(format!("level {l}: adult {i} of level {} not kept", l - 1));
            }
        }
        for (k, a) in adults.iter().enumerate() {
            if a.cohort > l || (k >= pm) != (a.cohort == l) {
                out.push(format!("level {l}: adult {k} has cohort {}", a.cohort));
            }
            if k >= pm && prev.guardian(a.point) != a.predecessor {
                out.push(format!("level {l}: new adult {k} was not a child of its predecessor"));
            }
            if !prev.successors(a.predecessor).contains(&k) {
                out.push(format!("level {l}: adult {k} missing from its predecessor's successors"));
            }
        }

        // elders
        let reach = prev.radius() + r;
        for (k, a) in adults.iter().enumerate() {
            let expected: Vec<usize> = if k < pm {
                vec![k]
            } else {
                (0..pm).filter(|&j| dist(a.point, prev.adults()[j].point) <= reach).collect()
            };
            if sorted(level.elders(k).to_vec()) != expected {
                out.push(format!("level {l}: elders of {k} differ from brute force"));
            }
        }

        // guardian changes stay within elder reach
        for x in 0..n {
            let before = prev.adults()[prev.guardian(x)].point;
            let g = level.guardian(x);
            if dist(before, adults[g].point) > reach {
                out.push(format!("level {l}: point {x} jumped beyond elder reach"));
            }
            if g >= pm && !level.elders(g).contains(&prev.guardian(x)) {
                out.push(format!("level {l}: point {x} came from a non-elder"));
            }
        }

        // nested regions at the previous level
        for a in 0..pm {
            let t = gather_regions(tree, a, l - 1);
            let beta = sorted(t.beta.clone());
            if !t.alpha.iter().all(|x| beta.binary_search(x).is_ok())
                || !beta.iter().all(|x| t.gamma.binary_search(x).is_ok())
            {
                out.push(format!("level {}: regions of adult {a} are not nested", l - 1));
            }
        }
    }
    out
}
