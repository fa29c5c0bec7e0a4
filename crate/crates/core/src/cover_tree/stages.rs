//! The individual construction stages that take level `l` to level `l + 1`.
//!
//! [`CoverTree::advance`](super::CoverTree::advance) runs them in order; they
//! are public so that each stage can be checked against an exhaustive scan.

use super::{friend_radii, Adult, CoverTreeLevel, FriendKind};
use crate::data::{euclidean, PooledPoints};

/// Level `l + 1` while it is being assembled.
#[derive(Debug, Clone)]
pub struct LevelDraft {
    pub level: usize,
    pub radius: f64,
    pub adults: Vec<Adult>,
    pub children: Vec<Vec<usize>>,
    pub guardian: Vec<usize>,
    /// For every adult of level `l`, its successors at `l + 1` so far.
    pub successors: Vec<Vec<usize>>,
}

/// Outcome of [`adopt_or_emancipate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Adopted(usize),
    Emancipated(usize),
}

impl LevelDraft {
    /// Shrinks the radius; every adult of `prev` stays an adult, keeps its
    /// index and children, and becomes its own predecessor.
    pub fn advance(prev: &CoverTreeLevel, theta: f64) -> Self {
        let n = prev.n_adults();
        Self {
            level: prev.level + 1,
            radius: prev.radius * theta,
            adults: prev
                .adults
                .iter()
                .enumerate()
                .map(|(i, a)| Adult {
                    point: a.point,
                    cohort: a.cohort,
                    predecessor: i,
                })
                .collect(),
            children: prev.children.clone(),
            guardian: prev.guardian.clone(),
            successors: (0..n).map(|i| vec![i]).collect(),
        }
    }

    fn adult_point(&self, adult: usize) -> usize {
        self.adults[adult].point
    }
}

/// Removes from `adult`'s children those farther than the new radius and
/// returns them in emancipation order (see [`round_robin_order`]).
pub fn find_and_sort_orphans(
    pooled: &PooledPoints,
    prev: &CoverTreeLevel,
    draft: &mut LevelDraft,
    adult: usize,
) -> Vec<usize> {
    let center = pooled.point(draft.adult_point(adult));
    let radius = draft.radius;
    let mut orphans = Vec::new();
    draft.children[adult].retain(|&x| {
        let keep = euclidean(center, pooled.point(x)) <= radius;
        if !keep {
            orphans.push(x);
        }
        keep
    });
    if orphans.len() < 2 {
        return orphans;
    }
    let queues: Vec<(usize, &[f64])> = prev
        .label_order(adult)
        .into_iter()
        .filter_map(|l| prev.label_mean(adult, l).map(|m| (l, m)))
        .collect();
    round_robin_order(pooled, &orphans, &queues)
}

/// Orders `orphans` by cycling through `label_means` (heaviest label first):
/// each turn takes the unused orphan nearest to that label's mean. Distance
/// ties go to the lower point index.
pub fn round_robin_order(
    pooled: &PooledPoints,
    orphans: &[usize],
    label_means: &[(usize, &[f64])],
) -> Vec<usize> {
    if label_means.is_empty() {
        return orphans.to_vec();
    }
    let queues: Vec<Vec<usize>> = label_means
        .iter()
        .map(|(_, mean)| {
            let mut keyed: Vec<(f64, usize)> = orphans
                .iter()
                .map(|&x| (euclidean(pooled.point(x), mean), x))
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            keyed.into_iter().map(|(_, x)| x).collect()
        })
        .collect();

    let mut used = std::collections::HashSet::with_capacity(orphans.len());
    let mut cursors = vec![0usize; queues.len()];
    let mut out = Vec::with_capacity(orphans.len());
    let mut turn = 0;
    while out.len() < orphans.len() {
        let q = turn % queues.len();
        let queue = &queues[q];
        while cursors[q] < queue.len() && used.contains(&queue[cursors[q]]) {
            cursors[q] += 1;
        }
        if let Some(&x) = queue.get(cursors[q]) {
            used.insert(x);
            out.push(x);
            cursors[q] += 1;
        }
        turn += 1;
    }
    out
}

/// Places orphan `x` of level-`l` adult `from`: adopted by the nearest
/// adult within the new radius among the type-1 friends of `from` and their
/// successors so far, otherwise emancipated as a new adult.
pub fn adopt_or_emancipate(
    pooled: &PooledPoints,
    prev: &CoverTreeLevel,
    draft: &mut LevelDraft,
    x: usize,
    from: usize,
) -> Placement {
    let p = pooled.point(x);
    let mut best: Option<(f64, usize)> = None;
    for &j in prev.friends(FriendKind::Type1, from) {
        for &s in &draft.successors[j] {
            let d = euclidean(p, pooled.point(draft.adult_point(s)));
            if d <= draft.radius && best.is_none_or(|(bd, bs)| d < bd || (d == bd && s < bs)) {
                best = Some((d, s));
            }
        }
    }
    match best {
        Some((_, s)) => {
            draft.children[s].push(x);
            draft.guardian[x] = s;
            Placement::Adopted(s)
        }
        None => {
            let k = draft.adults.len();
            draft.adults.push(Adult {
                point: x,
                cohort: draft.level,
                predecessor: from,
            });
            draft.children.push(vec![x]);
            draft.guardian[x] = k;
            draft.successors[from].push(k);
            Placement::Emancipated(k)
        }
    }
}

/// Moves every teen to its nearest adult. Only successors of type-2 friends
/// of the guardian's predecessor can be nearer; youngins never move. Ties
/// keep the incumbent, otherwise go to the lower adult index.
///
/// Returns true when every child coincides with its guardian.
pub fn exchange_teens(pooled: &PooledPoints, prev: &CoverTreeLevel, draft: &mut LevelDraft) -> bool {
    let half = 0.5 * draft.radius;
    let mut next: Vec<Vec<usize>> = vec![Vec::new(); draft.adults.len()];
    let mut complete = true;
    for k in 0..draft.adults.len() {
        let center = pooled.point(draft.adult_point(k));
        let pred = draft.adults[k].predecessor;
        for &x in &draft.children[k] {
            let p = pooled.point(x);
            let d0 = euclidean(center, p);
            if d0 > 0.0 {
                complete = false;
            }
            let mut best = (d0, k);
            if d0 > half {
                for &j in prev.friends(FriendKind::Type2, pred) {
                    for &s in &draft.successors[j] {
                        if s == k {
                            continue;
                        }
                        let d = euclidean(p, pooled.point(draft.adults[s].point));
                        if d < best.0 || (d == best.0 && best.1 != k && s < best.1) {
                            best = (d, s);
                        }
                    }
                }
            }
            next[best.1].push(x);
            draft.guardian[x] = best.1;
        }
    }
    for list in &mut next {
        list.sort_unstable();
    }
    draft.children = next;
    complete
}

/// Friend lists at level `l + 1`, self-inclusive and sorted. Candidates are
/// the successors of the type-3 friends of each adult's predecessor.
pub fn befriend(
    pooled: &PooledPoints,
    prev: &CoverTreeLevel,
    draft: &LevelDraft,
    theta: f64,
) -> [Vec<Vec<usize>>; 3] {
    let (t1, t2, t3) = friend_radii(theta, draft.radius).expect("theta validated at construction");
    let m = draft.adults.len();
    let mut friends: [Vec<Vec<usize>>; 3] = [vec![Vec::new(); m], vec![Vec::new(); m], vec![Vec::new(); m]];
    for k in 0..m {
        let center = pooled.point(draft.adult_point(k));
        let pred = draft.adults[k].predecessor;
        for &j in prev.friends(FriendKind::Type3, pred) {
            for &s in &draft.successors[j] {
                let d = euclidean(center, pooled.point(draft.adult_point(s)));
                if d <= t3 {
                    friends[2][k].push(s);
                    if d <= t2 {
                        friends[1][k].push(s);
                        if d <= t1 {
                            friends[0][k].push(s);
                        }
                    }
                }
            }
        }
        for list in friends.iter_mut() {
            list[k].sort_unstable();
        }
    }
    friends
}

/// Elders of every adult at level `l + 1`: the level-`l` adults within
/// `r_l + r_{l+1}`. Pre-existing adults are their own only elder. With a
/// special ratio the matching friend list already has that radius and only
/// needs filtering by cohort; otherwise the type-1 friends of the
/// predecessor are scanned.
pub fn compute_elders(
    pooled: &PooledPoints,
    prev: &CoverTreeLevel,
    draft: &LevelDraft,
    friends: &[Vec<Vec<usize>>; 3],
    shortcut: Option<FriendKind>,
) -> Vec<Vec<usize>> {
    let n_prev = prev.n_adults();
    let reach = prev.radius + draft.radius;
    (0..draft.adults.len())
        .map(|k| {
            if k < n_prev {
                return vec![k];
            }
            match shortcut {
                Some(kind) => friends[kind as usize][k]
                    .iter()
                    .copied()
                    .filter(|&j| j < n_prev)
                    .collect(),
                None => {
                    let center = pooled.point(draft.adult_point(k));
                    let pred = draft.adults[k].predecessor;
                    let mut elders: Vec<usize> = prev
                        .friends(FriendKind::Type1, pred)
                        .iter()
                        .copied()
                        .filter(|&j| euclidean(center, pooled.point(prev.adults[j].point)) <= reach)
                        .collect();
                    elders.sort_unstable();
                    elders
                }
            }
        })
        .collect()
}

/// Per-label weights and weighted means of each adult's children, returned
/// flat as `(adults x L, adults x L x D)`. Means of absent labels are zero.
pub fn weigh(pooled: &PooledPoints, children: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
    let n_labels = pooled.n_labels();
    let dim = pooled.dim();
    let mut weights = vec![0.0; children.len() * n_labels];
    let mut means = vec![0.0; children.len() * n_labels * dim];
    for (a, kids) in children.iter().enumerate() {
        let w_row = &mut weights[a * n_labels..(a + 1) * n_labels];
        let m_row = &mut means[a * n_labels * dim..(a + 1) * n_labels * dim];
        for &x in kids {
            let l = pooled.label(x);
            let w = pooled.weight(x);
            w_row[l] += w;
            for (m, v) in m_row[l * dim..(l + 1) * dim].iter_mut().zip(pooled.point(x)) {
                *m += w * v;
            }
        }
        for l in 0..n_labels {
            if w_row[l] > 0.0 {
                m_row[l * dim..(l + 1) * dim].iter_mut().for_each(|m| *m /= w_row[l]);
            }
        }
    }
    (weights, means)
}
