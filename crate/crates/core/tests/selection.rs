mod common;

use std::collections::HashSet;

use cder::select::{decide, select_regions, SelectConfig, SelectionDecision};
use cder::{CoverTreeConfig, PooledPoints, RootPolicy};
use proptest::prelude::*;

fn config(parsimonious: bool) -> SelectConfig {
    SelectConfig {
        tree: CoverTreeConfig {
            root_policy: RootPolicy::FirstPoint,
            ..CoverTreeConfig::default()
        },
        parsimonious,
    }
}

fn entropy_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.5), Just(1.0), 0.0..=1.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decide_is_total(
        a in entropy_value(),
        b in entropy_value(),
        g in entropy_value(),
        na in 0usize..4,
        nb in 0usize..4,
    ) {
        let d = decide(a, b, g, na, nb).unwrap();
        if na <= 1 || nb <= 1 {
            prop_assert_eq!(d, SelectionDecision::Pass);
        }
        if a.max(b).max(g) >= 1.0 && na > 1 && nb > 1 {
            prop_assert_eq!(d, SelectionDecision::AppendAllSuccessors);
        }
    }

    #[test]
    fn parsimonious_builds_each_adult_once(seed in any::<u64>(), n in 2usize..300, dim in 1usize..4) {
        let sel = select_regions(common::random_pooled(seed, n, dim, 2), &config(true)).unwrap();
        let mut seen = HashSet::new();
        for e in &sel.events {
            prop_assert!(seen.insert(e.point), "adult at point {} built twice", e.point);
            prop_assert!(!e.dominant_labels.is_empty());
        }
    }

    #[test]
    fn non_parsimonious_is_a_superset(seed in any::<u64>(), n in 2usize..300, dim in 1usize..3) {
        let pooled = common::random_pooled(seed, n, dim, 2);
        let lean = select_regions(pooled.clone(), &config(true)).unwrap();
        let full = select_regions(pooled, &config(false)).unwrap();
        let events: HashSet<(usize, usize)> = full.events.iter().map(|e| (e.point, e.level)).collect();
        for e in &lean.events {
            prop_assert!(events.contains(&(e.point, e.level)));
        }
        prop_assert!(full.stop_level >= lean.stop_level);
        for (l, f) in lean.trace.iter().zip(&full.trace) {
            prop_assert!(f.candidates >= l.candidates, "level {}", l.level);
        }
    }
}

#[test]
fn nan_entropy_is_an_error() {
    assert!(decide(f64::NAN, 0.1, 0.2, 3, 7).is_err());
}

#[test]
fn single_label_builds_once() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 8) as f64, (i / 8) as f64 * 1.5]).collect();
    let pooled = PooledPoints::from_rows(&rows, vec![1.0 / 40.0; 40], vec![0; 40], 1).unwrap();
    let sel = select_regions(pooled, &config(true)).unwrap();
    assert_eq!(sel.events.len(), 1);
    assert_eq!(sel.events[0].dominant_labels, vec![0]);
    assert_eq!(sel.events[0].delta_entropy, 0.0);
}

#[test]
fn events_run_coarse_to_fine() {
    let sel = select_regions(common::random_pooled(5, 400, 2, 3), &config(true)).unwrap();
    assert!(sel.events.windows(2).all(|w| w[0].level <= w[1].level));
    let builds: usize = sel.trace.iter().map(|t| t.new_builds).sum();
    assert_eq!(builds, sel.events.len());
}
