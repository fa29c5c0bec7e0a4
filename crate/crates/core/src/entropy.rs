//! Weighted label entropy, normalized to `[0, 1]` by taking logarithms in
//! base `L`.

use crate::error::{CderError, Result};

/// `S = -sum (w/W) log_L (w/W)`, with `0 log 0 = 0`.
///
/// A single label carries no uncertainty, so `L = 1` always yields 0. When
/// no label holds more than `1/L` of the weight the shares are all equal
/// and the result is exactly 1, whatever the rounding in the sum.
pub fn entropy(label_weights: &[f64]) -> Result<f64> {
    if label_weights.iter().any(|w| w.is_nan()) {
        return Err(CderError::NanEntropy);
    }
    let total: f64 = label_weights.iter().sum();
    if !(total > 0.0) {
        return Err(CderError::EmptyRegion);
    }
    let n_labels = label_weights.len();
    if n_labels < 2 {
        return Ok(0.0);
    }
    if dominant_labels(label_weights).is_empty() {
        return Ok(1.0);
    }
    let log_base = (n_labels as f64).ln();
    let s: f64 = label_weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum::<f64>()
        / log_base;
    Ok(s.clamp(0.0, 1.0))
}

/// Labels holding strictly more than `1/L` of the total weight.
pub fn dominant_labels(label_weights: &[f64]) -> Vec<usize> {
    let total: f64 = label_weights.iter().sum();
    if label_weights.len() == 1 {
        return if total > 0.0 { vec![0] } else { vec![] };
    }
    let threshold = total / label_weights.len() as f64;
    label_weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Entropy lost when every label outside `dominant` is erased, clamped to
/// `[0, 1]`.
pub fn entropy_loss(label_weights: &[f64], dominant: &[usize]) -> Result<f64> {
    let full = entropy(label_weights)?;
    let mut kept = vec![0.0; label_weights.len()];
    for &l in dominant {
        kept[l] = label_weights[l];
    }
    let restricted = entropy(&kept)?;
    Ok((full - restricted).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_pair_is_one() {
        assert_eq!(entropy(&[0.3, 0.3]).unwrap(), 1.0);
    }

    #[test]
    fn rounded_uniform_is_one() {
        let w = 1.0 / 3.0 + 1.4e-14;
        assert_eq!(entropy(&[w, w, w]).unwrap(), 1.0);
        assert!(dominant_labels(&[w, w, w]).is_empty());
    }

    #[test]
    fn one_hot_is_zero() {
        assert_eq!(entropy(&[0.7, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn three_label_worked_value() {
        // 0.5 log2 2 + 2 * 0.25 log2 4 = 1.5 bits, rescaled to base 3
        let expected = 1.5 / 3f64.log2();
        assert!((entropy(&[0.5, 0.25, 0.25]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.946394).abs() < 1e-6);
    }

    #[test]
    fn empty_region_errors() {
        assert!(matches!(entropy(&[0.0, 0.0]), Err(CderError::EmptyRegion)));
        assert!(matches!(entropy(&[f64::NAN, 1.0]), Err(CderError::NanEntropy)));
    }

    #[test]
    fn single_label_is_pure() {
        assert_eq!(entropy(&[2.5]).unwrap(), 0.0);
        assert_eq!(dominant_labels(&[2.5]), vec![0]);
    }

    #[test]
    fn dominance_is_strict() {
        assert_eq!(dominant_labels(&[0.5, 0.5]), Vec::<usize>::new());
        assert_eq!(dominant_labels(&[0.6, 0.4]), vec![0]);
        assert_eq!(dominant_labels(&[0.4, 0.4, 0.2]), vec![0, 1]);
    }

    #[test]
    fn two_label_loss_equals_entropy() {
        let w = [0.8, 0.2];
        let loss = entropy_loss(&w, &dominant_labels(&w)).unwrap();
        assert!((loss - entropy(&w).unwrap()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn bounded(ws in prop::collection::vec(0.0f64..10.0, 2..6)) {
            prop_assume!(ws.iter().sum::<f64>() > 1e-9);
            let s = entropy(&ws).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            // anything short of 1 has a dominant label
            prop_assert!(s == 1.0 || !dominant_labels(&ws).is_empty());
        }

        #[test]
        fn scale_invariant(ws in prop::collection::vec(0.01f64..10.0, 2..6), c in 1e-6f64..1e6) {
            let scaled: Vec<f64> = ws.iter().map(|w| w * c).collect();
            prop_assert!((entropy(&ws).unwrap() - entropy(&scaled).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn permutation_invariant(ws in prop::collection::vec(0.0f64..10.0, 2..6), rot in 0usize..6) {
            prop_assume!(ws.iter().sum::<f64>() > 1e-9);
            let mut rotated = ws.clone();
            let k = rot % ws.len();
            rotated.rotate_left(k);
            rotated.reverse();
            prop_assert!((entropy(&ws).unwrap() - entropy(&rotated).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn uniform_and_one_hot(n in 2usize..9, w in 1e-6f64..1e3, hot in 0usize..9) {
            prop_assert!((entropy(&vec![w; n]).unwrap() - 1.0).abs() < 1e-12);
            let mut one = vec![0.0; n];
            one[hot % n] = w;
            prop_assert!(entropy(&one).unwrap().abs() < 1e-12);
        }
    }
}
