//! Detection-quality metrics: AUROC, a two-sample ECE memorization check and
//! validation-based threshold selection.

use serde::{Deserialize, Serialize};

use crate::error::{DoseError, Result};
use crate::scores::ScoreVector;
use crate::stats::quantile_sorted;
use crate::table::ceil_count;

pub const DEFAULT_ECE_BINS: usize = 10;

fn check_pair(a: &ScoreVector, b: &ScoreVector) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(DoseError::EmptyScores);
    }
    if a.method() != b.method() || a.orientation() != b.orientation() {
        return Err(DoseError::OrientationMismatch(format!(
            "{}/{:?} vs {}/{:?}",
            a.method(),
            a.orientation(),
            b.method(),
            b.orientation()
        )));
    }
    Ok(())
}

/// `P(in > out) + ½ P(in = out)` on raw slices where higher means in-distribution.
pub fn auroc_raw(in_scores: &[f64], out_scores: &[f64]) -> Result<f64> {
    if in_scores.is_empty() || out_scores.is_empty() {
        return Err(DoseError::EmptyScores);
    }
    // (value, is_in)
    let mut all: Vec<(f64, bool)> = in_scores
        .iter()
        .map(|&s| (s, true))
        .chain(out_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Twice the Mann–Whitney U, kept integral so ties are exact.
    let mut twice_u: u128 = 0;
    let mut out_below: u128 = 0;
    let mut k = 0;
    while k < all.len() {
        let v = all[k].0;
        let (mut n_in, mut n_out) = (0u128, 0u128);
        while k < all.len() && all[k].0 == v {
            if all[k].1 {
                n_in += 1;
            } else {
                n_out += 1;
            }
            k += 1;
        }
        twice_u += 2 * n_in * out_below + n_in * n_out;
        out_below += n_out;
    }
    let pairs = in_scores.len() as f64 * out_scores.len() as f64;
    Ok(twice_u as f64 / 2.0 / pairs)
}

pub fn auroc(in_scores: &ScoreVector, out_scores: &ScoreVector) -> Result<f64> {
    check_pair(in_scores, out_scores)?;
    auroc_raw(&in_scores.higher_is_in(), &out_scores.higher_is_in())
}

/// Two-sample bin-mass discrepancy between training and validation scores.
///
/// Bin edges are the `b/n_bins` quantiles of the training scores, so each bin
/// holds `1/n_bins` of the training mass; the result is
/// `Σ_b |observed_val_mass_b − 1/n_bins|`, which lies in `[0, 2(1 − 1/n_bins)]`.
pub fn ece_memorization(train_scores: &ScoreVector, val_scores: &ScoreVector, n_bins: usize) -> Result<f64> {
    check_pair(train_scores, val_scores)?;
    ece_raw(&train_scores.higher_is_in(), &val_scores.higher_is_in(), n_bins)
}

pub fn ece_raw(train: &[f64], val: &[f64], n_bins: usize) -> Result<f64> {
    if n_bins < 2 {
        return Err(DoseError::BadBinCount(n_bins));
    }
    if train.is_empty() || val.is_empty() {
        return Err(DoseError::EmptyScores);
    }
    let mut sorted = train.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..n_bins)
        .map(|b| quantile_sorted(&sorted, b as f64 / n_bins as f64))
        .collect();
    let mut counts = vec![0usize; n_bins];
    for &v in val {
        // values equal to an edge fall in the lower bin
        counts[edges.partition_point(|&e| e < v)] += 1;
    }
    let expected = 1.0 / n_bins as f64;
    let m = val.len() as f64;
    Ok(counts.iter().map(|&c| (c as f64 / m - expected).abs()).sum())
}

/// Threshold such that `⌈discard_fraction·m⌉` validation scores lie at or below it.
///
/// Scores are oriented higher-is-in first; a sample is flagged OOD iff its
/// oriented score is `≤ threshold`. `k = 0` yields `−∞`.
pub fn choose_threshold(val_scores: &ScoreVector, discard_fraction: f64) -> Result<f64> {
    threshold_raw(&val_scores.higher_is_in(), discard_fraction)
}

pub fn threshold_raw(val: &[f64], discard_fraction: f64) -> Result<f64> {
    if val.is_empty() {
        return Err(DoseError::EmptyScores);
    }
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(DoseError::BadParams(format!(
            "discard fraction {discard_fraction} not in [0, 1)"
        )));
    }
    let k = ceil_count(discard_fraction, val.len());
    if k == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let mut sorted = val.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[k - 1])
}

/// Fraction of scores flagged OOD (oriented score `≤ threshold`).
pub fn flagged_fraction(scores: &ScoreVector, threshold: f64) -> f64 {
    let s = scores.higher_is_in();
    if s.is_empty() {
        return 0.0;
    }
    s.iter().filter(|&&v| v <= threshold).count() as f64 / s.len() as f64
}

/// Evaluation of one method on one (in, out) pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub auroc: f64,
    pub ece: Option<f64>,
    /// In oriented (higher-is-in) units; `None` encodes `−∞`.
    pub threshold: Option<f64>,
    pub flagged_fraction_val: Option<f64>,
    pub flagged_fraction_in: Option<f64>,
    pub flagged_fraction_out: Option<f64>,
    pub n_in: usize,
    pub n_out: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::{Method, Orientation};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sv(method: Method, v: &[f64]) -> ScoreVector {
        ScoreVector::new(method, (0..v.len()).map(|i| format!("x{i}")).collect(), v.to_vec()).unwrap()
    }

    fn brute(a: &[f64], b: &[f64]) -> f64 {
        let mut w = 0.0;
        for x in a {
            for y in b {
                if x > y {
                    w += 1.0;
                } else if x == y {
                    w += 0.5;
                }
            }
        }
        w / (a.len() * b.len()) as f64
    }

    #[test]
    fn auroc_examples() {
        let m = Method::DoseKde;
        assert_eq!(auroc(&sv(m, &[2.0, 3.0]), &sv(m, &[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(auroc(&sv(m, &[1.0]), &sv(m, &[1.0])).unwrap(), 0.5);
        assert_eq!(auroc(&sv(m, &[0.0, 2.0]), &sv(m, &[1.0, 3.0])).unwrap(), 0.25);
    }

    #[test]
    fn auroc_errors_and_orientation() {
        let m = Method::DoseKde;
        assert!(matches!(
            auroc(&sv(m, &[]), &sv(m, &[1.0])),
            Err(DoseError::EmptyScores)
        ));
        assert!(matches!(
            auroc(&sv(m, &[1.0]), &sv(Method::Tt, &[1.0])),
            Err(DoseError::OrientationMismatch(_))
        ));
        // TT is lower-is-in: small scores are in-distribution
        let a = auroc(&sv(Method::Tt, &[0.1, 0.2]), &sv(Method::Tt, &[3.0, 4.0])).unwrap();
        assert_eq!(a, 1.0);
        let i = sv(m, &[0.3, 1.0, 2.0]);
        let o = sv(m, &[0.5, 1.0]);
        assert_eq!(auroc(&i, &o).unwrap(), auroc(&i.flipped(), &o.flipped()).unwrap());
        assert_eq!(i.flipped().orientation(), Orientation::LowerIsIn);
    }

    proptest! {
        #[test]
        fn auroc_matches_brute_force(
            a in prop::collection::vec(-5i32..5, 1..50),
            b in prop::collection::vec(-5i32..5, 1..50),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = auroc_raw(&a, &b).unwrap();
            prop_assert_eq!(r, brute(&a, &b));
            prop_assert!((auroc_raw(&b, &a).unwrap() - (1.0 - r)).abs() < 1e-12);
            // strictly increasing transform
            let ta: Vec<f64> = a.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            let tb: Vec<f64> = b.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(auroc_raw(&ta, &tb).unwrap(), r);
        }

        #[test]
        fn ece_self_is_zero(k in 1usize..20, bins in 2usize..8, seed in 0u64..1000) {
            let n = k * bins;
            let x: Vec<f64> = (0..n).map(|i| ((i as u64 * 2654435761 + seed) % 100_003) as f64 + i as f64 * 1e-6).collect();
            prop_assert!(ece_raw(&x, &x, bins).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn ece_extremes() {
        let train: Vec<f64> = (0..100).map(f64::from).collect();
        let val = vec![-5.0; 30];
        assert_abs_diff_eq!(ece_raw(&train, &val, 10).unwrap(), 2.0 * (1.0 - 0.1), epsilon = 1e-12);
        assert!(matches!(ece_raw(&train, &val, 1), Err(DoseError::BadBinCount(1))));
        assert!(matches!(ece_raw(&[], &val, 4), Err(DoseError::EmptyScores)));
    }

    #[test]
    fn thresholds() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        let s = sv(Method::DoseKde, &v);
        let t = choose_threshold(&s, 0.2).unwrap();
        assert_eq!(t, 2.0);
        assert_abs_diff_eq!(flagged_fraction(&s, t), 0.2);
        assert_eq!(choose_threshold(&s, 0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(flagged_fraction(&s, f64::NEG_INFINITY), 0.0);
        let ties = sv(Method::DoseKde, &[4.0; 10]);
        let t = choose_threshold(&ties, 0.2).unwrap();
        assert_eq!(flagged_fraction(&ties, t), 1.0);
        assert!(choose_threshold(&s, 1.0).is_err());
    }
}
