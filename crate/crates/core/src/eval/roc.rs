use super::EvalError;
use crate::corpus::Label;

/// ROC curve with BAD as the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false_positive_rate, true_positive_rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Score cutoff of each point: a sounding is called BAD when its score is
    /// `>=` the cutoff. The first point uses `+inf`.
    pub thresholds: Vec<f64>,
    pub auroc: f64,
    pub positives: usize,
    pub negatives: usize,
}

impl RocCurve {
    /// Trapezoidal area under `points`.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

/// Builds the ROC curve from a descending-score sweep. Tied scores move the
/// curve in one diagonal step, so AUROC counts ties as half-correct.
pub fn roc(scores: &[(f64, Label)]) -> Result<RocCurve, EvalError> {
    if scores.iter().any(|(s, _)| s.is_nan()) {
        return Err(EvalError::NanScore);
    }
    let positives = scores.iter().filter(|(_, l)| l.is_bad()).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass {
            positives,
            negatives,
        });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one (positive, negative) pair.
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let cutoff = sorted[i].0;
        let (prev_tp, prev_fp) = (tp, fp);
        while i < sorted.len() && sorted[i].0 == cutoff {
            if sorted[i].1.is_bad() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - prev_fp) * u128::from(tp + prev_tp);
        points.push((fp as f64 / n, tp as f64 / p));
        thresholds.push(cutoff);
    }
    let auroc = area2 as f64 / (2.0 * p * n);
    Ok(RocCurve {
        points,
        thresholds,
        auroc,
        positives,
        negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Bad as B, Good as G};

    /// O(n^2) pair count with half credit for ties.
    fn pairwise(scores: &[(f64, Label)]) -> f64 {
        let (mut credit, mut pairs) = (0.0, 0.0);
        for &(sp, _) in scores.iter().filter(|(_, l)| l.is_bad()) {
            for &(sn, _) in scores.iter().filter(|(_, l)| !l.is_bad()) {
                pairs += 1.0;
                if sp > sn {
                    credit += 1.0;
                } else if sp == sn {
                    credit += 0.5;
                }
            }
        }
        credit / pairs
    }

    #[test]
    fn perfect_separation() {
        assert_eq!(roc(&[(0.9, B), (0.1, G)]).unwrap().auroc, 1.0);
    }

    #[test]
    fn all_tied() {
        let r = roc(&[(0.3, B), (0.3, G), (0.3, G), (0.3, B)]).unwrap();
        assert_eq!(r.auroc, 0.5);
        assert_eq!(r.points, [(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn three_of_four_pairs() {
        let s = [(0.8, B), (0.4, B), (0.6, G), (0.2, G)];
        assert_eq!(pairwise(&s), 0.75);
        let r = roc(&s).unwrap();
        assert_eq!(r.auroc, 0.75);
        assert_eq!(r.points.len(), 5);
        assert_eq!(r.thresholds[1], 0.8);
    }

    #[test]
    fn single_class_and_nan() {
        assert!(matches!(
            roc(&[(0.1, G), (0.2, G)]),
            Err(EvalError::SingleClass { positives: 0, .. })
        ));
        assert!(roc(&[]).is_err());
        assert!(matches!(roc(&[(f64::NAN, B), (0.0, G)]), Err(EvalError::NanScore)));
    }

    fn arb_scores() -> impl Strategy<Value = Vec<(f64, Label)>> {
        // Few distinct score levels so ties are common.
        prop::collection::vec(((0u8..12), any::<bool>()), 2..200).prop_map(|v| {
            v.into_iter()
                .map(|(s, b)| (f64::from(s) / 4.0, if b { B } else { G }))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn curve_invariants(scores in arb_scores()) {
            let Ok(r) = roc(&scores) else { return Ok(()); };
            prop_assert_eq!(r.points[0], (0.0, 0.0));
            prop_assert_eq!(*r.points.last().unwrap(), (1.0, 1.0));
            prop_assert!(r.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
            prop_assert!((r.auroc - r.trapezoid_area()).abs() <= 1e-12);
            prop_assert!((r.auroc - pairwise(&scores)).abs() <= 1e-12);
        }

        #[test]
        fn increasing_transform_invariance(scores in arb_scores()) {
            let Ok(r) = roc(&scores) else { return Ok(()); };
            let mapped: Vec<(f64, Label)> =
                scores.iter().map(|&(s, l)| ((3.0 * s).exp() - 7.0, l)).collect();
            let m = roc(&mapped).unwrap();
            prop_assert_eq!(&r.points, &m.points);
            prop_assert_eq!(r.auroc, m.auroc);
        }
    }
}
