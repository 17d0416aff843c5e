use crate::corpus::Label;

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic loss of raw score `raw` with BAD as the positive class.
pub fn logistic_loss(raw: f64, label: Label) -> f64 {
    match label {
        Label::Bad => softplus(-raw),
        Label::Good => softplus(raw),
    }
}

pub fn mean_logistic_loss(raw: &[f64], labels: &[Label]) -> f64 {
    let total: f64 = raw
        .iter()
        .zip(labels)
        .map(|(&r, &l)| logistic_loss(r, l))
        .sum();
    total / raw.len().max(1) as f64
}

/// First and second derivative of the logistic loss with respect to the raw
/// score, given `prob = logistic(raw)`.
pub fn grad_hess(prob: f64, label: Label) -> (f64, f64) {
    (prob - label.target(), prob * (1.0 - prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn analytic_values() {
        assert_eq!(grad_hess(0.5, Label::Bad), (-0.5, 0.25));
        assert_eq!(grad_hess(0.5, Label::Good), (0.5, 0.25));
    }

    #[test]
    fn matches_finite_differences() {
        // Cross-entropy written per label with ln_1p.
        fn loss(raw: f64, y: f64) -> f64 {
            if y == 1.0 {
                (-raw).exp().ln_1p()
            } else {
                raw.exp().ln_1p()
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (h1, h2) = (1e-5, 1e-3);
        for _ in 0..1000 {
            let raw: f64 = rng.random_range(-6.0..6.0);
            let label = if rng.random::<bool>() { Label::Bad } else { Label::Good };
            let y = label.target();
            let (g, hs) = grad_hess(logistic(raw), label);
            let fd_g = (loss(raw + h1, y) - loss(raw - h1, y)) / (2.0 * h1);
            let fd_h = (loss(raw + h2, y) - 2.0 * loss(raw, y) + loss(raw - h2, y)) / (h2 * h2);
            assert!((g - fd_g).abs() < 1e-6, "raw {raw}: {g} vs {fd_g}");
            assert!((hs - fd_h).abs() < 1e-6, "raw {raw}: {hs} vs {fd_h}");
        }
    }

    #[test]
    fn stable_extremes() {
        assert_eq!(logistic(-800.0), 0.0);
        assert_eq!(logistic(800.0), 1.0);
        assert!(logistic_loss(800.0, Label::Good).is_finite());
        assert!((logistic_loss(0.0, Label::Bad) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
