use crate::dom::CONTENT;
use crate::linalg::softplus;
use crate::{Error, Result};

/// Class-weighted binary cross entropy averaged over unmasked positions:
///
/// `-(1/N) Σ w_y [y ln p + (1 - y) ln(1 - p)]`
///
/// `weights` is `(w0, w1)`. All slices are flat and must have equal length.
pub fn weighted_bce(probs: &[f64], labels: &[u8], mask: &[u8], weights: (f64, f64)) -> Result<f64> {
    if labels.len() != probs.len() || mask.len() != probs.len() {
        return Err(Error::LengthMismatch {
            expected: probs.len(),
            got: if labels.len() != probs.len() {
                labels.len()
            } else {
                mask.len()
            },
        });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((&p, &y), &m) in probs.iter().zip(labels).zip(mask) {
        if m == 0 {
            continue;
        }
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(Error::NonFinite(format!("probability {p}")));
        }
        n += 1;
        sum += if y == CONTENT {
            weights.1 * p.ln()
        } else {
            weights.0 * (-p).ln_1p()
        };
    }
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    Ok(-sum / n as f64)
}

/// The same per-position loss computed from the logit `z`, which stays
/// finite when `sigmoid(z)` rounds to 0 or 1.
pub(crate) fn weighted_bce_logit(z: f64, y: u8, weights: (f64, f64)) -> f64 {
    if y == CONTENT {
        weights.1 * softplus(-z)
    } else {
        weights.0 * softplus(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sigmoid;

    #[test]
    fn analytic_value() {
        let l = weighted_bce(&[0.5], &[1], &[1], (1.0, 1.0)).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn unit_weights_are_plain_bce() {
        let probs = [0.1, 0.7, 0.35, 0.99];
        let labels = [0, 1, 1, 0];
        let plain: f64 = probs
            .iter()
            .zip(&labels)
            .map(|(&p, &y)| if y == 1 { -f64::ln(p) } else { -f64::ln(1.0 - p) })
            .sum::<f64>()
            / 4.0;
        let l = weighted_bce(&probs, &labels, &[1; 4], (1.0, 1.0)).unwrap();
        assert!((l - plain).abs() < 1e-14);
    }

    #[test]
    fn masked_positions_are_ignored() {
        let base = weighted_bce(&[0.3, 0.6, 0.5], &[1, 0, 1], &[1, 1, 0], (0.7, 2.0)).unwrap();
        let perturbed = weighted_bce(&[0.3, 0.6, 0.0001], &[1, 0, 0], &[1, 1, 0], (0.7, 2.0)).unwrap();
        assert_eq!(base, perturbed);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            weighted_bce(&[0.5], &[1], &[0], (1.0, 1.0)),
            Err(Error::EmptySequence)
        ));
        assert!(matches!(
            weighted_bce(&[f64::NAN], &[1], &[1], (1.0, 1.0)),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            weighted_bce(&[0.5], &[1, 0], &[1], (1.0, 1.0)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn logit_form_agrees() {
        for z in [-4.0, -0.3, 0.0, 1.7, 6.0] {
            for y in [0, 1] {
                let w = (0.6, 1.9);
                let from_p = weighted_bce(&[sigmoid(z)], &[y], &[1], w).unwrap();
                assert!((from_p - weighted_bce_logit(z, y, w)).abs() < 1e-12);
            }
        }
        assert!(weighted_bce_logit(800.0, 0, (1.0, 1.0)).is_finite());
    }
}
