use crate::{Error, Result};

/// Probabilities entering the cross-entropy are clamped to
/// `[PROBABILITY_CLAMP, 1 - PROBABILITY_CLAMP]`.
pub const PROBABILITY_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct BceOutput {
    pub loss: f64,
    /// `∂loss/∂p` for every probability.
    pub grad: Vec<f64>,
}

/// Mean binary cross-entropy `-[y ln p + (1 - y) ln(1 - p)]`.
///
/// The gradient is evaluated at the clamped probability, so saturated
/// predictions still receive a corrective signal.
pub fn bce_loss(probabilities: &[f64], targets: &[f64]) -> Result<BceOutput> {
    if probabilities.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities for {} targets",
            probabilities.len(),
            targets.len()
        )));
    }
    if probabilities.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    let n = probabilities.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probabilities.len());
    for (&p, &y) in probabilities.iter().zip(targets) {
        if !p.is_finite() {
            return Err(Error::NonFinite("bce input"));
        }
        let p = p.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        grad.push((p - y) / (p * (1.0 - p)) / n);
    }
    Ok(BceOutput {
        loss: loss / n,
        grad,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginOutput {
    pub loss: f64,
    pub grad_pos: Vec<f64>,
    pub grad_neg: Vec<f64>,
}

/// Mean hinge `max(0, margin - pos_i + neg_i)` over paired scores.
pub fn margin_loss(pos: &[f64], neg: &[f64], margin: f64) -> Result<MarginOutput> {
    if pos.len() != neg.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} positive scores paired with {} negative scores",
            pos.len(),
            neg.len()
        )));
    }
    if pos.is_empty() {
        return Err(Error::Empty("margin loss batch"));
    }
    let n = pos.len() as f64;
    let mut loss = 0.0;
    let mut grad_pos = vec![0.0; pos.len()];
    let mut grad_neg = vec![0.0; neg.len()];
    for i in 0..pos.len() {
        let hinge = margin - pos[i] + neg[i];
        if hinge > 0.0 {
            loss += hinge;
            grad_pos[i] = -1.0 / n;
            grad_neg[i] = 1.0 / n;
        }
    }
    Ok(MarginOutput {
        loss: loss / n,
        grad_pos,
        grad_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_at_half_is_ln2() {
        let out = bce_loss(&[0.5; 4], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_perfect_prediction_is_clamped_near_zero() {
        let out = bce_loss(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert!(out.loss < 1e-6 && out.loss > 0.0);
        assert!(out.loss.is_finite());
    }

    #[test]
    fn bce_errors() {
        assert!(bce_loss(&[0.5], &[0.0, 1.0]).is_err());
        assert!(bce_loss(&[], &[]).is_err());
        assert!(bce_loss(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn margin_examples() {
        assert_eq!(
            margin_loss(&[0.3, -1.0], &[0.3, -1.0], 1.0).unwrap().loss,
            1.0
        );
        assert_eq!(
            margin_loss(&[2.0, 1.5], &[0.5, 0.0], 1.0).unwrap().loss,
            0.0
        );
        let out = margin_loss(&[0.5], &[0.2], 1.0).unwrap();
        assert!((out.loss - 0.7).abs() < 1e-12);
        assert_eq!((out.grad_pos[0], out.grad_neg[0]), (-1.0, 1.0));
        assert!(margin_loss(&[0.5], &[], 1.0).is_err());
    }
}
