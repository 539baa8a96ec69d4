//! Cross-entropy losses over one positive and its (possibly soft-labelled) negatives.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sampler::self_adv_weights;
use crate::scalar::Scalar;

/// Logistic sigmoid, stable for large |s|.
pub fn sigmoid<F: Scalar>(s: F) -> F {
    if s >= F::zero() {
        F::one() / (F::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (F::one() + e)
    }
}

/// `−[y·log σ(s) + (1 − y)·log(1 − σ(s))]` in the form
/// `max(s, 0) − y·s + log(1 + e^{−|s|})`.
pub fn bce<F: Scalar>(score: F, label: F) -> F {
    score.max(F::zero()) - label * score + (-score.abs()).exp().ln_1p()
}

/// `∂ bce / ∂ score = σ(s) − y`.
pub fn bce_grad<F: Scalar>(score: F, label: F) -> F {
    sigmoid(score) - label
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Plain sum over negatives.
    Uniform,
    /// Negatives weighted by softmax(α_t · score), weights held constant.
    SelfAdversarial,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Uniform => "uniform",
            LossKind::SelfAdversarial => "self_adversarial",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(LossKind::Uniform),
            "self_adversarial" | "self-adversarial" => Ok(LossKind::SelfAdversarial),
            _ => Err(Error::config(format!("unknown loss {s:?}"))),
        }
    }
}

/// Loss value and its derivative with respect to every score.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerms<F> {
    pub value: F,
    pub positive_grad: F,
    pub negative_grads: Vec<F>,
}

/// `ℓ(pos, 1) + Σ ℓ(f_k, ŷ_k)`.
pub fn loss_uniform<F: Scalar>(pos_score: F, negatives: &[(F, F)]) -> F {
    negatives
        .iter()
        .fold(bce(pos_score, F::one()), |acc, &(s, y)| acc + bce(s, y))
}

/// `ℓ(pos, 1) + Σ p_k ℓ(f_k, ŷ_k)` with `p = softmax(α_t · f)`.
pub fn loss_self_adv<F: Scalar>(pos_score: F, negatives: &[(F, F)], temperature: F) -> F {
    let scores: Vec<F> = negatives.iter().map(|&(s, _)| s).collect();
    let weights = self_adv_weights(&scores, temperature);
    negatives
        .iter()
        .zip(&weights)
        .fold(bce(pos_score, F::one()), |acc, (&(s, y), &p)| acc + p * bce(s, y))
}

/// Loss plus score derivatives; self-adversarial weights are not differentiated.
pub fn loss_terms<F: Scalar>(kind: LossKind, pos_score: F, neg_scores: &[F], labels: &[F], temperature: F) -> LossTerms<F> {
    debug_assert_eq!(neg_scores.len(), labels.len());
    let weights = match kind {
        LossKind::Uniform => vec![F::one(); neg_scores.len()],
        LossKind::SelfAdversarial => self_adv_weights(neg_scores, temperature),
    };
    let mut value = bce(pos_score, F::one());
    let mut negative_grads = Vec::with_capacity(neg_scores.len());
    for ((&s, &y), &w) in neg_scores.iter().zip(labels).zip(&weights) {
        value += w * bce(s, y);
        negative_grads.push(w * bce_grad(s, y));
    }
    LossTerms {
        value,
        positive_grad: bce_grad(pos_score, F::one()),
        negative_grads,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn bce_reference_values() {
        assert!((bce(0.0f64, 1.0) - LN_2).abs() < 1e-15);
        assert!((bce(0.0f64, 0.5) - LN_2).abs() < 1e-15);
        for s in [-1000.0f64, -50.0, 0.0, 50.0, 1000.0] {
            for y in [0.0, 0.3, 1.0] {
                let l = bce(s, y);
                assert!(l.is_finite() && l >= 0.0, "bce({s}, {y}) = {l}");
            }
        }
        assert!((bce(1000.0f64, 0.0) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn bce_grad_matches_finite_difference() {
        let (s, y, h) = (1.0f64, 0.3, 1e-4);
        let fd = (bce(s + h, y) - bce(s - h, y)) / (2.0 * h);
        let analytic = bce_grad(s, y);
        assert!((fd - analytic).abs() / analytic.abs() < 1e-6);
    }

    #[test]
    fn uniform_loss_examples() {
        assert!((loss_uniform(0.0f64, &[(0.0, 0.0)]) - 2.0 * LN_2).abs() < 1e-15);
        assert_eq!(loss_uniform(0.7f64, &[]), bce(0.7, 1.0));
        let negs = [(0.2f64, 0.0), (-1.0, 0.25), (2.0, 0.5)];
        let by_hand = bce(0.5, 1.0) + bce(0.2, 0.0) + bce(-1.0, 0.25) + bce(2.0, 0.5);
        assert!((loss_uniform(0.5, &negs) - by_hand).abs() < 1e-15);
    }

    #[test]
    fn self_adv_loss_examples() {
        let negs = [(1.5f64, 0.0), (1.5, 0.3)];
        let expected = bce(0.2, 1.0) + 0.5 * bce(1.5, 0.0) + 0.5 * bce(1.5, 0.3);
        assert!((loss_self_adv(0.2, &negs, 2.0) - expected).abs() < 1e-15);

        let single = [(0.8f64, 0.2)];
        assert!((loss_self_adv(0.1, &single, 3.0) - loss_uniform(0.1, &single)).abs() < 1e-15);

        // α_t → 0: weights → 1/n
        let negs = [(0.1f64, 0.0), (2.0, 0.4), (-3.0, 0.0)];
        let limit = bce(0.0, 1.0) + negs.iter().map(|&(s, y)| bce(s, y)).sum::<f64>() / 3.0;
        assert!((loss_self_adv(0.0, &negs, 1e-8) - limit).abs() < 1e-7);
    }

    #[test]
    fn loss_terms_agree_with_loss_functions() {
        let scores = [0.3f64, -0.4, 1.1];
        let labels = [0.0, 0.2, 0.0];
        let pairs: Vec<_> = scores.iter().copied().zip(labels).collect();
        let u = loss_terms(LossKind::Uniform, 0.9, &scores, &labels, 1.0);
        assert!((u.value - loss_uniform(0.9, &pairs)).abs() < 1e-15);
        let a = loss_terms(LossKind::SelfAdversarial, 0.9, &scores, &labels, 1.0);
        assert!((a.value - loss_self_adv(0.9, &pairs, 1.0)).abs() < 1e-15);
        assert!((u.positive_grad - (sigmoid(0.9) - 1.0)).abs() < 1e-15);
    }
}
