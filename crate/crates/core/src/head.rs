//! Coarse-to-fine ordinal head.
//!
//! The similarity vector is `[style sims | reason sims]` in frozen order:
//! taxonomy periods first, then the reason bank's subcategories flattened in
//! bank order. A small regressor turns that vector into period probabilities;
//! the year estimate is the probability-weighted sum of period midpoints, each
//! midpoint divided by `1 + delta_i` with `delta` learnable in [-0.4, 0.4].

use crate::error::Error;
use crate::nn::{Activation, Mlp};
use crate::record::ReasonBank;
use crate::scalar::{dot, norm, Scalar};
use crate::Result;
use rand::Rng;

/// Learnable bound for the per-period year offsets.
pub const DELTA_CLAMP: f64 = 0.4;

/// Cosine similarity. Both vectors must be nonzero and the same length.
pub fn cosine_sim<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            context: "cosine_sim".into(),
            left: a.len(),
            right: b.len(),
        });
    }
    let na = norm(a);
    let nb = norm(b);
    if na == T::zero() || nb == T::zero() {
        return Err(Error::ZeroVector {
            context: "cosine_sim".into(),
        });
    }
    Ok(dot(a, b) / (na * nb))
}

/// Build the similarity vector for a fused embedding against style and reason
/// anchors. Output length is `styles.len() + reasons.len()`.
pub fn similarity_vector<T: Scalar>(
    z: &[T],
    styles: &[Vec<T>],
    reasons: &[Vec<T>],
) -> Result<Vec<T>> {
    let mut s = Vec::with_capacity(styles.len() + reasons.len());
    for e in styles.iter().chain(reasons.iter()) {
        s.push(cosine_sim(z, e)?);
    }
    Ok(s)
}

/// Regression head: MLP from similarity vector to period logits, plus the
/// per-period year offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor<T> {
    pub mlp: Mlp<T>,
    pub delta: Vec<T>,
}

impl<T: Scalar> Regressor<T> {
    /// Default shape: one hidden layer of the given width, smooth activation,
    /// linear output. `delta` starts at zero.
    pub fn glorot(
        in_dim: usize,
        hidden: usize,
        n_periods: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Regressor {
            mlp: Mlp::glorot(
                &[in_dim, hidden, n_periods],
                Activation::Gelu,
                Activation::Identity,
                rng,
            )?,
            delta: vec![T::zero(); n_periods],
        })
    }

    pub fn n_periods(&self) -> usize {
        self.delta.len()
    }
}

/// Clamp the offset vector into its legal range.
pub fn clamp_delta<T: Scalar>(delta: &mut [T]) {
    let lim = T::from_f64_lossy(DELTA_CLAMP);
    for d in delta.iter_mut() {
        if *d > lim {
            *d = lim;
        } else if *d < -lim {
            *d = -lim;
        }
    }
}

/// Logits, probabilities, and log-probabilities of one head evaluation.
#[derive(Debug, Clone)]
pub struct HeadOutput<T> {
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    pub log_probs: Vec<T>,
}

/// Numerically stable softmax family over raw logits.
pub fn softmax_stable<T: Scalar>(logits: &[T]) -> Result<HeadOutput<T>> {
    if logits.is_empty() {
        return Err(Error::Empty {
            context: "softmax".into(),
        });
    }
    let mut max = logits[0];
    for l in logits.iter().skip(1) {
        if *l > max {
            max = *l;
        }
    }
    let shifted: Vec<T> = logits.iter().map(|l| *l - max).collect();
    let exps: Vec<T> = shifted.iter().map(|v| v.exp()).collect();
    let mut sum = T::zero();
    for e in &exps {
        sum += *e;
    }
    let log_sum = sum.ln();
    Ok(HeadOutput {
        logits: logits.to_vec(),
        probs: exps.iter().map(|e| *e / sum).collect(),
        log_probs: shifted.iter().map(|v| *v - log_sum).collect(),
    })
}

/// Run the regressor on a similarity vector.
pub fn regressor_forward<T: Scalar>(reg: &Regressor<T>, s: &[T]) -> Result<HeadOutput<T>> {
    let logits = reg.mlp.forward(s)?;
    softmax_stable(&logits)
}

/// Probability-weighted year readout: `sum_i p_i * b_i / (1 + delta_i)`.
pub fn predict_year<T: Scalar>(probs: &[T], midpoints: &[T], delta: &[T]) -> Result<T> {
    if probs.len() != midpoints.len() || probs.len() != delta.len() {
        return Err(Error::LengthMismatch {
            context: "predict_year".into(),
            left: probs.len(),
            right: midpoints.len().max(delta.len()),
        });
    }
    let mut y = T::zero();
    for i in 0..probs.len() {
        y += probs[i] * midpoints[i] / (T::one() + delta[i]);
    }
    Ok(y)
}

/// Argmax with ties resolved to the lowest index.
pub fn coarse_class<T: Scalar>(probs: &[T]) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::Empty {
            context: "coarse_class".into(),
        });
    }
    let mut best = 0;
    for (i, p) in probs.iter().enumerate().skip(1) {
        if *p > probs[best] {
            best = i;
        }
    }
    Ok(best)
}

/// One reason's attribution: its best subcategory and summed importance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasonImportance<T> {
    pub reason: String,
    pub subcategory: String,
    pub importance: T,
}

/// Attribute the winning period's logit to the reason similarities.
///
/// Importance of subcategory k of reason j is `s_jk * d logit_win / d s_jk`,
/// evaluated at the given similarity vector. Per reason, the reported
/// subcategory is the one with the highest importance (ties to the first in
/// bank order) and the reported score is the sum over its subcategories.
/// Reasons come back sorted by score, descending, capped at five; score ties
/// keep bank order.
pub fn reasoning_importance<T: Scalar>(
    reg: &Regressor<T>,
    s: &[T],
    bank: &ReasonBank,
) -> Result<Vec<ReasonImportance<T>>> {
    let n_sub = bank.total_subcategories();
    let offset = s.len().checked_sub(n_sub).ok_or(Error::ShapeMismatch {
        context: "reasoning_importance".into(),
        expected: format!("similarity vector with at least {n_sub} reason entries"),
        got: format!("{}", s.len()),
    })?;
    let out = regressor_forward(reg, s)?;
    let winner = coarse_class(&out.probs)?;
    let mut seed = vec![T::zero(); out.logits.len()];
    seed[winner] = T::one();
    let grad = reg.mlp.input_gradient(s, &seed)?;

    let mut ranked: Vec<(usize, ReasonImportance<T>)> = Vec::with_capacity(bank.reasons.len());
    let mut flat = offset;
    for (j, reason) in bank.reasons.iter().enumerate() {
        let mut total = T::zero();
        let mut best_k = 0;
        let mut best_imp = T::neg_infinity();
        for (k, sub) in reason.subcategories.iter().enumerate() {
            let imp = s[flat] * grad[flat];
            total += imp;
            if imp > best_imp {
                best_imp = imp;
                best_k = k;
            }
            flat += 1;
            let _ = sub;
        }
        ranked.push((
            j,
            ReasonImportance {
                reason: reason.name.clone(),
                subcategory: reason.subcategories[best_k].label.clone(),
                importance: total,
            },
        ));
    }
    // Stable sort: equal scores keep bank order.
    ranked.sort_by(|a, b| {
        b.1.importance
            .partial_cmp(&a.1.importance)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(ranked
        .into_iter()
        .take(5)
        .map(|(_, r)| r)
        .collect())
}
