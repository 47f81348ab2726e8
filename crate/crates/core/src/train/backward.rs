//! Batch forward with caches, hand-derived reverse-mode gradients for the
//! full composite loss, and a central-difference checker that audits them.
//!
//! Anchors (style and reason embeddings) are constants: gradients flow to
//! the adapter, the location network, the fusion projection, the regressor,
//! and the period offsets, and nowhere else. A fused embedding is the sum of
//! the two branch outputs, so both branches receive the same upstream
//! gradient.

use crate::error::Error;
use crate::geo::rff_encode;
use crate::head::{predict_year, similarity_vector, softmax_stable};
use crate::model::{Model, ModelParams};
use crate::nn::{LinearGrads, MlpCache, MlpGrads};
use crate::scalar::{norm, Scalar};
use crate::train::loss::{
    ce_term, fcrc_anchor_loss, kl_term, lambda_weights, reg_term, soft_target, LossBreakdown,
};
use crate::train::{SampleInput, TrainConfig};
use crate::Result;

/// Gradients mirroring [`ModelParams`] tensor for tensor.
#[derive(Debug, Clone)]
pub struct GradientSet<T> {
    pub adapter: MlpGrads<T>,
    pub loc_mlp: MlpGrads<T>,
    pub zero_conv: LinearGrads<T>,
    pub regressor: MlpGrads<T>,
    pub delta: Vec<T>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(params: &ModelParams<T>) -> Self {
        let d = params.zero_conv.dim();
        GradientSet {
            adapter: MlpGrads::zeros_like(&params.adapter),
            loc_mlp: MlpGrads::zeros_like(&params.loc_mlp),
            zero_conv: LinearGrads {
                weight: vec![T::zero(); d * d],
                bias: vec![T::zero(); d],
            },
            regressor: MlpGrads::zeros_like(&params.regressor.mlp),
            delta: vec![T::zero(); params.regressor.delta.len()],
        }
    }

    /// Same names and order as [`ModelParams::tensors`].
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::new();
        for (i, l) in self.adapter.layers.iter().enumerate() {
            out.push((format!("adapter.{i}.weight"), l.weight.as_slice()));
            out.push((format!("adapter.{i}.bias"), l.bias.as_slice()));
        }
        for (i, l) in self.loc_mlp.layers.iter().enumerate() {
            out.push((format!("loc.{i}.weight"), l.weight.as_slice()));
            out.push((format!("loc.{i}.bias"), l.bias.as_slice()));
        }
        out.push(("zero_conv.weight".into(), self.zero_conv.weight.as_slice()));
        out.push(("zero_conv.bias".into(), self.zero_conv.bias.as_slice()));
        for (i, l) in self.regressor.layers.iter().enumerate() {
            out.push((format!("regressor.{i}.weight"), l.weight.as_slice()));
            out.push((format!("regressor.{i}.bias"), l.bias.as_slice()));
        }
        out.push(("delta".into(), self.delta.as_slice()));
        out
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in self.tensors() {
            for (i, v) in t.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteGradient {
                        tensor: name.clone(),
                        index: i,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Location branch intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LocForward<T> {
    pub cache: MlpCache<T>,
    /// Location network output, before the fusion projection.
    pub h: Vec<T>,
}

/// Everything the backward pass needs for one sample.
#[derive(Debug, Clone)]
pub struct SampleForward<T> {
    pub adapter_cache: MlpCache<T>,
    pub loc: Option<LocForward<T>>,
    pub z: Vec<T>,
    pub sims: Vec<T>,
    pub head_cache: MlpCache<T>,
    pub probs: Vec<T>,
    pub log_probs: Vec<T>,
    pub year_hat: T,
    /// `cos(z_i, style_anchor_of(target_j))` over the batch.
    pub fcrc_cos: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BatchForward<T> {
    pub samples: Vec<SampleForward<T>>,
    pub lambda: Vec<Vec<T>>,
    pub loss: LossBreakdown<T>,
}

/// Forward pass over one batch, retaining every intermediate the gradient
/// computation reuses.
pub fn forward_batch<T: Scalar>(
    model: &Model<T>,
    batch: &[SampleInput<T>],
    cfg: &TrainConfig,
) -> Result<BatchForward<T>> {
    if batch.is_empty() {
        return Err(Error::Empty {
            context: "batch".into(),
        });
    }
    let m = batch.len();
    let n_periods = model.taxonomy.len();
    for s in batch {
        if s.target >= n_periods {
            return Err(Error::ShapeMismatch {
                context: format!("target of sample {}", s.id),
                expected: format!("< {n_periods}"),
                got: format!("{}", s.target),
            });
        }
    }
    let sigma = T::from_f64_lossy(cfg.sigma_kl);
    let tau = T::from_f64_lossy(cfg.tau);
    let beta = T::from_f64_lossy(cfg.beta);
    let years: Vec<T> = batch.iter().map(|s| s.year).collect();

    // Embeddings first: the contrastive rows need the whole batch.
    let mut partial: Vec<(MlpCache<T>, Option<LocForward<T>>, Vec<T>)> =
        Vec::with_capacity(m);
    for s in batch {
        let (z_v, adapter_cache) = model.params.adapter.forward_cached(&s.image)?;
        let (loc, z) = match s.gps {
            None => (None, z_v),
            Some((lat, lon)) => {
                let encoded = rff_encode(lat, lon, &model.rff)?;
                let (h, cache) = model.params.loc_mlp.forward_cached(&encoded)?;
                let z_l = model.params.zero_conv.forward(&h)?;
                let z = crate::geo::fuse(&z_v, Some(&z_l))?;
                (Some(LocForward { cache, h }), z)
            }
        };
        partial.push((adapter_cache, loc, z));
    }

    let mut samples = Vec::with_capacity(m);
    let mut lambda = Vec::with_capacity(m);
    let (mut ce, mut kl, mut reg, mut fcrc) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (i, ((adapter_cache, loc, z), s)) in partial.into_iter().zip(batch).enumerate() {
        let sims = similarity_vector(&z, &model.styles, &model.reasons)?;
        let (logits, head_cache) = model.params.regressor.mlp.forward_cached(&sims)?;
        let head = softmax_stable(&logits)?;
        let year_hat = predict_year(&head.probs, model.midpoints(), &model.params.regressor.delta)?;
        let fcrc_cos: Vec<T> = batch
            .iter()
            .map(|other| crate::head::cosine_sim(&z, &model.styles[other.target]))
            .collect::<Result<_>>()?;
        let lam = lambda_weights(&years, i, beta)?;
        ce += ce_term(&head.log_probs, s.target)?;
        kl += kl_term(&head.log_probs, model.midpoints(), s.year, sigma)?;
        reg += reg_term(year_hat, s.year);
        fcrc += fcrc_anchor_loss(&fcrc_cos, &lam, i, tau);
        lambda.push(lam);
        samples.push(SampleForward {
            adapter_cache,
            loc,
            z,
            sims,
            head_cache,
            probs: head.probs,
            log_probs: head.log_probs,
            year_hat,
            fcrc_cos,
        });
    }
    let mf = T::from_f64_lossy(m as f64);
    let (ce, kl, reg, fcrc) = (ce / mf, kl / mf, reg / mf, fcrc / mf);
    let total = T::from_f64_lossy(cfg.w_ce) * ce
        + T::from_f64_lossy(cfg.w_kl) * kl
        + T::from_f64_lossy(cfg.w_reg) * reg
        + T::from_f64_lossy(cfg.w_fcrc) * fcrc;
    Ok(BatchForward {
        samples,
        lambda,
        loss: LossBreakdown {
            ce,
            kl,
            reg,
            fcrc,
            total,
        },
    })
}

fn sign_of<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

// g_z += coeff * d cos(z, e) / dz, with d cos/dz = e/(|z||e|) - cos * z/|z|^2.
fn add_cosine_grad<T: Scalar>(g_z: &mut [T], coeff: T, z: &[T], nz: T, e: &[T], cos: T) {
    let ne = norm(e);
    let a = coeff / (nz * ne);
    let b = coeff * cos / (nz * nz);
    for ((g, ev), zv) in g_z.iter_mut().zip(e).zip(z) {
        *g += a * *ev - b * *zv;
    }
}

/// Exact gradients of the weighted batch loss with respect to every
/// trainable tensor.
pub fn backward<T: Scalar>(
    model: &Model<T>,
    batch: &[SampleInput<T>],
    fw: &BatchForward<T>,
    cfg: &TrainConfig,
) -> Result<GradientSet<T>> {
    let m = batch.len();
    if fw.samples.len() != m {
        return Err(Error::LengthMismatch {
            context: "forward cache vs batch".into(),
            left: fw.samples.len(),
            right: m,
        });
    }
    let mf = T::from_f64_lossy(m as f64);
    let w_ce = T::from_f64_lossy(cfg.w_ce) / mf;
    let w_kl = T::from_f64_lossy(cfg.w_kl) / mf;
    let w_reg = T::from_f64_lossy(cfg.w_reg) / mf;
    let w_fcrc = T::from_f64_lossy(cfg.w_fcrc) / mf;
    let sigma = T::from_f64_lossy(cfg.sigma_kl);
    let tau = T::from_f64_lossy(cfg.tau);
    let hundred = T::from_f64_lossy(100.0);
    let midpoints = model.midpoints();
    let delta = &model.params.regressor.delta;
    let n = midpoints.len();
    let mut g = GradientSet::zeros_like(&model.params);

    for (i, s) in batch.iter().enumerate() {
        let sf = &fw.samples[i];
        let q = soft_target(midpoints, s.year, sigma);

        // Year estimate pieces: v_k = b_k / (1 + delta_k).
        let v: Vec<T> = midpoints
            .iter()
            .zip(delta)
            .map(|(b, d)| *b / (T::one() + *d))
            .collect();
        let c_reg = w_reg * sign_of(sf.year_hat - s.year) / hundred;

        let mut g_logits = vec![T::zero(); n];
        for k in 0..n {
            let onehot = if k == s.target { T::one() } else { T::zero() };
            g_logits[k] = w_ce * (sf.probs[k] - onehot)
                + w_kl * (sf.probs[k] - q[k])
                + c_reg * sf.probs[k] * (v[k] - sf.year_hat);
        }
        // The offsets shape the year estimate only through the regression
        // term: d y_hat / d delta_k = -p_k b_k / (1 + delta_k)^2.
        for k in 0..n {
            let one_plus = T::one() + delta[k];
            g.delta[k] += c_reg * (-sf.probs[k] * midpoints[k] / (one_plus * one_plus));
        }

        let g_sims = model
            .params
            .regressor
            .mlp
            .backward(&sf.head_cache, &g_logits, &mut g.regressor);

        // Similarity path into the fused embedding.
        let nz = norm(&sf.z);
        if nz == T::zero() {
            return Err(Error::ZeroVector {
                context: format!("fused embedding of sample {}", s.id),
            });
        }
        let mut g_z = vec![T::zero(); sf.z.len()];
        let n_styles = model.styles.len();
        for (k, anchor) in model.styles.iter().chain(model.reasons.iter()).enumerate() {
            let cos = sf.sims[k];
            add_cosine_grad(&mut g_z, g_sims[k], &sf.z, nz, anchor, cos);
        }
        debug_assert_eq!(n_styles + model.reasons.len(), g_sims.len());

        // Contrastive path. With r_j = lambda_j f_j / denom and
        // r_i = f_i / denom: dL_i/dc_ii = (r_i - 1)/tau, dL_i/dc_ij = r_j/tau.
        if m >= 2 {
            let shift = sf
                .fcrc_cos
                .iter()
                .cloned()
                .fold(T::neg_infinity(), T::max)
                / tau;
            let f: Vec<T> = sf
                .fcrc_cos
                .iter()
                .map(|c| (*c / tau - shift).exp())
                .collect();
            let mut denom = f[i];
            for j in 0..m {
                if j != i {
                    denom += fw.lambda[i][j] * f[j];
                }
            }
            for j in 0..m {
                let dldc = if j == i {
                    w_fcrc * (f[i] / denom - T::one()) / tau
                } else {
                    w_fcrc * fw.lambda[i][j] * f[j] / (denom * tau)
                };
                let anchor = &model.styles[batch[j].target];
                add_cosine_grad(&mut g_z, dldc, &sf.z, nz, anchor, sf.fcrc_cos[j]);
            }
        }

        // The fused embedding is a sum, so both branches see g_z unchanged.
        model
            .params
            .adapter
            .backward(&sf.adapter_cache, &g_z, &mut g.adapter);
        if let Some(loc) = &sf.loc {
            let d = model.params.zero_conv.dim();
            let zc = &model.params.zero_conv.linear;
            let mut g_h = vec![T::zero(); d];
            for r in 0..d {
                g.zero_conv.bias[r] += g_z[r];
                for c in 0..d {
                    g.zero_conv.weight[r * d + c] += g_z[r] * loc.h[c];
                    g_h[c] += zc.weight[r * d + c] * g_z[r];
                }
            }
            model
                .params
                .loc_mlp
                .backward(&loc.cache, &g_h, &mut g.loc_mlp);
        }
    }
    Ok(g)
}

/// Worst relative disagreement between analytic and central-difference
/// gradients over the checked entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub worst_rel: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
}

/// Compare every `stride`-th parameter's analytic gradient against a central
/// difference of the total loss. Relative error uses
/// `|a - fd| / max(|a|, |fd|, 1e-6)`. The model is restored exactly.
pub fn finite_difference_check<T: Scalar>(
    model: &mut Model<T>,
    batch: &[SampleInput<T>],
    cfg: &TrainConfig,
    h: f64,
    stride: usize,
) -> Result<GradCheckReport> {
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be >= 1".into()));
    }
    let fw = forward_batch(model, batch, cfg)?;
    let analytic = backward(model, batch, &fw, cfg)?;
    let snapshot: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|(name, t)| (name, t.iter().map(|v| v.to_f64_lossy()).collect()))
        .collect();
    let sizes: Vec<usize> = snapshot.iter().map(|(_, t)| t.len()).collect();
    let h_t = T::from_f64_lossy(h);

    let mut report = GradCheckReport {
        checked: 0,
        worst_rel: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
    };
    for ti in 0..sizes.len() {
        for idx in (0..sizes[ti]).step_by(stride) {
            let orig = {
                let mut views = model.params.tensors_mut();
                let orig = views[ti].1[idx];
                views[ti].1[idx] = orig + h_t;
                orig
            };
            let plus = forward_batch(model, batch, cfg)?.loss.total.to_f64_lossy();
            {
                let mut views = model.params.tensors_mut();
                views[ti].1[idx] = orig - h_t;
            }
            let minus = forward_batch(model, batch, cfg)?.loss.total.to_f64_lossy();
            {
                let mut views = model.params.tensors_mut();
                views[ti].1[idx] = orig;
            }
            let fd = (plus - minus) / (2.0 * h);
            let a = snapshot[ti].1[idx];
            let rel = (a - fd).abs() / (a.abs().max(fd.abs()).max(1e-6));
            report.checked += 1;
            if rel > report.worst_rel {
                report.worst_rel = rel;
                report.worst_tensor = snapshot[ti].0.clone();
                report.worst_index = idx;
            }
        }
    }
    Ok(report)
}
