//! First-moment/second-moment optimizer with bias correction, per-group
//! learning rates, an optional variance-rectified warmup, and a stepped
//! learning-rate schedule.

use crate::error::Error;
use crate::head::clamp_delta;
use crate::model::ModelParams;
use crate::scalar::Scalar;
use crate::train::backward::GradientSet;
use crate::train::TrainConfig;
use crate::Result;

/// Moment accumulators, one pair of vectors per parameter tensor in the
/// canonical tensor order.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn zeros_like(params: &ModelParams<T>) -> Self {
        let sizes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        AdamState {
            m: sizes.iter().map(|n| vec![T::zero(); *n]).collect(),
            v: sizes.iter().map(|n| vec![T::zero(); *n]).collect(),
            step: 0,
        }
    }
}

/// Stepped decay: the base rate is multiplied by `gamma` once per
/// `step_size` epochs.
pub fn lr_at(base: f64, epoch: usize, step_size: usize, gamma: f64) -> f64 {
    base * gamma.powi((epoch / step_size) as i32)
}

/// One element update. Returns the new moments and the parameter delta
/// (already scaled by the learning rate, not yet applied).
/// `rectifier` is `None` for plain bias-corrected steps, or the warmup state
/// computed once per step: `Some(None)` suppresses the variance term,
/// `Some(Some(r))` scales it.
#[allow(clippy::too_many_arguments)]
fn adam_update<T: Scalar>(
    m: T,
    v: T,
    g: T,
    beta1: T,
    beta2: T,
    bc1: T,
    bc2: T,
    lr: T,
    eps: T,
    rectifier: Option<Option<T>>,
) -> (T, T, T) {
    let m_new = beta1 * m + (T::one() - beta1) * g;
    let v_new = beta2 * v + (T::one() - beta2) * g * g;
    let m_hat = m_new / bc1;
    let delta = match rectifier {
        None => lr * m_hat / ((v_new / bc2).sqrt() + eps),
        Some(None) => lr * m_hat,
        Some(Some(r)) => lr * r * m_hat / ((v_new / bc2).sqrt() + eps),
    };
    (m_new, v_new, delta)
}

/// Apply one optimization step in place. The adapter trains at its own
/// learning rate; a frozen location network is skipped entirely (its
/// moments do not advance). Period offsets are clamped after the update.
pub fn optimizer_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &GradientSet<T>,
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    state.step += 1;
    let t = state.step;
    let beta1 = T::from_f64_lossy(cfg.beta1);
    let beta2 = T::from_f64_lossy(cfg.beta2);
    let eps = T::from_f64_lossy(1e-8);
    let bc1 = T::from_f64_lossy(1.0 - cfg.beta1.powi(t as i32));
    let bc2_f = 1.0 - cfg.beta2.powi(t as i32);
    let bc2 = T::from_f64_lossy(bc2_f);
    // Rectified warmup: variance kicks in only once its estimate has enough
    // effective samples.
    let rectifier: Option<Option<T>> = if cfg.rectify {
        let rho_inf = 2.0 / (1.0 - cfg.beta2) - 1.0;
        let rho_t = rho_inf - 2.0 * (t as f64) * cfg.beta2.powi(t as i32) / bc2_f;
        if rho_t > 4.0 {
            let r = (((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                .sqrt();
            Some(Some(T::from_f64_lossy(r)))
        } else {
            Some(None)
        }
    } else {
        None
    };

    let gtensors = grads.tensors();
    let mut ptensors = params.tensors_mut();
    if gtensors.len() != ptensors.len()
        || gtensors.len() != state.m.len()
        || gtensors.len() != state.v.len()
    {
        return Err(Error::LengthMismatch {
            context: "optimizer state vs parameters".into(),
            left: gtensors.len(),
            right: ptensors.len(),
        });
    }
    for (ti, (name, grad)) in gtensors.iter().enumerate() {
        let (pname, param) = &mut ptensors[ti];
        if pname != name || grad.len() != param.len() {
            return Err(Error::ShapeMismatch {
                context: format!("gradient tensor {name}"),
                expected: format!("{pname} x {}", param.len()),
                got: format!("{name} x {}", grad.len()),
            });
        }
        if cfg.freeze_location && name.starts_with("loc.") {
            continue;
        }
        let base = if name.starts_with("adapter.") {
            cfg.lr_adapter
        } else {
            cfg.lr_main
        };
        let lr = T::from_f64_lossy(lr_at(base, epoch, cfg.scheduler_step, cfg.scheduler_gamma));
        let (ms, vs) = (&mut state.m[ti], &mut state.v[ti]);
        if ms.len() != param.len() || vs.len() != param.len() {
            return Err(Error::LengthMismatch {
                context: format!("optimizer moments for {name}"),
                left: ms.len(),
                right: param.len(),
            });
        }
        for k in 0..param.len() {
            let (m_new, v_new, delta) = adam_update(
                ms[k], vs[k], grad[k], beta1, beta2, bc1, bc2, lr, eps, rectifier,
            );
            ms[k] = m_new;
            vs[k] = v_new;
            param[k] -= delta;
        }
    }
    drop(ptensors);
    clamp_delta(&mut params.regressor.delta);
    Ok(())
}
