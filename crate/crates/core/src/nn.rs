//! Minimal dense network machinery with hand-written reverse-mode gradients.
//!
//! Layers are plain `Vec`-backed matrices; forward passes can capture the
//! caches needed for an exact backward pass. "Exact" means: the backward pass
//! differentiates precisely the function the forward pass computes, including
//! the tanh-form GELU, so central finite differences agree to near machine
//! precision.

use crate::error::Error;
use crate::scalar::Scalar;
use crate::Result;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Gelu,
    Tanh,
    Relu,
}

impl Activation {
    /// Stable numeric tag used when activations are persisted.
    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Gelu => 1,
            Activation::Tanh => 2,
            Activation::Relu => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Gelu),
            2 => Ok(Activation::Tanh),
            3 => Ok(Activation::Relu),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation code {other}"
            ))),
        }
    }

    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Gelu => gelu(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Derivative at the pre-activation value.
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Gelu => gelu_derivative(x),
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu<T: Scalar>(x: T) -> T {
    let c = T::from_f64_lossy(GELU_C);
    let a = T::from_f64_lossy(GELU_A);
    let half = T::from_f64_lossy(0.5);
    let u = c * (x + a * x * x * x);
    half * x * (T::one() + u.tanh())
}

fn gelu_derivative<T: Scalar>(x: T) -> T {
    let c = T::from_f64_lossy(GELU_C);
    let a = T::from_f64_lossy(GELU_A);
    let half = T::from_f64_lossy(0.5);
    let three = T::from_f64_lossy(3.0);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    let du = c * (T::one() + three * a * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * du
}

/// Dense affine map, weight stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
            in_dim,
            out_dim,
        }
    }

    /// Square map with unit diagonal; useful as a do-nothing layer in tests.
    pub fn identity(n: usize) -> Self {
        let mut l = Linear::zeros(n, n);
        for i in 0..n {
            l.weight[i * n + i] = T::one();
        }
        l
    }

    /// Glorot-normal weights, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let std = (2.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("positive std");
        Linear {
            weight: (0..in_dim * out_dim)
                .map(|_| T::from_f64_lossy(dist.sample(rng)))
                .collect(),
            bias: vec![T::zero(); out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim {
            return Err(Error::ShapeMismatch {
                context: "linear layer input".into(),
                expected: format!("{}", self.in_dim),
                got: format!("{}", x.len()),
            });
        }
        let mut out = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = T::zero();
            for (w, v) in row.iter().zip(x) {
                acc += *w * *v;
            }
            out.push(acc + self.bias[o]);
        }
        Ok(out)
    }
}

/// One MLP stage: affine map followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub linear: Linear<T>,
    pub activation: Activation,
}

/// Stack of [`Layer`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Layer<T>>,
}

/// Forward-pass tape: per layer, its input and its pre-activation.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    pub inputs: Vec<Vec<T>>,
    pub pres: Vec<Vec<T>>,
}

/// Parameter gradients aligned with an [`Mlp`]'s layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T> {
    pub layers: Vec<LinearGrads<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        MlpGrads {
            layers: mlp
                .layers
                .iter()
                .map(|l| LinearGrads {
                    weight: vec![T::zero(); l.linear.weight.len()],
                    bias: vec![T::zero(); l.linear.bias.len()],
                })
                .collect(),
        }
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("MLP needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].linear.out_dim != w[1].linear.in_dim {
                return Err(Error::ShapeMismatch {
                    context: "MLP layer chain".into(),
                    expected: format!("{}", w[0].linear.out_dim),
                    got: format!("{}", w[1].linear.in_dim),
                });
            }
        }
        Ok(Mlp { layers })
    }

    /// Glorot-initialized stack over the dim chain `dims[0] -> ... -> dims.last()`.
    /// Hidden layers use `hidden`, the final layer `output`.
    pub fn glorot(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig(
                "MLP dims need input and output".into(),
            ));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                linear: Linear::glorot(w[0], w[1], rng),
                activation: if i == last { output } else { hidden },
            })
            .collect();
        Mlp::new(layers)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].linear.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].linear.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.linear.weight.len() + l.linear.bias.len())
            .sum()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let mut h = x.to_vec();
        for layer in &self.layers {
            let pre = layer.linear.forward(&h)?;
            h = pre.iter().map(|v| layer.activation.apply(*v)).collect();
        }
        Ok(h)
    }

    /// Forward pass retaining everything backward needs.
    pub fn forward_cached(&self, x: &[T]) -> Result<(Vec<T>, MlpCache<T>)> {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pres: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_vec();
        for layer in &self.layers {
            let pre = layer.linear.forward(&h)?;
            cache.inputs.push(h);
            h = pre.iter().map(|v| layer.activation.apply(*v)).collect();
            cache.pres.push(pre);
        }
        Ok((h, cache))
    }

    /// Reverse pass. `g_out` is dL/d(output); parameter gradients accumulate
    /// into `grads`; the return value is dL/d(input).
    pub fn backward(&self, cache: &MlpCache<T>, g_out: &[T], grads: &mut MlpGrads<T>) -> Vec<T> {
        debug_assert_eq!(g_out.len(), self.out_dim());
        let mut g = g_out.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pres[l];
            let input = &cache.inputs[l];
            let lin = &layer.linear;
            // dL/d(pre) = dL/d(post) * act'(pre)
            let g_pre: Vec<T> = g
                .iter()
                .zip(pre)
                .map(|(gv, p)| *gv * layer.activation.derivative(*p))
                .collect();
            let lg = &mut grads.layers[l];
            for o in 0..lin.out_dim {
                lg.bias[o] += g_pre[o];
                let wrow = &mut lg.weight[o * lin.in_dim..(o + 1) * lin.in_dim];
                for (wg, inp) in wrow.iter_mut().zip(input) {
                    *wg += g_pre[o] * *inp;
                }
            }
            let mut g_in = vec![T::zero(); lin.in_dim];
            for o in 0..lin.out_dim {
                let wrow = &lin.weight[o * lin.in_dim..(o + 1) * lin.in_dim];
                for (gi, w) in g_in.iter_mut().zip(wrow) {
                    *gi += *w * g_pre[o];
                }
            }
            g = g_in;
        }
        g
    }

    /// dL/d(input) alone, for a given dL/d(output) seed. Parameter gradients
    /// are computed and discarded.
    pub fn input_gradient(&self, x: &[T], seed: &[T]) -> Result<Vec<T>> {
        let (_, cache) = self.forward_cached(x)?;
        let mut scratch = MlpGrads::zeros_like(self);
        Ok(self.backward(&cache, seed, &mut scratch))
    }
}
