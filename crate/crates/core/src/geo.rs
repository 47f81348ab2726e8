//! GPS conditioning: random Fourier features, the location network, and the
//! zero-initialized fusion projection.
//!
//! The projection starts at exactly zero so that attaching the location branch
//! cannot change predictions until training moves it: fused output at init is
//! bitwise identical to the image-only path.

use crate::error::Error;
use crate::nn::{Linear, Mlp};
use crate::scalar::Scalar;
use crate::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Frozen random Fourier feature bank. `freqs` is `num_features x 2`,
/// row-major, sampled N(0, sigma^2) from the stored seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RffParams<T> {
    freqs: Vec<T>,
    num_features: usize,
    sigma: f64,
    seed: u64,
}

impl<T: Scalar> RffParams<T> {
    pub fn new(num_features: usize, sigma: f64, seed: u64) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::InvalidConfig("rff needs at least one feature".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rff sigma must be positive, got {sigma}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, sigma).expect("positive sigma");
        let freqs = (0..num_features * 2)
            .map(|_| T::from_f64_lossy(dist.sample(&mut rng)))
            .collect();
        Ok(RffParams {
            freqs,
            num_features,
            sigma,
            seed,
        })
    }

    /// Rebuild from persisted frequencies (checkpoint load path).
    pub fn from_freqs(freqs: Vec<T>, sigma: f64, seed: u64) -> Result<Self> {
        if freqs.is_empty() || freqs.len() % 2 != 0 {
            return Err(Error::ShapeMismatch {
                context: "rff frequencies".into(),
                expected: "nonempty, even length (F x 2)".into(),
                got: format!("{}", freqs.len()),
            });
        }
        let num_features = freqs.len() / 2;
        Ok(RffParams {
            freqs,
            num_features,
            sigma,
            seed,
        })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Encoded output dimension (`2 * num_features`).
    pub fn out_dim(&self) -> usize {
        self.num_features * 2
    }

    pub fn freqs(&self) -> &[T] {
        &self.freqs
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Encode a GPS coordinate as `sqrt(1/F) * [sin(Wx); cos(Wx)]` with
/// `x = (lat/90, lon/180)`. The output always has unit Euclidean norm.
pub fn rff_encode<T: Scalar>(lat: T, lon: T, rff: &RffParams<T>) -> Result<Vec<T>> {
    let lat90 = T::from_f64_lossy(90.0);
    let lon180 = T::from_f64_lossy(180.0);
    if !(lat.abs() <= lat90) {
        return Err(Error::FieldOutOfRange {
            id: "gps".into(),
            field: "lat",
            value: lat.to_f64_lossy(),
            min: -90.0,
            max: 90.0,
        });
    }
    if !(lon.abs() <= lon180) {
        return Err(Error::FieldOutOfRange {
            id: "gps".into(),
            field: "lon",
            value: lon.to_f64_lossy(),
            min: -180.0,
            max: 180.0,
        });
    }
    let x0 = lat / lat90;
    let x1 = lon / lon180;
    let scale = T::from_f64_lossy((1.0 / rff.num_features as f64).sqrt());
    let f = rff.num_features;
    let mut out = vec![T::zero(); 2 * f];
    for i in 0..f {
        let proj = rff.freqs[2 * i] * x0 + rff.freqs[2 * i + 1] * x1;
        out[i] = scale * proj.sin();
        out[f + i] = scale * proj.cos();
    }
    Ok(out)
}

/// Square projection that starts at exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroConv<T> {
    pub linear: Linear<T>,
}

impl<T: Scalar> ZeroConv<T> {
    pub fn zeros(dim: usize) -> Self {
        ZeroConv {
            linear: Linear::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.in_dim
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.linear.forward(x)
    }

    /// True while every weight and bias is exactly zero.
    pub fn is_zero_init(&self) -> bool {
        self.linear.weight.iter().all(|w| *w == T::zero())
            && self.linear.bias.iter().all(|b| *b == T::zero())
    }
}

/// Image-side adapter application. The adapter maps encoder embeddings into
/// the shared similarity space.
pub fn adapter_forward<T: Scalar>(adapter: &Mlp<T>, z: &[T]) -> Result<Vec<T>> {
    adapter.forward(z)
}

/// GPS to location embedding: Fourier features through the location network.
pub fn location_forward<T: Scalar>(
    rff: &RffParams<T>,
    loc_mlp: &Mlp<T>,
    lat: T,
    lon: T,
) -> Result<Vec<T>> {
    let enc = rff_encode(lat, lon, rff)?;
    loc_mlp.forward(&enc)
}

/// Elementwise sum of image and optional location embeddings. With no
/// location side the image embedding passes through untouched.
pub fn fuse<T: Scalar>(z_v: &[T], z_l: Option<&[T]>) -> Result<Vec<T>> {
    match z_l {
        None => Ok(z_v.to_vec()),
        Some(l) => {
            if l.len() != z_v.len() {
                return Err(Error::ShapeMismatch {
                    context: "fuse".into(),
                    expected: format!("{}", z_v.len()),
                    got: format!("{}", l.len()),
                });
            }
            Ok(z_v.iter().zip(l).map(|(a, b)| *a + *b).collect())
        }
    }
}
