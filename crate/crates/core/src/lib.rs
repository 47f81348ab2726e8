//! Construction-year estimation for buildings from precomputed embeddings.
//!
//! The pipeline scores a building image embedding against fixed text anchors
//! (seven architectural style periods plus a bank of visual reasons), optionally
//! fuses a GPS-derived location embedding through a zero-initialized projection,
//! and reads off a continuous year estimate from an ordinal regression head.
//! Training, evaluation, binary tensor IO, and the stratified split protocol
//! all live here; the `yearguessr` binary is a thin wrapper.
//!
//! All numeric kernels are generic over [`Scalar`]. On-disk tensors are always
//! 32-bit; in-memory computation defaults to 64-bit via the [`Real`] alias.

pub mod checkpoint;
pub mod embed;
pub mod error;
pub mod eval;
pub mod geo;
pub mod head;
pub mod model;
pub mod nn;
pub mod record;
pub mod scalar;
pub mod seed;
pub mod train;
mod wire;

pub use error::Error;
pub use scalar::Scalar;

/// Scalar used by training, verification, and reporting paths.
pub type Real = f64;

/// Scalar used for on-disk tensor storage.
pub type Stored = f32;

/// Model instantiated at computation precision.
pub type RealModel = model::Model<Real>;

/// Result alias for fallible operations in this crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;
