//! Floating-point abstraction for the numeric kernels.

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar the math kernels are generic over.
///
/// `f64` is the working precision for training and verification; `f32` matches
/// the storage format and is enough for inference experiments.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`. Exact for `f64`, rounds for `f32`.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Scalar")
    }

    /// Widening conversion to `f64`. Exact for both supported scalars.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sequential left-to-right sum. Order is part of the determinism contract:
/// accumulation must not depend on thread count or iterator fusion.
pub fn seq_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut acc = T::zero();
    for v in values {
        acc += v;
    }
    acc
}

/// Dot product with sequential accumulation.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

/// Euclidean norm with sequential accumulation.
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
