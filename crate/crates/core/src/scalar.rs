//! Scalar abstraction shared by the network engine, the simulator and the
//! learners.
//!
//! Everything numeric in this crate is written against [`Scalar`], which is
//! implemented for `f32` and `f64`. Random draws are always made in `f64` and
//! narrowed, so a given seed produces the same stream of decisions for either
//! precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal or config value into this precision.
    #[inline]
    fn lit(x: f64) -> Self {
        // Float::from on f32/f64 cannot fail for finite input; NaN maps to NaN.
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Dot product with eight independent accumulators so the loop vectorizes.
    #[inline]
    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        const LANES: usize = 8;
        let mut acc = [Self::zero(); LANES];
        let chunks_a = a.chunks_exact(LANES);
        let chunks_b = b.chunks_exact(LANES);
        let rem_a = chunks_a.remainder();
        let rem_b = chunks_b.remainder();
        for (ca, cb) in chunks_a.zip(chunks_b) {
            for l in 0..LANES {
                acc[l] = acc[l] + ca[l] * cb[l];
            }
        }
        let mut tail = Self::zero();
        for (x, y) in rem_a.iter().zip(rem_b) {
            tail = tail + *x * *y;
        }
        ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
    }

    /// `y += alpha * x`.
    #[inline]
    fn axpy(alpha: Self, x: &[Self], y: &mut [Self]) {
        debug_assert_eq!(x.len(), y.len());
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = *yi + alpha * *xi;
        }
    }

    #[inline]
    fn norm2(x: &[Self]) -> Self {
        Self::dot(x, x).sqrt()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
