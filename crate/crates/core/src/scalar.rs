use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point element type shared by the model, the position tables and
/// the embedding analyses. Training runs in `f32`; gradient checks in `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and RNG draws.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to every Scalar")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::of(x as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Value as stored in the little-endian `f32` on-disk formats.
    #[inline]
    fn as_f32(self) -> f32 {
        self.to_f32().expect("Scalar converts to f32")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
