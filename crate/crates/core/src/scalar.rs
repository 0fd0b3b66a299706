//! Floating-point scalar abstraction shared by the embedding and metrics code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Real scalar usable for embedding storage and metric values: `f32` or `f64`.
///
/// Inner products are always accumulated in `f64` regardless of the storage
/// width, so the narrower type only affects memory footprint.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless widening to `f64`.
    fn widen(self) -> f64 {
        self.to_f64().expect("f32/f64 always widen to f64")
    }

    /// Nearest representable value of `v`.
    fn narrow(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
