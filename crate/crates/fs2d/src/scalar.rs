//! Scalar abstraction: the whole pipeline is generic over the floating-point
//! type. `f64` is the default used by the concrete aliases at the crate root;
//! `f32` trades accuracy for speed.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + FftNum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal. Panics only for types that
    /// cannot represent any f64, which neither f32 nor f64 is.
    fn cast(v: f64) -> Self {
        Self::from_f64(v).expect("f64 -> Scalar conversion")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar -> f64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
