//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the simulator can run in.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal or parameter into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Population mean and standard deviation.
pub fn mean_std<T: Real>(values: &[T]) -> (T, T) {
    if values.is_empty() {
        return (T::nan(), T::nan());
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}
