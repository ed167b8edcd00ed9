use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point type used for dirt levels, timestamps and sums.
///
/// Implemented for `f32` and `f64`. Everything that accumulates dirt levels
/// (the estimator, dirt maps, the partitioner, dwell lookup) is generic over
/// it; the simulator and the CLI work in `f64`.
pub trait Scalar:
    Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion used at the serialization and rendering boundary.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
