//! Floating-point abstraction used by the dense linear algebra and the
//! closed-form coefficients. Everything above that layer works in `f64`.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    'static + Float + NumAssign + FromPrimitive + ToPrimitive + Default + Debug + Display + LowerExp + Send + Sync
{
    /// Converts an `f64` literal. Panics only for types that cannot hold
    /// ordinary finite constants, which none of the implementors do.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Round-off scale used for relative tolerances.
    fn tolerance() -> Self;
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-12
    }
}
