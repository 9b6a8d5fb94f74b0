//! Scalar abstractions shared by every numeric module.
//!
//! The game algebra (payoffs, potential) only needs field operations, so it is
//! written against [`Field`] and can be evaluated exactly over rationals. Anything
//! that takes square roots, logarithms or touches complex linear algebra uses
//! [`Real`], which is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Ordered field: enough for payoff and potential evaluation.
pub trait Field: Num + Clone + PartialOrd + Debug {}

impl<T> Field for T where T: Num + Clone + PartialOrd + Debug {}

/// Floating-point scalar usable by every module of the simulator.
///
/// Both `num_traits::Float` and `nalgebra::RealField` provide `sqrt`, `abs`,
/// etc.; call them as `Float::sqrt(x)` where the compiler reports ambiguity.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + RealField
    + Copy
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 constant representable")
    }

    /// Lossy conversion to `f64`, used for reporting.
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type Cplx<T> = num_complex::Complex<T>;

/// Relative difference `|a - b| / max(|a|, |b|, tiny)`.
pub fn rel_diff<T: Real>(a: T, b: T) -> T {
    let scale = Float::max(Float::max(Float::abs(a), Float::abs(b)), T::min_positive_value());
    Float::abs(a - b) / scale
}
