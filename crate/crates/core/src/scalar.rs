//! Scalar abstraction for the closed-form parts of the model.
//!
//! Everything that is plain arithmetic on physical quantities (parameter
//! derivation, rate formulas, loop transfer functions, thermometry algebra)
//! is written against [`Real`], so it runs in `f32` as well as `f64`. The
//! numerical oracles (master-equation solver, Monte Carlo, least squares)
//! are `f64` only.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`, rounding if needed.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }

    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Angular frequency (rad/s) from an ordinary frequency (Hz).
#[inline]
pub fn hz_to_rad<T: Real>(f: T) -> T {
    T::two_pi() * f
}

/// Ordinary frequency (Hz) from an angular frequency (rad/s).
#[inline]
pub fn rad_to_hz<T: Real>(w: T) -> T {
    w / T::two_pi()
}
