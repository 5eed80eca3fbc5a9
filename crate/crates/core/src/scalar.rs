//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point type usable by the PCA engine: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Relative cut below which an eigenvalue is treated as zero
    /// (compared against the largest eigenvalue).
    fn rank_tolerance() -> Self;

    /// Lossless for `f64`, rounding for `f32`.
    fn of(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Real for f64 {
    fn rank_tolerance() -> Self {
        1e-12
    }

    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Real for f32 {
    // f32 Gram eigenvalues carry ~1e-7 relative noise, so 1e-12 would keep
    // numerically-null directions.
    fn rank_tolerance() -> Self {
        1e-5
    }

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}
