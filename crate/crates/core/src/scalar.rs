use std::fmt::Debug;

use num_traits::{Float, NumCast};

/// Real scalar used by affinity scoring and summary statistics.
pub trait Scalar: Float + Debug + Default + Send + Sync + 'static {
    #[inline]
    fn from_f64(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 is representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("count is representable")
    }

    #[inline]
    fn half() -> Self {
        Self::from_f64(0.5)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(f32::from_count(3), 3.0);
        assert_eq!(f64::half(), 0.5);
        assert_eq!(0.25f32.to_f64_lossy(), 0.25);
    }
}
