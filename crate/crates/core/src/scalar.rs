//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar accepted by the solvers (`f32` or `f64`).
///
/// Transcendental functions come from [`RealField`]; conversions come from
/// `num-traits`, so callers never hit the method ambiguity that arises when
/// both `RealField` and `num_traits::Float` are in scope.
pub trait Real:
    RealField + Copy + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in target float")
    }

    /// Lossy conversion into `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Absolute tolerance used for structural checks: `max(requested, 64 ε)`.
    #[inline]
    fn tol(requested: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(64.0);
        Self::lit(requested).max(floor)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{jθ}` as a complex number.
#[inline]
pub fn unit_phasor<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, s)
}

#[inline]
pub(crate) fn cabs<T: Real>(z: Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phasor_has_unit_modulus() {
        for k in 0..16 {
            let z = unit_phasor(k as f64 * 0.7);
            assert!((cabs(z) - 1.0).abs() < 1e-15);
        }
        let z = unit_phasor(std::f32::consts::PI);
        assert!((z.re + 1.0).abs() < 1e-6);
    }

    #[test]
    fn tolerance_floor_tracks_precision() {
        assert_eq!(f64::tol(1e-12), 1e-12);
        assert!(f32::tol(1e-12) > 1e-6);
    }
}
