//! Value-level arithmetic: binary32/binary64 semantics, parametric two's-complement
//! fixed point, sign-bit extraction and both realizations of the Leaky-ReLU.

mod fixed;
mod scalar;

pub use fixed::{fx_add, fx_mul, leaky_relu_shift, FixedPoint, Fx, QFormat};
pub use scalar::{Arithmetic, Scalar};

use crate::error::{Error, Result};

/// Slope of the negative branch of the Leaky-ReLU. Hard-wired: the shift
/// realization only exists for this value.
pub const LEAKY_SLOPE: f32 = 0.25;

/// Arithmetic right shift that realizes the `0.25 * x` branch in hardware.
pub const LEAKY_SHIFT: u32 = 2;

/// Sign extracted from the most significant bit: `-1` if the sign bit is set,
/// `+1` otherwise. Never zero.
///
/// `-0.0` maps to `-1` in the float path, `0` maps to `+1` in two's complement.
pub fn msb<T: Scalar>(x: T) -> Result<i32> {
    if !x.is_finite() {
        return Err(Error::domain(format!("msb of non-finite value {x:?}")));
    }
    Ok(x.msb())
}

/// `x` for `x >= 0`, `0.25 * x` otherwise. Multiplying by a power of two is
/// exact in binary32 unless the result underflows.
pub fn leaky_relu_real(x: f32) -> f32 {
    if x >= 0.0 {
        x
    } else {
        x * LEAKY_SLOPE
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_examples() {
        assert_eq!(msb(3.7f32).unwrap(), 1);
        assert_eq!(msb(-0.5f32).unwrap(), -1);
        assert_eq!(msb(0.0f32).unwrap(), 1);
        assert_eq!(msb(-0.0f32).unwrap(), -1);
        assert_eq!(msb(Fx::<16, 8>::from_mantissa(0)).unwrap(), 1);
        assert_eq!(msb(Fx::<16, 8>::from_mantissa(-1)).unwrap(), -1);
    }

    #[test]
    fn msb_rejects_non_finite() {
        assert!(matches!(msb(f32::NAN), Err(Error::Domain(_))));
        assert!(matches!(msb(f32::INFINITY), Err(Error::Domain(_))));
        assert!(matches!(msb(f64::NEG_INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn leaky_real_examples() {
        assert_eq!(leaky_relu_real(8.0), 8.0);
        assert_eq!(leaky_relu_real(-4.0), -1.0);
        assert_eq!(leaky_relu_real(0.0), 0.0);
    }

    proptest! {
        #[test]
        fn leaky_real_is_monotone(a in -1e30f32..1e30, b in -1e30f32..1e30) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(leaky_relu_real(lo) <= leaky_relu_real(hi));
        }

        #[test]
        fn msb_depends_only_on_sign_bit(a in any::<f32>(), b in any::<f32>()) {
            prop_assume!(a.is_finite() && b.is_finite());
            let sa = msb(a).unwrap();
            prop_assert!(sa == 1 || sa == -1);
            if a.is_sign_negative() == b.is_sign_negative() {
                prop_assert_eq!(sa, msb(b).unwrap());
            }
        }
    }
}
