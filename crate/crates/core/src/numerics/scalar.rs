use std::fmt::{self, Debug};
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::fixed::{shift_leaky, Fx, QFormat};
use super::LEAKY_SLOPE;
use crate::error::{Error, Result};

/// Number representation a network is evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arithmetic {
    Real32,
    Real64,
    Fixed(QFormat),
}

impl fmt::Display for Arithmetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arithmetic::Real32 => f.write_str("real32"),
            Arithmetic::Real64 => f.write_str("real64"),
            Arithmetic::Fixed(q) => write!(f, "fixed({q})"),
        }
    }
}

/// Parses `real32`, `real64`, `fixed` (Q16.8) or a Q-format such as `q16.8`.
impl FromStr for Arithmetic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real32" | "f32" => Ok(Arithmetic::Real32),
            "real64" | "f64" => Ok(Arithmetic::Real64),
            "fixed" => Ok(Arithmetic::Fixed(QFormat::Q16_8)),
            other => {
                let q = other.trim_start_matches("fixed(").trim_end_matches(')');
                if q.starts_with('q') {
                    Ok(Arithmetic::Fixed(q.parse()?))
                } else {
                    Err(Error::config(format!("unknown arithmetic {s:?}")))
                }
            }
        }
    }
}

/// Element type of tensors, kernels and scores.
///
/// `+` and `*` carry the representation's own rounding: IEEE round-to-nearest-even
/// for floats, saturating add and floored multiply for fixed point. Every schedule
/// evaluates the same sequence of these operations per output, which is what makes
/// them bit-identical.
pub trait Scalar:
    Copy + Debug + PartialOrd + Zero + Add<Output = Self> + Mul<Output = Self> + Send + Sync + 'static
{
    fn arithmetic() -> Arithmetic;

    /// Nearest representable value (saturating for fixed point).
    fn from_f32(v: f32) -> Self;

    fn to_f32(self) -> f32;

    fn to_f64(self) -> f64;

    /// Exact conversion of a binary-convolution score.
    fn from_score(score: i32) -> Self;

    fn sign_bit(self) -> bool;

    fn is_finite(self) -> bool;

    /// Hardware Leaky-ReLU of this representation.
    fn leaky_relu(self) -> Self;

    /// Raw bit pattern, for bit-exactness checks.
    fn bits(self) -> u64;

    #[inline]
    fn msb(self) -> i32 {
        if self.sign_bit() {
            -1
        } else {
            1
        }
    }

    /// Comparator used by max-pooling; keeps `self` on ties.
    #[inline]
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f32 {
    fn arithmetic() -> Arithmetic {
        Arithmetic::Real32
    }

    #[inline]
    fn from_f32(v: f32) -> Self {
        v
    }

    #[inline]
    fn to_f32(self) -> f32 {
        self
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn from_score(score: i32) -> Self {
        score as f32
    }

    #[inline]
    fn sign_bit(self) -> bool {
        self.is_sign_negative()
    }

    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }

    #[inline]
    fn leaky_relu(self) -> Self {
        if self >= 0.0 {
            self
        } else {
            self * LEAKY_SLOPE
        }
    }

    #[inline]
    fn bits(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Scalar for f64 {
    fn arithmetic() -> Arithmetic {
        Arithmetic::Real64
    }

    #[inline]
    fn from_f32(v: f32) -> Self {
        v as f64
    }

    #[inline]
    fn to_f32(self) -> f32 {
        self as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline]
    fn from_score(score: i32) -> Self {
        score as f64
    }

    #[inline]
    fn sign_bit(self) -> bool {
        self.is_sign_negative()
    }

    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    #[inline]
    fn leaky_relu(self) -> Self {
        if self >= 0.0 {
            self
        } else {
            self * LEAKY_SLOPE as f64
        }
    }

    #[inline]
    fn bits(self) -> u64 {
        self.to_bits()
    }
}

impl<const TOTAL: u8, const FRAC: u8> Scalar for Fx<TOTAL, FRAC> {
    fn arithmetic() -> Arithmetic {
        Arithmetic::Fixed(Self::format())
    }

    #[inline]
    fn from_f32(v: f32) -> Self {
        Fx::from_mantissa(Self::format().quantize(v as f64) as i64)
    }

    #[inline]
    fn to_f32(self) -> f32 {
        self.to_f64() as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self.mantissa() as f64 * Self::format().resolution()
    }

    #[inline]
    fn from_score(score: i32) -> Self {
        Fx::from_mantissa(Self::format().int_mantissa(score) as i64)
    }

    #[inline]
    fn sign_bit(self) -> bool {
        self.mantissa() < 0
    }

    #[inline]
    fn is_finite(self) -> bool {
        true
    }

    #[inline]
    fn leaky_relu(self) -> Self {
        Fx::from_mantissa(shift_leaky(self.mantissa()) as i64)
    }

    #[inline]
    fn bits(self) -> u64 {
        self.mantissa() as u32 as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Q = Fx<16, 8>;

    #[test]
    fn arithmetic_names_parse() {
        assert_eq!("real32".parse::<Arithmetic>().unwrap(), Arithmetic::Real32);
        assert_eq!(
            "fixed".parse::<Arithmetic>().unwrap(),
            Arithmetic::Fixed(QFormat::Q16_8)
        );
        assert_eq!(
            "Q8.4".parse::<Arithmetic>().unwrap(),
            Arithmetic::Fixed(QFormat::new(8, 4).unwrap())
        );
        let q = Arithmetic::Fixed(QFormat::new(32, 16).unwrap());
        assert_eq!(q.to_string().parse::<Arithmetic>().unwrap(), q);
        assert!("q12.4".parse::<Arithmetic>().is_err());
        assert!("half".parse::<Arithmetic>().is_err());
    }

    #[test]
    fn fixed_quantization_rounds_and_saturates() {
        assert_eq!(Q::from_f32(1.0).mantissa(), 256);
        assert_eq!(Q::from_f32(1.0 / 512.0).mantissa(), 1); // tie rounds away
        assert_eq!(Q::from_f32(1e6).mantissa(), 32767);
        assert_eq!(Q::from_f32(-1e6).mantissa(), -32768);
        assert_eq!(Q::from_score(-3).to_f32(), -3.0);
        assert_eq!(Q::from_score(1000).mantissa(), 32767);
    }

    #[test]
    fn fixed_leaky_is_shift() {
        assert_eq!(Q::from_f32(-4.0).leaky_relu().to_f32(), -1.0);
        assert_eq!(Q::from_mantissa(-1).leaky_relu().mantissa(), -1);
    }

    #[test]
    fn float_and_fixed_leaky_differ_by_at_most_one_lsb() {
        for m in -32768i64..0 {
            let x = Q::from_mantissa(m);
            let exact = x.to_f64() * 0.25;
            let shifted = x.leaky_relu().to_f64();
            assert!(shifted <= exact && exact - shifted < Q::format().resolution());
        }
    }

    #[test]
    fn max_of_keeps_first_on_ties() {
        assert_eq!(0.0f32.max_of(-0.0).bits(), 0.0f32.bits());
        assert_eq!((-0.0f32).max_of(0.0).bits(), (-0.0f32).bits());
        assert_eq!(1.0f32.max_of(3.0), 3.0);
    }
}
