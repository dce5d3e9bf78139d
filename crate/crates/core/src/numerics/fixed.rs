use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_traits::{Bounded, Zero};
use serde::{Deserialize, Serialize};

use super::LEAKY_SHIFT;
use crate::error::{Error, Result};

/// Two's-complement fixed-point layout: `total_bits` wide, `frac_bits` of
/// them fractional (`Q(total-frac).frac`, sign bit included in the integer part).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "QFormatRepr", into = "QFormatRepr")]
pub struct QFormat {
    total_bits: u8,
    frac_bits: u8,
}

#[derive(Serialize, Deserialize)]
struct QFormatRepr {
    total_bits: u8,
    frac_bits: u8,
}

impl TryFrom<QFormatRepr> for QFormat {
    type Error = Error;

    fn try_from(r: QFormatRepr) -> Result<Self> {
        QFormat::new(r.total_bits, r.frac_bits)
    }
}

impl From<QFormat> for QFormatRepr {
    fn from(q: QFormat) -> Self {
        QFormatRepr {
            total_bits: q.total_bits,
            frac_bits: q.frac_bits,
        }
    }
}

impl QFormat {
    /// 16 bits, 8 fractional. Default for hardware-exact runs.
    pub const Q16_8: QFormat = QFormat {
        total_bits: 16,
        frac_bits: 8,
    };

    pub fn new(total_bits: u8, frac_bits: u8) -> Result<Self> {
        if !matches!(total_bits, 8 | 16 | 32) {
            return Err(Error::config(format!(
                "Q-format width must be 8, 16 or 32 bits, got {total_bits}"
            )));
        }
        if frac_bits >= total_bits {
            return Err(Error::config(format!(
                "Q-format needs frac_bits < total_bits, got {total_bits}.{frac_bits}"
            )));
        }
        Ok(QFormat { total_bits, frac_bits })
    }

    pub fn total_bits(self) -> u8 {
        self.total_bits
    }

    pub fn frac_bits(self) -> u8 {
        self.frac_bits
    }

    pub fn max_mantissa(self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    pub fn min_mantissa(self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Value of one LSB.
    pub fn resolution(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn max_value(self) -> f64 {
        self.max_mantissa() as f64 * self.resolution()
    }

    pub fn min_value(self) -> f64 {
        self.min_mantissa() as f64 * self.resolution()
    }

    pub fn contains(self, mantissa: i64) -> bool {
        (self.min_mantissa()..=self.max_mantissa()).contains(&mantissa)
    }

    pub(crate) fn saturate(self, wide: i64) -> i32 {
        wide.clamp(self.min_mantissa(), self.max_mantissa()) as i32
    }

    /// Round-to-nearest (ties away from zero) with saturation at the format bounds.
    pub(crate) fn quantize(self, x: f64) -> i32 {
        if x.is_nan() {
            return 0;
        }
        let scaled = (x * (self.frac_bits as f64).exp2()).round();
        if scaled >= self.max_mantissa() as f64 {
            self.max_mantissa() as i32
        } else if scaled <= self.min_mantissa() as f64 {
            self.min_mantissa() as i32
        } else {
            scaled as i32
        }
    }

    pub(crate) fn add(self, a: i32, b: i32) -> i32 {
        self.saturate(a as i64 + b as i64)
    }

    /// Full-width product, floored back to the format (arithmetic shift), then saturated.
    pub(crate) fn mul(self, a: i32, b: i32) -> i32 {
        self.saturate((a as i64 * b as i64) >> self.frac_bits)
    }

    pub(crate) fn int_mantissa(self, v: i32) -> i32 {
        self.saturate((v as i64) << self.frac_bits)
    }
}

impl Default for QFormat {
    fn default() -> Self {
        QFormat::Q16_8
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.total_bits, self.frac_bits)
    }
}

/// Parses `16.8` or `Q16.8` (total bits, fractional bits).
impl FromStr for QFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches(['Q', 'q']);
        let (total, frac) = body
            .split_once('.')
            .ok_or_else(|| Error::config(format!("malformed Q-format {s:?}, expected e.g. 16.8")))?;
        let parse = |v: &str| {
            v.parse::<u8>()
                .map_err(|_| Error::config(format!("malformed Q-format {s:?}")))
        };
        QFormat::new(parse(total)?, parse(frac)?)
    }
}

/// `shift` realization of the Leaky-ReLU on a raw mantissa.
#[inline]
pub(crate) fn shift_leaky(mantissa: i32) -> i32 {
    if mantissa >= 0 {
        mantissa
    } else {
        mantissa >> LEAKY_SHIFT
    }
}

/// A fixed-point value tagged with its run-time format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPoint {
    mantissa: i32,
    format: QFormat,
}

impl FixedPoint {
    pub fn new(mantissa: i64, format: QFormat) -> Result<Self> {
        if !format.contains(mantissa) {
            return Err(Error::domain(format!("mantissa {mantissa} does not fit {format}")));
        }
        Ok(FixedPoint {
            mantissa: mantissa as i32,
            format,
        })
    }

    /// Nearest representable value, saturating outside the range.
    pub fn from_real(x: f64, format: QFormat) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::domain(format!("cannot quantize non-finite {x}")));
        }
        Ok(FixedPoint {
            mantissa: format.quantize(x),
            format,
        })
    }

    pub fn max(format: QFormat) -> Self {
        FixedPoint {
            mantissa: format.max_mantissa() as i32,
            format,
        }
    }

    pub fn min(format: QFormat) -> Self {
        FixedPoint {
            mantissa: format.min_mantissa() as i32,
            format,
        }
    }

    pub fn mantissa(self) -> i32 {
        self.mantissa
    }

    pub fn format(self) -> QFormat {
        self.format
    }

    /// Exact: every mantissa of a <= 32-bit format is representable in binary64.
    pub fn to_real(self) -> f64 {
        self.mantissa as f64 * self.format.resolution()
    }
}

fn same_format(a: FixedPoint, b: FixedPoint) -> Result<QFormat> {
    if a.format != b.format {
        return Err(Error::domain(format!(
            "fixed-point format mismatch: {} vs {}",
            a.format, b.format
        )));
    }
    Ok(a.format)
}

/// Saturating addition.
pub fn fx_add(a: FixedPoint, b: FixedPoint) -> Result<FixedPoint> {
    let format = same_format(a, b)?;
    Ok(FixedPoint {
        mantissa: format.add(a.mantissa, b.mantissa),
        format,
    })
}

/// Full-width product truncated (floor) back to the format.
pub fn fx_mul(a: FixedPoint, b: FixedPoint) -> Result<FixedPoint> {
    let format = same_format(a, b)?;
    Ok(FixedPoint {
        mantissa: format.mul(a.mantissa, b.mantissa),
        format,
    })
}

/// Leaky-ReLU as an arithmetic right shift by two: identity on non-negative
/// mantissas, `floor(m / 4)` on negative ones.
pub fn leaky_relu_shift(x: FixedPoint) -> FixedPoint {
    FixedPoint {
        mantissa: shift_leaky(x.mantissa),
        format: x.format,
    }
}

/// Fixed-point scalar with the format fixed at compile time, so it can flow
/// through the generic network code. `TOTAL` must be 8, 16 or 32 and
/// `FRAC < TOTAL`; this is checked when the format is first used.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fx<const TOTAL: u8, const FRAC: u8>(i32);

impl<const TOTAL: u8, const FRAC: u8> Fx<TOTAL, FRAC> {
    const FORMAT: QFormat = {
        assert!(TOTAL == 8 || TOTAL == 16 || TOTAL == 32, "Fx width must be 8, 16 or 32");
        assert!(FRAC < TOTAL, "Fx needs FRAC < TOTAL");
        QFormat {
            total_bits: TOTAL,
            frac_bits: FRAC,
        }
    };

    pub const fn format() -> QFormat {
        Self::FORMAT
    }

    /// Wraps a raw mantissa, saturating it into range.
    pub fn from_mantissa(m: i64) -> Self {
        Fx(Self::FORMAT.saturate(m))
    }

    pub fn mantissa(self) -> i32 {
        self.0
    }

    pub fn to_fixed_point(self) -> FixedPoint {
        FixedPoint {
            mantissa: self.0,
            format: Self::FORMAT,
        }
    }
}

impl<const TOTAL: u8, const FRAC: u8> fmt::Debug for Fx<TOTAL, FRAC> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", Self::FORMAT, self.0)
    }
}

impl<const TOTAL: u8, const FRAC: u8> Add for Fx<TOTAL, FRAC> {
    type Output = Self;

    #[inline]
    fn add(self, rhs: Self) -> Self {
        Fx(Self::FORMAT.add(self.0, rhs.0))
    }
}

impl<const TOTAL: u8, const FRAC: u8> Mul for Fx<TOTAL, FRAC> {
    type Output = Self;

    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Fx(Self::FORMAT.mul(self.0, rhs.0))
    }
}

impl<const TOTAL: u8, const FRAC: u8> Zero for Fx<TOTAL, FRAC> {
    fn zero() -> Self {
        Fx(0)
    }

    fn is_zero(&self) -> bool {
        self.0 == 0
    }
}

impl<const TOTAL: u8, const FRAC: u8> Bounded for Fx<TOTAL, FRAC> {
    fn min_value() -> Self {
        Fx(Self::FORMAT.min_mantissa() as i32)
    }

    fn max_value() -> Self {
        Fx(Self::FORMAT.max_mantissa() as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q88() -> QFormat {
        QFormat::new(16, 8).unwrap()
    }

    fn fp(x: f64) -> FixedPoint {
        FixedPoint::from_real(x, q88()).unwrap()
    }

    #[test]
    fn format_validation() {
        assert!(QFormat::new(12, 4).is_err());
        assert!(QFormat::new(16, 16).is_err());
        assert!(QFormat::new(8, 7).is_ok());
        assert_eq!("Q16.8".parse::<QFormat>().unwrap(), QFormat::Q16_8);
        assert_eq!("32.16".parse::<QFormat>().unwrap().to_string(), "Q32.16");
        assert!("16".parse::<QFormat>().is_err());
    }

    #[test]
    fn range_matches_definition() {
        let q = q88();
        assert_eq!(q.max_value(), 128.0 - 1.0 / 256.0);
        assert_eq!(q.min_value(), -128.0);
        assert!(FixedPoint::new(32768, q).is_err());
        assert!(FixedPoint::new(-32768, q).is_ok());
    }

    #[test]
    fn shift_leaky_examples() {
        let q = q88();
        let f = |m| leaky_relu_shift(FixedPoint::new(m, q).unwrap()).mantissa();
        assert_eq!(f(-1024), -256);
        assert_eq!(f(-1), -1);
        assert_eq!(f(513), 513);
    }

    #[test]
    fn add_mul_examples() {
        assert_eq!(fx_add(fp(1.0), fp(1.0)).unwrap().to_real(), 2.0);
        let max = FixedPoint::max(q88());
        assert_eq!(fx_add(max, max).unwrap(), max);
        let min = FixedPoint::min(q88());
        assert_eq!(fx_add(min, min).unwrap(), min);
        assert_eq!(fx_mul(fp(1.5), fp(-2.0)).unwrap().to_real(), -3.0);
    }

    #[test]
    fn mul_floors() {
        // 2^-8 * 0.5 = 2^-9: floor to 0; negative floors to -2^-8
        let lsb = FixedPoint::new(1, q88()).unwrap();
        let neg_lsb = FixedPoint::new(-1, q88()).unwrap();
        assert_eq!(fx_mul(lsb, fp(0.5)).unwrap().mantissa(), 0);
        assert_eq!(fx_mul(neg_lsb, fp(0.5)).unwrap().mantissa(), -1);
    }

    #[test]
    fn format_mismatch_is_domain_error() {
        let a = fp(1.0);
        let b = FixedPoint::from_real(1.0, QFormat::new(16, 4).unwrap()).unwrap();
        assert!(matches!(fx_add(a, b), Err(Error::Domain(_))));
        assert!(matches!(fx_mul(a, b), Err(Error::Domain(_))));
    }

    #[test]
    fn negative_shift_is_floor_exhaustive_16_bit() {
        for frac in [0u8, 8, 15] {
            let q = QFormat::new(16, frac).unwrap();
            for m in q.min_mantissa()..0 {
                let out = leaky_relu_shift(FixedPoint::new(m, q).unwrap());
                assert_eq!(out.mantissa() as i64, m.div_euclid(4), "m = {m}");
            }
        }
    }

    #[test]
    fn real_round_trip_exhaustive_16_bit() {
        let q = q88();
        for m in q.min_mantissa()..=q.max_mantissa() {
            let x = FixedPoint::new(m, q).unwrap();
            assert_eq!(FixedPoint::from_real(x.to_real(), q).unwrap(), x);
        }
    }

    #[test]
    fn compile_time_format_agrees_with_runtime() {
        type Q = Fx<16, 8>;
        let a = Q::from_mantissa(384); // 1.5
        let b = Q::from_mantissa(-512); // -2.0
        assert_eq!((a * b).mantissa(), -768);
        assert_eq!(
            (a + b).to_fixed_point(),
            fx_add(a.to_fixed_point(), b.to_fixed_point()).unwrap()
        );
        assert_eq!(Q::from_mantissa(1 << 20).mantissa(), 32767);
    }
}
