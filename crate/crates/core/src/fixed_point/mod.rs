//! 34-bit signed fixed-point emulation.
//!
//! A [`Q34`] stores a two's-complement raw integer in `[-2^33, 2^33 - 1]`
//! that represents `raw / 2^F` for a [`QFormat`] `Q<I>.<F>` with
//! `1 + I + F = 34`. Conversions and products round to nearest, ties to
//! even, then saturate. Saturation is sticky in the `saturated` flag.

mod encoder;

pub use encoder::{correlate_fixed_direct, encode_segment_fixed, FixedBank, FixedCorrelator};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WORD_BITS: u32 = 34;
pub const RAW_MAX: i64 = (1 << (WORD_BITS - 1)) - 1;
pub const RAW_MIN: i64 = -(1 << (WORD_BITS - 1));

/// Binary-point placement: 1 sign bit, `int_bits`, `frac_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QFormat {
    int_bits: u32,
    frac_bits: u32,
}

impl QFormat {
    pub fn new(int_bits: u32, frac_bits: u32) -> Result<Self> {
        if 1 + int_bits + frac_bits != WORD_BITS {
            return Err(Error::param(format!(
                "Q{int_bits}.{frac_bits} does not fill a {WORD_BITS}-bit word (1 + I + F must be {WORD_BITS})"
            )));
        }
        Ok(QFormat { int_bits, frac_bits })
    }

    pub fn int_bits(self) -> u32 {
        self.int_bits
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    /// Value of one least-significant bit.
    pub fn resolution(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn max_value(self) -> f64 {
        RAW_MAX as f64 * self.resolution()
    }

    pub fn min_value(self) -> f64 {
        RAW_MIN as f64 * self.resolution()
    }
}

impl Default for QFormat {
    fn default() -> Self {
        QFormat { int_bits: 5, frac_bits: 28 }
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.int_bits, self.frac_bits)
    }
}

impl FromStr for QFormat {
    type Err = Error;

    /// Parses `"Q<I>.<F>"`, e.g. `"Q5.28"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("invalid fixed-point format {s:?}, expected Q<I>.<F>"));
        let body = s.strip_prefix('Q').or_else(|| s.strip_prefix('q')).ok_or_else(bad)?;
        let (i, f) = body.split_once('.').ok_or_else(bad)?;
        QFormat::new(i.parse().map_err(|_| bad())?, f.parse().map_err(|_| bad())?)
    }
}

/// A 34-bit fixed-point value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Q34 {
    raw: i64,
    format: QFormat,
    /// Set when this value or any operand it was computed from saturated.
    pub saturated: bool,
}

impl Q34 {
    /// Wraps a raw word, saturating it into 34 bits.
    pub fn from_raw(raw: i64, format: QFormat) -> Self {
        let (raw, saturated) = saturate(raw as i128);
        Q34 { raw, format, saturated }
    }

    pub fn zero(format: QFormat) -> Self {
        Q34 { raw: 0, format, saturated: false }
    }

    pub fn raw(self) -> i64 {
        self.raw
    }

    pub fn format(self) -> QFormat {
        self.format
    }

    pub fn abs(self) -> Self {
        let (raw, sat) = saturate((self.raw as i128).abs());
        Q34 { raw, saturated: self.saturated || sat, ..self }
    }
}

/// Round-to-nearest-even conversion with saturation. NaN maps to zero with
/// the flag set.
pub fn to_fixed(x: f64, format: QFormat) -> Q34 {
    if x.is_nan() {
        return Q34 { raw: 0, format, saturated: true };
    }
    let scaled = (x * (format.frac_bits as f64).exp2()).round_ties_even();
    let (raw, saturated) = if scaled > RAW_MAX as f64 {
        (RAW_MAX, true)
    } else if scaled < RAW_MIN as f64 {
        (RAW_MIN, true)
    } else {
        (scaled as i64, false)
    };
    Q34 { raw, format, saturated }
}

/// Exact: every 34-bit raw value is representable in an `f64`.
pub fn to_float(q: Q34) -> f64 {
    q.raw as f64 * q.format.resolution()
}

pub fn q_add(a: Q34, b: Q34) -> Q34 {
    check_formats(a, b);
    combine(a, b, a.raw as i128 + b.raw as i128)
}

pub fn q_sub(a: Q34, b: Q34) -> Q34 {
    check_formats(a, b);
    combine(a, b, a.raw as i128 - b.raw as i128)
}

/// Full-width product, rounded once to `F` fractional bits.
pub fn q_mul(a: Q34, b: Q34) -> Q34 {
    check_formats(a, b);
    let wide = a.raw as i128 * b.raw as i128;
    combine(a, b, round_shift(wide, a.format.frac_bits))
}

fn combine(a: Q34, b: Q34, wide: i128) -> Q34 {
    let (raw, sat) = saturate(wide);
    Q34 {
        raw,
        format: a.format,
        saturated: a.saturated || b.saturated || sat,
    }
}

fn check_formats(a: Q34, b: Q34) {
    assert_eq!(a.format, b.format, "fixed-point operands use different formats");
}

/// Clamps a wide value into the 34-bit range; the flag reports clipping.
pub fn saturate(wide: i128) -> (i64, bool) {
    if wide > RAW_MAX as i128 {
        (RAW_MAX, true)
    } else if wide < RAW_MIN as i128 {
        (RAW_MIN, true)
    } else {
        (wide as i64, false)
    }
}

/// `v / 2^shift` rounded to nearest, ties to even.
pub fn round_shift(v: i128, shift: u32) -> i128 {
    if shift == 0 {
        return v;
    }
    let floor = v >> shift;
    let rem = v - (floor << shift);
    let half = 1i128 << (shift - 1);
    if rem > half || (rem == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(x: f64) -> Q34 {
        to_fixed(x, QFormat::default())
    }

    /// Reference rounding written with truncating division instead of shifts.
    fn model_round(v: i128, shift: u32) -> i128 {
        let d = 1i128 << shift;
        let mut quo = v / d;
        let rem = v % d;
        if rem != 0 {
            if v < 0 {
                quo -= 1;
            }
            let r = v - quo * d; // in (0, d)
            if 2 * r > d || (2 * r == d && quo % 2 != 0) {
                quo += 1;
            }
        }
        quo
    }

    #[test]
    fn format_parsing() {
        assert_eq!("Q5.28".parse::<QFormat>().unwrap(), QFormat::default());
        assert_eq!(QFormat::default().to_string(), "Q5.28");
        assert_eq!("Q1.32".parse::<QFormat>().unwrap().frac_bits(), 32);
        assert!("Q5.20".parse::<QFormat>().is_err());
        assert!("5.28".parse::<QFormat>().is_err());
        assert!("Qx.28".parse::<QFormat>().is_err());
    }

    #[test]
    fn conversion_examples() {
        assert_eq!(q(0.0).raw(), 0);
        assert_eq!(q(1.0).raw(), 1 << 28);
        assert_eq!(q(1.0).raw(), 268_435_456);
        let big = q(40.0);
        assert_eq!(big.raw(), (1 << 33) - 1);
        assert!(big.saturated);
        assert!((to_float(big) - 31.999_999_996_274_71).abs() < 1e-12);
        let low = q(-40.0);
        assert_eq!(low.raw(), -(1 << 33));
        assert!(low.saturated);
        assert!(q(f64::NAN).saturated);
    }

    #[test]
    fn conversion_rounds_ties_to_even() {
        let lsb = QFormat::default().resolution();
        assert_eq!(q(0.5 * lsb).raw(), 0);
        assert_eq!(q(1.5 * lsb).raw(), 2);
        assert_eq!(q(2.5 * lsb).raw(), 2);
        assert_eq!(q(-0.5 * lsb).raw(), 0);
        assert_eq!(q(-1.5 * lsb).raw(), -2);
    }

    #[test]
    fn arithmetic_examples() {
        assert_eq!(to_float(q_mul(q(0.5), q(0.5))), 0.25);
        let x = q(2.71);
        assert_eq!(q_add(x, q(0.0)), x);
        assert_eq!(to_float(q_sub(q(1.0), q(0.25))), 0.75);
        let sum = q_add(q(20.0), q(20.0));
        assert!(sum.saturated);
        assert_eq!(sum.raw(), RAW_MAX);
        assert_eq!(q(-2.0).abs(), q(2.0));
    }

    #[test]
    fn saturation_is_sticky() {
        let sat = q(100.0);
        assert!(q_mul(sat, q(0.0)).saturated);
        assert!(!q_mul(q(1.0), q(0.0)).saturated);
    }

    #[test]
    fn round_shift_matches_model_on_edges() {
        for v in -40i128..40 {
            for shift in 0..4 {
                assert_eq!(round_shift(v, shift), model_round(v, shift), "v={v} shift={shift}");
            }
        }
    }

    #[test]
    #[should_panic(expected = "different formats")]
    fn mixed_formats_panic() {
        let other = QFormat::new(1, 32).unwrap();
        q_add(q(1.0), to_fixed(1.0, other));
    }

    proptest! {
        #[test]
        fn mul_matches_wide_model(a in RAW_MIN..=RAW_MAX, b in RAW_MIN..=RAW_MAX) {
            let f = QFormat::default();
            let got = q_mul(Q34::from_raw(a, f), Q34::from_raw(b, f));
            let wide = model_round(a as i128 * b as i128, 28);
            let expect = wide.clamp(RAW_MIN as i128, RAW_MAX as i128);
            prop_assert_eq!(got.raw() as i128, expect);
            prop_assert_eq!(got.saturated, expect != wide);
        }

        #[test]
        fn add_matches_wide_model(a in RAW_MIN..=RAW_MAX, b in RAW_MIN..=RAW_MAX) {
            let f = QFormat::default();
            let got = q_add(Q34::from_raw(a, f), Q34::from_raw(b, f));
            let wide = a as i128 + b as i128;
            prop_assert_eq!(got.raw() as i128, wide.clamp(RAW_MIN as i128, RAW_MAX as i128));
        }

        #[test]
        fn float_round_trip_on_representable(raw in RAW_MIN..=RAW_MAX) {
            let v = Q34::from_raw(raw, QFormat::default());
            prop_assert_eq!(to_fixed(to_float(v), v.format()), v);
        }

        #[test]
        fn mul_error_within_one_lsb(a in -31.0f64..31.0, b in -1.0f64..1.0) {
            let p = q_mul(q(a), q(b));
            prop_assume!(!p.saturated);
            prop_assert!((to_float(p) - to_float(q(a)) * to_float(q(b))).abs() <= 2f64.powi(-28));
        }

        #[test]
        fn saturates_outside_integer_range(x in 32.0f64..1e6) {
            prop_assert!(q(x).saturated);
            prop_assert_eq!(q(x).raw(), RAW_MAX);
            prop_assert!(q(-x - 1e-6).saturated);
            prop_assert_eq!(q(-x - 1e-6).raw(), RAW_MIN);
        }
    }
}
