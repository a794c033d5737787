//! Extended-range reals.
//!
//! Several constants of the general-case bound grow like `exp(t * c)` with
//! `c` in the thousands, far past the largest `f64`. [`ExtFloat`] keeps an
//! `f64` significand and an `i64` binary exponent, so products, quotients,
//! square roots and powers keep double precision at any magnitude.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

// fdlibm split of ln 2; the high part has trailing zero bits so k * LN2_HI
// stays exact for moderate k.
const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;

/// `mant * 2^exp` with `0.5 <= |mant| < 1`, or zero.
#[derive(Clone, Copy, Debug)]
pub struct ExtFloat {
    mant: f64,
    exp: i64,
}

impl ExtFloat {
    pub const ZERO: ExtFloat = ExtFloat { mant: 0.0, exp: 0 };
    pub const ONE: ExtFloat = ExtFloat { mant: 0.5, exp: 1 };

    fn normalized(mant: f64, exp: i64) -> Self {
        if mant == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = libm::frexp(mant);
        ExtFloat {
            mant: m,
            exp: exp + e as i64,
        }
    }

    /// Panics on non-finite input; every caller validates its inputs first.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "ExtFloat::from_f64 got {x}");
        Self::normalized(x, 0)
    }

    /// Nearest `f64`; overflows to infinity and underflows to zero.
    pub fn to_f64(self) -> f64 {
        if self.mant == 0.0 {
            return 0.0;
        }
        let e = self.exp.clamp(i32::MIN as i64 / 2, i32::MAX as i64 / 2) as i32;
        libm::ldexp(self.mant, e)
    }

    pub fn is_zero(self) -> bool {
        self.mant == 0.0
    }

    pub fn is_sign_negative(self) -> bool {
        self.mant < 0.0
    }

    pub fn abs(self) -> Self {
        ExtFloat {
            mant: self.mant.abs(),
            exp: self.exp,
        }
    }

    /// `e^x` for any finite `x` with `|x| < 6e18`.
    pub fn exp(x: f64) -> Self {
        assert!(x.is_finite(), "ExtFloat::exp got {x}");
        let k = (x / std::f64::consts::LN_2).floor();
        assert!(k.abs() < 9.0e18, "ExtFloat::exp argument {x} out of range");
        let r = (x - k * LN2_HI) - k * LN2_LO;
        Self::normalized(r.exp(), k as i64)
    }

    /// Natural logarithm of a positive value.
    pub fn ln(self) -> f64 {
        assert!(self.mant > 0.0, "ln of non-positive ExtFloat");
        self.mant.ln() + self.exp as f64 * std::f64::consts::LN_2
    }

    pub fn log10(self) -> f64 {
        self.ln() / std::f64::consts::LN_10
    }

    pub fn sqrt(self) -> Self {
        assert!(self.mant >= 0.0, "sqrt of negative ExtFloat");
        if self.mant == 0.0 {
            return Self::ZERO;
        }
        if self.exp % 2 == 0 {
            Self::normalized(self.mant.sqrt(), self.exp / 2)
        } else {
            Self::normalized((2.0 * self.mant).sqrt(), (self.exp - 1) / 2)
        }
    }

    /// Integer power by repeated squaring; keeps relative error at a few ulps.
    pub fn powi(self, n: i32) -> Self {
        self.powi_i64(n as i64)
    }

    /// Real power of a non-negative value.
    pub fn powf(self, y: f64) -> Self {
        if y == 0.0 {
            return Self::ONE;
        }
        if self.mant == 0.0 {
            return if y > 0.0 { Self::ZERO } else { panic!("0^{y}") };
        }
        if y.fract() == 0.0 && y.abs() <= 64.0 {
            return self.powi(y as i32);
        }
        // 2^{exp y} with exp * y split exactly, so the huge part of the
        // logarithm is never rounded.
        let e = self.exp as f64;
        let hi = e * y;
        let lo = e.mul_add(y, -hi);
        let whole = hi.floor();
        let frac = (hi - whole) + lo;
        assert!(whole.abs() < 9.0e18, "ExtFloat::powf result out of range");
        let r = Self::exp(y * self.mant.ln() + frac * std::f64::consts::LN_2);
        ExtFloat { mant: r.mant, exp: r.exp + whole as i64 }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn pow10(e: i64) -> Self {
        Self::from_f64(10.0).powi_i64(e)
    }

    fn powi_i64(self, n: i64) -> Self {
        let mut base = if n < 0 { Self::ONE / self } else { self };
        let mut k = n.unsigned_abs();
        let mut acc = Self::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    /// Relative difference `|a - b| / max(|a|, |b|)`; zero when both are zero.
    pub fn rel_diff(self, other: Self) -> f64 {
        let scale = self.abs().max(other.abs());
        if scale.is_zero() {
            return 0.0;
        }
        ((self - other).abs() / scale).to_f64()
    }
}

impl From<f64> for ExtFloat {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl Add for ExtFloat {
    type Output = ExtFloat;
    fn add(self, rhs: ExtFloat) -> ExtFloat {
        if self.mant == 0.0 {
            return rhs;
        }
        if rhs.mant == 0.0 {
            return self;
        }
        let (big, small) = if self.exp >= rhs.exp {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let shift = big.exp - small.exp;
        if shift > 1100 {
            return big;
        }
        let m = big.mant + libm::ldexp(small.mant, -(shift as i32));
        Self::normalized(m, big.exp)
    }
}

impl Neg for ExtFloat {
    type Output = ExtFloat;
    fn neg(self) -> ExtFloat {
        ExtFloat {
            mant: -self.mant,
            exp: self.exp,
        }
    }
}

impl Sub for ExtFloat {
    type Output = ExtFloat;
    fn sub(self, rhs: ExtFloat) -> ExtFloat {
        self + (-rhs)
    }
}

impl Mul for ExtFloat {
    type Output = ExtFloat;
    fn mul(self, rhs: ExtFloat) -> ExtFloat {
        Self::normalized(self.mant * rhs.mant, self.exp + rhs.exp)
    }
}

impl Div for ExtFloat {
    type Output = ExtFloat;
    fn div(self, rhs: ExtFloat) -> ExtFloat {
        assert!(rhs.mant != 0.0, "ExtFloat division by zero");
        Self::normalized(self.mant / rhs.mant, self.exp - rhs.exp)
    }
}

impl Mul<f64> for ExtFloat {
    type Output = ExtFloat;
    fn mul(self, rhs: f64) -> ExtFloat {
        self * ExtFloat::from_f64(rhs)
    }
}

impl Add<f64> for ExtFloat {
    type Output = ExtFloat;
    fn add(self, rhs: f64) -> ExtFloat {
        self + ExtFloat::from_f64(rhs)
    }
}

impl PartialEq for ExtFloat {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for ExtFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let sa = self.mant.partial_cmp(&0.0)?;
        let sb = other.mant.partial_cmp(&0.0)?;
        if sa != sb {
            return sa.partial_cmp(&sb);
        }
        if sa == Ordering::Equal {
            return Some(Ordering::Equal);
        }
        let mag = match self.exp.cmp(&other.exp) {
            Ordering::Equal => self.mant.abs().partial_cmp(&other.mant.abs())?,
            o => o,
        };
        Some(if sa == Ordering::Less { mag.reverse() } else { mag })
    }
}

impl fmt::Display for ExtFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.to_f64();
        if x.is_finite() && (x != 0.0 || self.mant == 0.0) {
            return write!(f, "{x:e}");
        }
        let sign = if self.mant < 0.0 { "-" } else { "" };
        let l10 = self.abs().log10();
        let mut e10 = l10.floor() as i64;
        let mut m10 = (self.abs() / ExtFloat::pow10(e10)).to_f64();
        if m10 >= 10.0 {
            m10 /= 10.0;
            e10 += 1;
        } else if m10 < 1.0 {
            m10 *= 10.0;
            e10 -= 1;
        }
        write!(f, "{sign}{m10:.15}e{e10}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseExtFloatError(String);

impl fmt::Display for ParseExtFloatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot parse {:?} as an extended float", self.0)
    }
}

impl std::error::Error for ParseExtFloatError {}

impl FromStr for ExtFloat {
    type Err = ParseExtFloatError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseExtFloatError(s.to_string());
        let t = s.trim();
        let (mant, e10) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i64>().map_err(|_| err())?),
            None => (t, 0),
        };
        let m: f64 = mant.parse().map_err(|_| err())?;
        if !m.is_finite() {
            return Err(err());
        }
        Ok(ExtFloat::from_f64(m) * ExtFloat::pow10(e10))
    }
}

impl Serialize for ExtFloat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let x = self.to_f64();
        if x.is_finite() && (x != 0.0 || self.mant == 0.0) {
            serializer.serialize_f64(x)
        } else {
            serializer.collect_str(self)
        }
    }
}

impl<'de> Deserialize<'de> for ExtFloat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtVisitor;
        impl Visitor<'_> for ExtVisitor {
            type Value = ExtFloat;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a scientific-notation string")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtFloat, E> {
                if v.is_finite() {
                    Ok(ExtFloat::from_f64(v))
                } else {
                    Err(E::custom("non-finite number"))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtFloat, E> {
                Ok(ExtFloat::from_f64(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtFloat, E> {
                Ok(ExtFloat::from_f64(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtFloat, E> {
                v.parse().map_err(E::custom)
            }
        }
        deserializer.deserialize_any(ExtVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trips_ordinary_values() {
        for x in [0.0, 1.0, -2.5, 1e-300, 3.7e300, std::f64::consts::PI] {
            assert_eq!(ExtFloat::from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn exp_beyond_f64_range() {
        let big = ExtFloat::exp(1000.0);
        assert!(big.to_f64().is_infinite());
        assert!((big.ln() - 1000.0).abs() < 1e-12);
        let back = big * ExtFloat::exp(-1000.0);
        assert!((back.to_f64() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn display_and_parse_huge() {
        let v = ExtFloat::exp(2000.0);
        let s = v.to_string();
        assert!(s.ends_with("e868"), "{s}");
        let parsed: ExtFloat = s.parse().unwrap();
        assert!(parsed.rel_diff(v) < 1e-13);
    }

    #[test]
    fn ordering_handles_signs_and_exponents() {
        let a = ExtFloat::exp(800.0);
        let b = ExtFloat::exp(799.0);
        assert!(a > b);
        assert!(-a < -b);
        assert!(ExtFloat::ZERO < b);
        assert!(-b < ExtFloat::ZERO);
    }

    #[test]
    fn serializes_overflow_as_string() {
        let v = ExtFloat::exp(1000.0);
        let j = serde_json::to_string(&v).unwrap();
        assert!(j.starts_with('"'));
        let back: ExtFloat = serde_json::from_str(&j).unwrap();
        assert!(back.rel_diff(v) < 1e-13);
        assert_eq!(serde_json::to_string(&ExtFloat::from(0.5)).unwrap(), "0.5");
    }

    proptest! {
        #[test]
        fn arithmetic_matches_f64(a in -1e100f64..1e100, b in -1e100f64..1e100) {
            let (ea, eb) = (ExtFloat::from(a), ExtFloat::from(b));
            prop_assert_eq!((ea * eb).to_f64(), a * b);
            prop_assert_eq!((ea + eb).to_f64(), a + b);
            if b != 0.0 {
                prop_assert_eq!((ea / eb).to_f64(), a / b);
            }
            prop_assert_eq!(ea.abs().sqrt().to_f64(), a.abs().sqrt());
            prop_assert_eq!(ea.partial_cmp(&eb), a.partial_cmp(&b));
        }
    }
}
