//! Fixed-point decimal with four fractional digits.
//!
//! Prices and business values are compared exactly, so they are stored as a
//! scaled `i64` rather than a binary float. The canonical text form always
//! carries four fractional digits (`"8.5000"`).

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SCALE: i64 = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal literal `{0}`")]
pub struct ParseDecimalError(String);

impl Decimal {
    pub const ZERO: Decimal = Decimal(0);
    pub const ONE: Decimal = Decimal(SCALE);

    pub const fn from_scaled(raw: i64) -> Self {
        Decimal(raw)
    }

    pub const fn scaled(self) -> i64 {
        self.0
    }

    pub const fn from_int(v: i64) -> Self {
        Decimal(v * SCALE)
    }

    /// Builds `units + hundredths / 100`, handy for prices written as cents.
    pub const fn from_cents(cents: i64) -> Self {
        Decimal(cents * (SCALE / 100))
    }

    /// Rounds half away from zero onto the 4-digit grid.
    pub fn from_f64(v: f64) -> Self {
        Decimal((v * SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn abs(self) -> Self {
        Decimal(self.0.abs())
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn clamp(self, lo: Self, hi: Self) -> Self {
        self.max(lo).min(hi)
    }

    /// Whole-number check, used when a decimal lands in an integer domain.
    pub fn is_integral(self) -> bool {
        self.0 % SCALE == 0
    }

    /// Nearest integer, half away from zero.
    pub fn round_to_int(self) -> i64 {
        let q = self.0 / SCALE;
        let r = self.0 % SCALE;
        if r * 2 >= SCALE {
            q + 1
        } else if r * 2 <= -SCALE {
            q - 1
        } else {
            q
        }
    }

    /// Snaps to the nearest multiple of `step` (ties away from zero).
    pub fn snap(self, step: Decimal) -> Self {
        if step.0 <= 0 {
            return self;
        }
        let q = self.0.div_euclid(step.0);
        let r = self.0.rem_euclid(step.0);
        let k = if r * 2 >= step.0 { q + 1 } else { q };
        Decimal(k * step.0)
    }

    pub fn checked_mul_int(self, k: i64) -> Option<Self> {
        self.0.checked_mul(k).map(Decimal)
    }
}

impl Add for Decimal {
    type Output = Decimal;
    fn add(self, rhs: Self) -> Self {
        Decimal(self.0 + rhs.0)
    }
}

impl Sub for Decimal {
    type Output = Decimal;
    fn sub(self, rhs: Self) -> Self {
        Decimal(self.0 - rhs.0)
    }
}

impl Neg for Decimal {
    type Output = Decimal;
    fn neg(self) -> Self {
        Decimal(-self.0)
    }
}

impl From<i64> for Decimal {
    fn from(v: i64) -> Self {
        Decimal::from_int(v)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:04}", abs / SCALE as u64, abs % SCALE as u64)
    }
}

impl FromStr for Decimal {
    type Err = ParseDecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDecimalError(s.to_string());
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || frac_part.len() > 4
        {
            return Err(err());
        }
        let int: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| err())?
        };
        let mut frac: i64 = 0;
        for (i, c) in frac_part.chars().enumerate() {
            frac += (c as i64 - '0' as i64) * 10_i64.pow(3 - i as u32);
        }
        let raw = int
            .checked_mul(SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(err)?;
        Ok(Decimal(if neg { -raw } else { raw }))
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

struct DecimalVisitor;

impl Visitor<'_> for DecimalVisitor {
    type Value = Decimal;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a decimal string or number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Decimal, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Decimal, E> {
        Ok(Decimal::from_int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Decimal, E> {
        i64::try_from(v)
            .map(Decimal::from_int)
            .map_err(|_| E::custom("decimal out of range"))
    }

    // Scenario files may write prices as JSON numbers; go through the shortest
    // textual form so 8.3 does not become 8.2999.
    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Decimal, E> {
        format!("{v}").parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(DecimalVisitor)
    }
}
