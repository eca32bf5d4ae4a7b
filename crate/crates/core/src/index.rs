//! Exact Lebesgue indices and the rational arithmetic used by the exponent
//! calculus.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};

/// Exact rational used for exponents. Breakpoints and branch formulas are
/// evaluated in this type so that anchor identities hold bit-for-bit once
/// converted to `f64`.
pub type Exact = Ratio<i128>;

pub fn exact(numer: i128, denom: i128) -> Exact {
    Ratio::new(numer, denom)
}

pub fn exact_int(v: i128) -> Exact {
    Ratio::from_integer(v)
}

pub fn exact_to_f64(x: Exact) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Converts a finite `f64` into the rational spelled by its shortest
/// round-trip decimal representation, so `0.55` becomes `11/20` rather than
/// the nearest dyadic.
pub fn exact_from_f64(x: f64) -> Result<Exact> {
    if !x.is_finite() {
        return Err(LabError::domain(format!("{x} is not a finite real")));
    }
    parse_decimal(&format!("{x}"))
        .ok_or_else(|| LabError::domain(format!("{x} cannot be represented exactly")))
}

fn parse_decimal(s: &str) -> Option<Exact> {
    let s = s.trim();
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let mut numer: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        numer = numer
            .checked_mul(10)?
            .checked_add(c.to_digit(10)? as i128)?;
    }
    let denom = 10i128.checked_pow(frac_part.len() as u32)?;
    let r = Ratio::new(numer, denom);
    Some(if neg { -r } else { r })
}

/// A Lebesgue exponent `p`, either an exact positive rational or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LebesgueIndex {
    Finite(Ratio<i64>),
    Infinite,
}

impl LebesgueIndex {
    pub fn integer(p: i64) -> Self {
        LebesgueIndex::Finite(Ratio::from_integer(p))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        LebesgueIndex::Finite(Ratio::new(numer, denom))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, LebesgueIndex::Infinite)
    }

    /// `1/p`, with `1/inf = 0`.
    pub fn reciprocal(&self) -> Exact {
        match self {
            LebesgueIndex::Finite(p) => Ratio::new(*p.denom() as i128, *p.numer() as i128),
            LebesgueIndex::Infinite => Exact::zero(),
        }
    }

    pub fn reciprocal_f64(&self) -> f64 {
        exact_to_f64(self.reciprocal())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            LebesgueIndex::Finite(p) => p.to_f64().unwrap_or(f64::NAN),
            LebesgueIndex::Infinite => f64::INFINITY,
        }
    }

    /// Builds an index from `1/p`; zero maps to infinity.
    pub fn from_reciprocal(inv: Exact) -> Result<Self> {
        if inv.is_zero() {
            return Ok(LebesgueIndex::Infinite);
        }
        if inv < Exact::zero() {
            return Err(LabError::domain("negative reciprocal Lebesgue index"));
        }
        let numer = i64::try_from(*inv.denom())
            .map_err(|_| LabError::domain("Lebesgue index too large"))?;
        let denom = i64::try_from(*inv.numer())
            .map_err(|_| LabError::domain("Lebesgue index too large"))?;
        Ok(LebesgueIndex::Finite(Ratio::new(numer, denom)))
    }

    pub fn require_at_least_two(&self) -> Result<()> {
        if self.reciprocal() > exact(1, 2) || self.reciprocal() < Exact::zero() {
            return Err(LabError::domain(format!("p = {self} is below 2")));
        }
        Ok(())
    }
}

impl PartialOrd for LebesgueIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LebesgueIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        // larger p means smaller 1/p
        other.reciprocal().cmp(&self.reciprocal())
    }
}

impl fmt::Display for LebesgueIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LebesgueIndex::Infinite => write!(f, "inf"),
            LebesgueIndex::Finite(p) if *p.denom() == 1 => write!(f, "{}", p.numer()),
            LebesgueIndex::Finite(p) => write!(f, "{}/{}", p.numer(), p.denom()),
        }
    }
}

impl FromStr for LebesgueIndex {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(
            t.to_ascii_lowercase().as_str(),
            "inf" | "infinity" | "+inf" | "∞"
        ) {
            return Ok(LebesgueIndex::Infinite);
        }
        let bad = || LabError::domain(format!("cannot parse Lebesgue index {s:?}"));
        let value = if let Some((a, b)) = t.split_once('/') {
            let a = parse_decimal(a).ok_or_else(bad)?;
            let b = parse_decimal(b).ok_or_else(bad)?;
            if b.is_zero() {
                return Err(bad());
            }
            a / b
        } else {
            parse_decimal(t).ok_or_else(bad)?
        };
        if value <= Exact::zero() {
            return Err(LabError::domain(format!(
                "Lebesgue index {s:?} must be positive"
            )));
        }
        let numer = i64::try_from(*value.numer()).map_err(|_| bad())?;
        let denom = i64::try_from(*value.denom()).map_err(|_| bad())?;
        Ok(LebesgueIndex::Finite(Ratio::new(numer, denom)))
    }
}

impl Serialize for LebesgueIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LebesgueIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        let text = match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s,
            Raw::Number(x) => format!("{x}"),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}
