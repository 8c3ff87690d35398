use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DomainError;

/// An exact fraction in `[0, 1]`, kept in lowest terms.
///
/// Thresholds and quorums are compared with integer cross-multiplication so
/// that `ceil(0.30 * 200_000_000)` is exactly `60_000_000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };
    pub const HALF: Fraction = Fraction { num: 1, den: 2 };

    pub fn new(num: u64, den: u64) -> Result<Self, DomainError> {
        if den == 0 {
            return Err(DomainError::InvalidFraction(format!("{num}/0")));
        }
        if num > den {
            return Err(DomainError::InvalidFraction(format!("{num}/{den} exceeds 1")));
        }
        let g = gcd(num, den).max(1);
        Ok(Fraction { num: num / g, den: den / g })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `ceil(self * n)` computed exactly.
    pub fn ceil_mul(&self, n: u64) -> u64 {
        let prod = self.num as u128 * n as u128;
        prod.div_ceil(self.den as u128) as u64
    }

    /// `part / whole >= self`, evaluated without dividing.
    pub fn is_met_by(&self, part: f64, whole: f64) -> bool {
        if whole <= 0.0 {
            return false;
        }
        part * self.den as f64 >= self.num as f64 * whole
    }

    /// `part / whole >= self` for integer counts, exactly.
    pub fn is_met_by_counts(&self, part: u64, whole: u64) -> bool {
        whole > 0 && part as u128 * self.den as u128 >= self.num as u128 * whole as u128
    }

    pub fn exceeds_half(&self) -> bool {
        *self > Fraction::HALF
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Accepts `n/d`, decimal `0.30`, or an integer `0`/`1`.
impl FromStr for Fraction {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomainError::InvalidFraction(s.to_owned());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse::<u64>().map_err(|_| bad())?;
            let d = d.trim().parse::<u64>().map_err(|_| bad())?;
            return Fraction::new(n, d);
        }
        let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > 18 {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
        let frac_val: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = whole
            .checked_mul(den)
            .and_then(|w| w.checked_add(frac_val))
            .ok_or_else(bad)?;
        Fraction::new(num, den)
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FractionVisitor;

        impl Visitor<'_> for FractionVisitor {
            type Value = Fraction;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a fraction in [0, 1] such as \"2/3\", \"0.3\" or 0.3")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Fraction, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Fraction, E> {
                if !v.is_finite() {
                    return Err(E::custom("fraction must be finite"));
                }
                format!("{v}").parse().map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Fraction, E> {
                Fraction::new(v, 1).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Fraction, E> {
                let v = u64::try_from(v).map_err(|_| E::custom("fraction must be non-negative"))?;
                Fraction::new(v, 1).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(FractionVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_ratio() {
        assert_eq!("0.30".parse::<Fraction>().unwrap(), Fraction::new(3, 10).unwrap());
        assert_eq!("2/3".parse::<Fraction>().unwrap().to_string(), "2/3");
        assert_eq!("1".parse::<Fraction>().unwrap(), Fraction::ONE);
        assert_eq!(".5".parse::<Fraction>().unwrap(), Fraction::HALF);
        assert!("1.5".parse::<Fraction>().is_err());
        assert!("-0.1".parse::<Fraction>().is_err());
        assert!("1/0".parse::<Fraction>().is_err());
        assert!("abc".parse::<Fraction>().is_err());
    }

    #[test]
    fn ceil_mul_is_exact() {
        let q: Fraction = "0.30".parse().unwrap();
        assert_eq!(q.ceil_mul(200_000_000), 60_000_000);
        let q: Fraction = "0.011".parse().unwrap();
        assert_eq!(q.ceil_mul(100), 2);
        assert_eq!(Fraction::ZERO.ceil_mul(u64::MAX), 0);
        assert_eq!(Fraction::ONE.ceil_mul(u64::MAX), u64::MAX);
    }

    #[test]
    fn ordering_and_thresholds() {
        let two_thirds: Fraction = "2/3".parse().unwrap();
        let point_67: Fraction = "0.67".parse().unwrap();
        assert!(point_67 > two_thirds);
        assert!(two_thirds.is_met_by_counts(2, 3));
        assert!(!point_67.is_met_by_counts(2, 3));
        assert!(!Fraction::HALF.exceeds_half());
        assert!(!two_thirds.is_met_by_counts(0, 0));
    }

    #[test]
    fn float_input_is_read_as_its_decimal_form() {
        let f: Fraction = serde_json::from_str("0.3").unwrap();
        assert_eq!(f, Fraction::new(3, 10).unwrap());
    }
}
