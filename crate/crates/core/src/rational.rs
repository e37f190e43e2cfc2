//! Exact rational numbers used for costs, times and fractions.
//!
//! Documents carry decimal numbers (`0.1`, `12.5`) or, for values with no
//! terminating decimal form, strings such as `"1/3"`. Decimals are parsed
//! exactly: `0.1` becomes `1/10`, never the nearest binary float.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

/// Exact rational scalar.
pub type Rat = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRatError(pub String);

impl fmt::Display for ParseRatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot parse `{}` as an exact rational", self.0)
    }
}

impl std::error::Error for ParseRatError {}

pub fn rat(numer: i64, denom: i64) -> Rat {
    Ratio::new(numer, denom)
}

pub fn int(value: i64) -> Rat {
    Ratio::from_integer(value)
}

pub fn to_f64(value: Rat) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"a/b"`, `"-12"`, `"0.125"` or `"1.5e-3"` exactly.
pub fn parse(text: &str) -> Result<Rat, ParseRatError> {
    let err = || ParseRatError(text.to_string());
    let s = text.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| err())?;
        let d: i64 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole
        .chars()
        .chain(frac.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let all: String = whole.chars().chain(frac.chars()).collect();
    let all = all.trim_start_matches('0');
    let mut numer: i128 = if all.is_empty() {
        0
    } else {
        all.parse().map_err(|_| err())?
    };
    let mut scale = frac.len() as i32 - exponent;
    let mut denom: i128 = 1;
    while scale > 0 {
        denom = denom.checked_mul(10).ok_or_else(err)?;
        scale -= 1;
    }
    while scale < 0 {
        numer = numer.checked_mul(10).ok_or_else(err)?;
        scale += 1;
    }
    let g = numer.gcd(&denom).max(1);
    let (numer, denom) = (numer / g, denom / g);
    let numer = i64::try_from(numer).map_err(|_| err())?;
    let denom = i64::try_from(denom).map_err(|_| err())?;
    Ok(Ratio::new(if negative { -numer } else { numer }, denom))
}

/// Exact decimal rendering when the denominator has only factors 2 and 5.
pub fn to_decimal(value: Rat) -> Option<String> {
    let mut denom = *value.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while denom % 2 == 0 {
        denom /= 2;
        twos += 1;
    }
    while denom % 5 == 0 {
        denom /= 5;
        fives += 1;
    }
    if denom != 1 {
        return None;
    }
    let places = twos.max(fives);
    let scale = 10i128.checked_pow(places)?;
    let scaled = (*value.numer() as i128).checked_mul(scale)? / (*value.denom() as i128);
    let negative = scaled < 0;
    let digits = scaled.unsigned_abs().to_string();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if places == 0 {
        out.push_str(&digits);
    } else {
        let places = places as usize;
        let padded = format!("{digits:0>width$}", width = places + 1);
        let (whole, frac) = padded.split_at(padded.len() - places);
        out.push_str(whole);
        out.push('.');
        out.push_str(frac);
    }
    Some(out)
}

/// Converts a float to the rational given by its shortest decimal form.
pub fn from_f64(value: f64) -> Result<Rat, ParseRatError> {
    if !value.is_finite() {
        return Err(ParseRatError(value.to_string()));
    }
    parse(&format!("{value}"))
}

/// Rounds to the nearest multiple of `step` (ties away from zero).
pub fn round_to(value: Rat, step: Rat) -> Rat {
    (value / step).round() * step
}

/// Least common multiple of the denominators of `values`.
pub fn common_denominator<I: IntoIterator<Item = Rat>>(values: I) -> i64 {
    values.into_iter().fold(1i64, |acc, v| acc.lcm(v.denom()))
}

/// Serde adapter: numbers when the value survives a float round trip, `"a/b"` otherwise.
pub mod serde_rat {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rat, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_integer() {
            return serializer.serialize_i64(*value.numer());
        }
        if let Some(dec) = to_decimal(*value) {
            if let Ok(f) = dec.parse::<f64>() {
                if from_f64(f).ok() == Some(*value) {
                    return serializer.serialize_f64(f);
                }
            }
        }
        serializer.serialize_str(&format!("{}/{}", value.numer(), value.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rat, D::Error> {
        deserializer.deserialize_any(RatVisitor)
    }

    struct RatVisitor;

    impl Visitor<'_> for RatVisitor {
        type Value = Rat;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a number or a string such as \"1/3\"")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
            Ok(int(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
            i64::try_from(v).map(int).map_err(E::custom)
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rat, E> {
            from_f64(v).map_err(E::custom)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
            parse(v).map_err(E::custom)
        }
    }
}

pub mod serde_rat_vec {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::Deserialize;

    #[derive(Deserialize)]
    struct Wrapped(#[serde(with = "super::serde_rat")] Rat);

    pub fn serialize<S: Serializer>(values: &[Rat], serializer: S) -> Result<S::Ok, S::Error> {
        struct One<'a>(&'a Rat);
        impl serde::Serialize for One<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::serde_rat::serialize(self.0, s)
            }
        }
        let mut seq = serializer.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&One(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<Rat>, D::Error> {
        let raw = Vec::<Wrapped>::deserialize(deserializer)?;
        Ok(raw.into_iter().map(|w| w.0).collect())
    }
}

pub mod serde_rat_opt {
    use super::*;
    use serde::Deserialize;

    #[derive(Deserialize)]
    struct Wrapped(#[serde(with = "super::serde_rat")] Rat);

    pub fn serialize<S: Serializer>(value: &Option<Rat>, serializer: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => super::serde_rat::serialize(v, serializer),
            None => serializer.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Option<Rat>, D::Error> {
        Ok(Option::<Wrapped>::deserialize(deserializer)?.map(|w| w.0))
    }
}

pub fn is_nonnegative(value: Rat) -> bool {
    value >= Rat::zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse("0.1").unwrap(), rat(1, 10));
        assert_eq!(parse("-2.50").unwrap(), rat(-5, 2));
        assert_eq!(parse("1e-3").unwrap(), rat(1, 1000));
        assert_eq!(parse("3/9").unwrap(), rat(1, 3));
        assert_eq!(parse("42").unwrap(), int(42));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse(".").is_err());
    }

    #[test]
    fn float_round_trip_is_decimal() {
        assert_eq!(from_f64(0.1).unwrap(), rat(1, 10));
        assert_eq!(from_f64(1.0 / 9.0 * 9.0).unwrap(), int(1));
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(to_decimal(rat(1, 8)).as_deref(), Some("0.125"));
        assert_eq!(to_decimal(rat(-7, 4)).as_deref(), Some("-1.75"));
        assert_eq!(to_decimal(rat(1, 3)), None);
    }

    #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
    struct Holder(#[serde(with = "serde_rat")] Rat);

    proptest! {
        #[test]
        fn json_round_trip(n in -1_000_000i64..1_000_000, d in 1i64..5_000) {
            let v = Holder(rat(n, d));
            let text = serde_json::to_string(&v).unwrap();
            let back: Holder = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
