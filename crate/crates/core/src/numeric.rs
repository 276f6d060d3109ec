//! Small numeric helpers shared across modules.

/// `ln Σ exp(x_i)`, stable for large and `-∞` entries. Empty input gives `-∞`.
pub fn logsumexp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = iter.map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// `ln Σ w_i exp(x_i)` over entries with `w_i > 0`.
pub fn weighted_logsumexp(weights: &[f64], exponents: &[f64]) -> f64 {
    logsumexp(
        weights
            .iter()
            .zip(exponents)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, e)| w.ln() + e),
    )
}

/// `r ln(r/m) - r + m`, the generalized Kullback–Leibler integrand.
///
/// Extended-real conventions: `0 ln 0 = 0`; `r > 0, m = 0` gives `+∞`.
pub fn kl_term(r: f64, m: f64) -> f64 {
    if r <= 0.0 {
        m
    } else if m <= 0.0 {
        f64::INFINITY
    } else {
        r * (r / m).ln() - r + m
    }
}

/// Serde adapter for `f64` values that may be `±∞` or NaN.
///
/// JSON has no infinity literal; non-finite values are written as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
pub mod extended_f64 {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct ExtVisitor;

    impl Visitor<'_> for ExtVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                "nan" | "NaN" => Ok(f64::NAN),
                other => Err(E::custom(format!("not an extended real: {other}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtVisitor)
    }
}
