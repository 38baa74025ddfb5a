use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Lebesgue exponent `r` in `[1, inf]`. Infinity is its own case because the
/// closed forms differ from the `r -> inf` limit of the finite expressions
/// only through evaluation, not through value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(r: f64) -> Self {
        if r.is_infinite() && r > 0.0 {
            Exponent::Infinity
        } else {
            Exponent::Finite(r)
        }
    }

    /// `1/r`, zero for infinity.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(r) => 1.0 / r,
            Exponent::Infinity => 0.0,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(r) => r,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_valid(self) -> bool {
        match self {
            Exponent::Finite(r) => r.is_finite() && r >= 1.0,
            Exponent::Infinity => true,
        }
    }

    /// Conjugate exponent `r'` with `1/r + 1/r' = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(r) if r == 1.0 => Exponent::Infinity,
            Exponent::Finite(r) => Exponent::Finite(r / (r - 1.0)),
        }
    }
}

impl From<f64> for Exponent {
    fn from(r: f64) -> Self {
        Exponent::new(r)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(r) => write!(f, "{r}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(r) => s.serialize_f64(*r),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(r) => Ok(Exponent::new(r)),
            Raw::Text(t) if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") => {
                Ok(Exponent::Infinity)
            }
            Raw::Text(t) => t
                .parse::<f64>()
                .map(Exponent::new)
                .map_err(|_| serde::de::Error::custom(format!("invalid exponent '{t}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugates() {
        assert_eq!(Exponent::Finite(2.0).conjugate(), Exponent::Finite(2.0));
        assert_eq!(Exponent::Finite(1.0).conjugate(), Exponent::Infinity);
        assert_eq!(Exponent::Infinity.conjugate(), Exponent::Finite(1.0));
        let q = Exponent::Finite(4.5);
        assert!((q.reciprocal() + q.conjugate().reciprocal() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serde_infinity() {
        let s = serde_json::to_string(&Exponent::Infinity).unwrap();
        assert_eq!(s, "\"inf\"");
        let back: Exponent = serde_json::from_str(&s).unwrap();
        assert_eq!(back, Exponent::Infinity);
        let r: Exponent = serde_json::from_str("1.5").unwrap();
        assert_eq!(r, Exponent::Finite(1.5));
    }
}
