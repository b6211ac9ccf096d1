//! Drift parameters on the d-ary tree.
//!
//! A frog at a non-root vertex steps toward the root with probability `p`.
//! Loop-erasing that walk gives the non-backtracking drifts: a freshly
//! activated frog heads rootward with probability `p_star`, and a frog that
//! just stepped rootward keeps going with probability `p_hat`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FrogError, Result};

/// A probability held exactly when it was given as a fraction.
#[derive(Clone, Debug, PartialEq)]
pub enum Prob {
    Exact(BigRational),
    Float(f64),
}

impl Prob {
    pub fn ratio(num: i64, den: i64) -> Prob {
        Prob::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Prob::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Prob::Float(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Prob::Exact(r) => Some(r),
            Prob::Float(_) => None,
        }
    }

    /// Exact rational value; floats convert through their binary expansion.
    pub fn to_rational(&self) -> BigRational {
        match self {
            Prob::Exact(r) => r.clone(),
            Prob::Float(x) => BigRational::from_float(*x).unwrap_or_else(BigRational::zero),
        }
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prob::Exact(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            Prob::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Prob::Float(x) => write!(f, "{x}"),
        }
    }
}

/// Exact values serialize as `"n/d"` strings, floats as numbers.
impl Serialize for Prob {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Prob::Exact(_) => s.serialize_str(&self.to_string()),
            Prob::Float(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Prob {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Prob, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Prob::Float(x)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Parses `"5/17"` as an exact rational and anything else as a float.
impl FromStr for Prob {
    type Err = FrogError;

    fn from_str(s: &str) -> Result<Prob> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| FrogError::Domain(format!("bad numerator in {s:?}")))?;
            let d: BigInt = d.trim().parse().map_err(|_| FrogError::Domain(format!("bad denominator in {s:?}")))?;
            if d.is_zero() {
                return Err(FrogError::Domain(format!("zero denominator in {s:?}")));
            }
            Ok(Prob::Exact(BigRational::new(n, d)))
        } else {
            s.parse::<f64>().map(Prob::Float).map_err(|_| FrogError::Domain(format!("not a probability: {s:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub d: u32,
    pub p: Prob,
    pub p_star: Prob,
    pub p_hat: Prob,
}

impl DriftParams {
    pub fn p(&self) -> f64 {
        self.p.to_f64()
    }
    pub fn p_star(&self) -> f64 {
        self.p_star.to_f64()
    }
    pub fn p_hat(&self) -> f64 {
        self.p_hat.to_f64()
    }
}

fn check_p(p: &Prob) -> Result<()> {
    let ok = match p {
        Prob::Exact(r) => r > &BigRational::zero() && r < &BigRational::new(BigInt::one(), BigInt::from(2)),
        Prob::Float(x) => *x > 0.0 && *x < 0.5,
    };
    if ok {
        Ok(())
    } else {
        Err(FrogError::Domain(format!("p = {p} is not in (0, 1/2)")))
    }
}

pub fn derive_params(d: u32, p: Prob) -> Result<DriftParams> {
    if d < 2 {
        return Err(FrogError::Domain(format!("d = {d} must be at least 2")));
    }
    check_p(&p)?;
    let (p_star, p_hat) = match &p {
        Prob::Exact(r) => {
            let one = BigRational::one();
            let dd = BigRational::from_integer(BigInt::from(d));
            let den = &dd - (&dd + &one) * r;
            if den <= BigRational::zero() {
                return Err(FrogError::Singularity(format!("d - (d+1)p <= 0 at d = {d}")));
            }
            let star = r * (&dd - &one) / den;
            let hat = r / (&one - r);
            (Prob::Exact(star), Prob::Exact(hat))
        }
        Prob::Float(x) => {
            let dd = d as f64;
            let den = dd - (dd + 1.0) * x;
            if den <= 0.0 {
                return Err(FrogError::Singularity(format!("d - (d+1)p <= 0 at d = {d}")));
            }
            (Prob::Float(x * (dd - 1.0) / den), Prob::Float(x / (1.0 - x)))
        }
    };
    Ok(DriftParams { d, p, p_star, p_hat })
}

/// Limit of `p_star` as `d` grows, which is `p_hat`.
pub fn p_star_limit(p: &Prob) -> Result<Prob> {
    check_p(p)?;
    Ok(match p {
        Prob::Exact(r) => Prob::Exact(r / (BigRational::one() - r)),
        Prob::Float(x) => Prob::Float(x / (1.0 - x)),
    })
}

/// Reference values that recur across the toolkit.
#[derive(Clone, Debug, Serialize)]
pub struct Constants {
    /// Critical drift of the branching random walk, `(2 - sqrt 2) / 4`.
    pub q_star: f64,
    pub one_sixth: Prob,
    pub five_seventeenths: Prob,
    pub twentyseven_hundredths: Prob,
}

impl Constants {
    pub fn new() -> Constants {
        Constants {
            q_star: (2.0 - std::f64::consts::SQRT_2) / 4.0,
            one_sixth: Prob::ratio(1, 6),
            five_seventeenths: Prob::ratio(5, 17),
            twentyseven_hundredths: Prob::ratio(27, 100),
        }
    }
}

impl Default for Constants {
    fn default() -> Self {
        Constants::new()
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn prob_serde_roundtrip() {
        for p in [Prob::ratio(5, 17), Prob::Float(0.2725)] {
            let j = serde_json::to_string(&p).unwrap();
            assert_eq!(serde_json::from_str::<Prob>(&j).unwrap(), p);
        }
        assert_eq!(serde_json::to_string(&Prob::ratio(5, 17)).unwrap(), "\"5/17\"");
    }

    use super::*;

    fn q(n: i64, d: i64) -> Prob {
        Prob::ratio(n, d)
    }

    #[test]
    fn exact_examples() {
        let a = derive_params(3, q(5, 17)).unwrap();
        assert_eq!(a.p_star, q(10, 31));
        assert_eq!(a.p_hat, q(5, 12));
        let b = derive_params(4, q(27, 100)).unwrap();
        assert_eq!(b.p_star, q(81, 265));
        assert_eq!(b.p_hat, q(27, 73));
        let c = derive_params(2, q(1, 3)).unwrap();
        assert_eq!(c.p_star, q(1, 3));
        assert_eq!(c.p_hat, q(1, 2));
    }

    #[test]
    fn limit_examples() {
        assert_eq!(p_star_limit(&q(1, 6)).unwrap(), q(1, 5));
        assert_eq!(p_star_limit(&q(1, 4)).unwrap(), q(1, 3));
        assert_eq!(p_star_limit(&q(5, 17)).unwrap(), q(5, 12));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(derive_params(1, q(1, 4)), Err(FrogError::Domain(_))));
        assert!(matches!(derive_params(3, q(1, 2)), Err(FrogError::Domain(_))));
        assert!(matches!(derive_params(3, Prob::Float(0.0)), Err(FrogError::Domain(_))));
        assert!(p_star_limit(&Prob::Float(0.7)).is_err());
    }

    #[test]
    fn parse_forms() {
        assert_eq!("5/17".parse::<Prob>().unwrap(), q(5, 17));
        assert_eq!("0.25".parse::<Prob>().unwrap(), Prob::Float(0.25));
        assert!("1/0".parse::<Prob>().is_err());
        assert_eq!(q(10, 31).to_string(), "10/31");
    }

    #[test]
    fn q_star_value() {
        let c = Constants::new();
        assert!((c.q_star - 0.146_446_609_406_726_24).abs() < 1e-15);
    }
}
