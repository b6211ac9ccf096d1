//! Exact sums of exponentials `sum c * exp(-a - b*lambda)` with rational
//! `c`, `a`, `b`.
//!
//! Poisson-thinning probabilities are products of such terms, so they stay
//! closed under the ring operations here and can be carried symbolically
//! until a rigorous numeric enclosure is needed.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::interval::{Dyadic, Interval};

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpTerm {
    pub c: BigRational,
    pub a: BigRational,
    pub b: BigRational,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExpSum {
    terms: Vec<ExpTerm>,
}

impl ExpSum {
    pub fn zero() -> ExpSum {
        ExpSum { terms: Vec::new() }
    }

    pub fn constant(c: BigRational) -> ExpSum {
        ExpSum::term(c, BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> ExpSum {
        ExpSum::constant(BigRational::one())
    }

    /// `exp(-a - b*lambda)`
    pub fn exp(a: BigRational, b: BigRational) -> ExpSum {
        ExpSum::term(BigRational::one(), a, b)
    }

    pub fn term(c: BigRational, a: BigRational, b: BigRational) -> ExpSum {
        ExpSum { terms: vec![ExpTerm { c, a, b }] }.normalized()
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    /// Merges terms sharing `(a, b)` and drops zeros; ordering is canonical.
    fn normalized(self) -> ExpSum {
        let mut acc: BTreeMap<(BigRational, BigRational), BigRational> = BTreeMap::new();
        for t in self.terms {
            *acc.entry((t.a, t.b)).or_insert_with(BigRational::zero) += t.c;
        }
        let terms = acc.into_iter().filter(|(_, c)| !c.is_zero()).map(|((a, b), c)| ExpTerm { c, a, b }).collect();
        ExpSum { terms }
    }

    pub fn add(&self, o: &ExpSum) -> ExpSum {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        ExpSum { terms }.normalized()
    }

    pub fn sub(&self, o: &ExpSum) -> ExpSum {
        self.add(&o.scale(&-BigRational::one()))
    }

    pub fn scale(&self, k: &BigRational) -> ExpSum {
        let terms = self.terms.iter().map(|t| ExpTerm { c: &t.c * k, a: t.a.clone(), b: t.b.clone() }).collect();
        ExpSum { terms }.normalized()
    }

    pub fn mul(&self, o: &ExpSum) -> ExpSum {
        let mut terms = Vec::with_capacity(self.terms.len() * o.terms.len());
        for s in &self.terms {
            for t in &o.terms {
                terms.push(ExpTerm { c: &s.c * &t.c, a: &s.a + &t.a, b: &s.b + &t.b });
            }
        }
        ExpSum { terms }.normalized()
    }

    pub fn powi(&self, n: u32) -> ExpSum {
        let mut acc = ExpSum::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// `1 - self`
    pub fn one_minus(&self) -> ExpSum {
        ExpSum::one().sub(self)
    }

    /// Enclosure of the value at `lambda`.
    pub fn eval(&self, lambda: &Interval, prec: u32) -> Interval {
        let wp = prec + 32;
        let mut acc = Interval::zero();
        for t in &self.terms {
            let a = Interval::from_rational(&t.a, wp);
            let b = Interval::from_rational(&t.b, wp);
            let expo = a.add(&b.mul(lambda, wp), wp).neg();
            let v = Interval::from_rational(&t.c, wp).mul(&expo.exp(wp), wp);
            acc = acc.add(&v, wp);
        }
        Interval::new(acc.lo.round(prec, crate::interval::Round::Down), acc.hi.round(prec, crate::interval::Round::Up))
    }

    pub fn eval_f64(&self, lambda: f64) -> f64 {
        self.eval(&Interval::point(Dyadic::from_f64(lambda)), 64).mid_f64()
    }
}

impl fmt::Display for ExpSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> =
            self.terms.iter().map(|t| format!("({})*exp(-({}) - ({})*l)", t.c, t.a, t.b)).collect();
        write!(f, "{}", parts.join(" + "))
    }
}
