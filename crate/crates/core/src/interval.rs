//! Outward-rounded interval arithmetic over arbitrary-precision dyadics.
//!
//! A [`Dyadic`] is `m * 2^e` with a big-integer mantissa. Every inexact
//! operation rounds in a chosen direction to a mantissa of `prec` bits, and
//! [`Interval`] operations round their lower endpoint down and upper endpoint
//! up, so every result encloses the exact real value.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dyadic {
    m: BigInt,
    e: i64,
}

impl Dyadic {
    pub fn zero() -> Dyadic {
        Dyadic { m: BigInt::zero(), e: 0 }
    }

    pub fn from_int(n: i64) -> Dyadic {
        Dyadic { m: BigInt::from(n), e: 0 }
    }

    pub fn from_parts(m: BigInt, e: i64) -> Dyadic {
        Dyadic { m, e }
    }

    /// `2^k`
    pub fn pow2(k: i64) -> Dyadic {
        Dyadic { m: BigInt::one(), e: k }
    }

    /// Exact conversion; panics on non-finite input.
    pub fn from_f64(x: f64) -> Dyadic {
        assert!(x.is_finite(), "non-finite value {x}");
        if x == 0.0 {
            return Dyadic::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        Dyadic { m: BigInt::from(mant) * sign, e }
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn sign(&self) -> Ordering {
        match self.m.sign() {
            Sign::Minus => Ordering::Less,
            Sign::NoSign => Ordering::Equal,
            Sign::Plus => Ordering::Greater,
        }
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic { m: -&self.m, e: self.e }
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { m: self.m.abs(), e: self.e }
    }

    /// Exponent of the leading bit plus one, i.e. `|x| < 2^top`.
    fn top(&self) -> i64 {
        self.e + self.m.bits() as i64
    }

    pub fn mul_pow2(&self, k: i64) -> Dyadic {
        Dyadic { m: self.m.clone(), e: self.e + k }
    }

    pub fn round(&self, prec: u32, dir: Round) -> Dyadic {
        let bits = self.m.bits();
        if bits <= prec as u64 {
            return self.clone();
        }
        let shift = bits - prec as u64;
        let m = match dir {
            Round::Down => &self.m >> shift,
            Round::Up => -((-&self.m) >> shift),
        };
        Dyadic { m, e: self.e + shift as i64 }
    }

    fn add_exact(a: &Dyadic, b: &Dyadic) -> Dyadic {
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        let e = a.e.min(b.e);
        let m = (&a.m << (a.e - e) as u64) + (&b.m << (b.e - e) as u64);
        Dyadic { m, e }
    }

    /// Sum rounded in direction `dir`.
    ///
    /// When one operand is far below the other's rounding unit it is replaced
    /// by a dominating power of two, which keeps the shift bounded.
    pub fn add(&self, o: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        let (big, small) = if self.top() >= o.top() { (self, o) } else { (o, self) };
        if !small.is_zero() && !big.is_zero() && big.top() - small.top() > prec as i64 + 8 {
            let sticky = Dyadic::pow2(big.top() - prec as i64 - 8);
            let adj = match (dir, small.sign()) {
                (Round::Up, Ordering::Greater) => sticky,
                (Round::Down, Ordering::Less) => sticky.neg(),
                _ => Dyadic::zero(),
            };
            return Dyadic::add_exact(big, &adj).round(prec, dir);
        }
        Dyadic::add_exact(self, o).round(prec, dir)
    }

    pub fn sub(&self, o: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        self.add(&o.neg(), prec, dir)
    }

    pub fn mul(&self, o: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        Dyadic { m: &self.m * &o.m, e: self.e + o.e }.round(prec, dir)
    }

    pub fn div(&self, o: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        assert!(!o.is_zero(), "division by zero");
        if self.is_zero() {
            return Dyadic::zero();
        }
        let k = (prec as i64 + 2 + o.m.bits() as i64 - self.m.bits() as i64).max(0);
        let num = &self.m << k as u64;
        let q = match dir {
            Round::Down => num.div_floor(&o.m),
            Round::Up => Integer::div_ceil(&num, &o.m),
        };
        Dyadic { m: q, e: self.e - k - o.e }.round(prec, dir)
    }

    pub fn from_rational(r: &BigRational, prec: u32, dir: Round) -> Dyadic {
        let n = Dyadic { m: r.numer().clone(), e: 0 };
        let d = Dyadic { m: r.denom().clone(), e: 0 };
        n.div(&d, prec, dir)
    }

    pub fn to_rational(&self) -> BigRational {
        if self.e >= 0 {
            BigRational::from_integer(&self.m << self.e as u64)
        } else {
            BigRational::new(self.m.clone(), BigInt::one() << (-self.e) as u64)
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let r = self.round(64, Round::Down);
        let m = r.m.to_f64().unwrap_or(f64::NAN);
        let e = r.e.clamp(-2200, 2200) as i32;
        // Two factors so that neither overflows or flushes to zero early.
        m * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
    }

    /// Exact comparison.
    pub fn cmp_exact(&self, o: &Dyadic) -> Ordering {
        match (self.sign(), o.sign()) {
            (a, b) if a != b => return a.cmp(&b),
            _ => {}
        }
        if self.is_zero() {
            return Ordering::Equal;
        }
        // Same nonzero sign: compare magnitudes by leading bit first.
        let (ta, tb) = (self.top(), o.top());
        let mag = if ta != tb { ta.cmp(&tb) } else { Dyadic::add_exact(&self.abs(), &o.abs().neg()).sign() };
        if self.sign() == Ordering::Greater {
            mag
        } else {
            mag.reverse()
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, o: &Dyadic) -> Option<Ordering> {
        Some(self.cmp_exact(o))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

impl Interval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Interval {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: Dyadic) -> Interval {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn zero() -> Interval {
        Interval::point(Dyadic::zero())
    }

    pub fn one() -> Interval {
        Interval::point(Dyadic::from_int(1))
    }

    pub fn from_int(n: i64) -> Interval {
        Interval::point(Dyadic::from_int(n))
    }

    pub fn from_f64(x: f64) -> Interval {
        Interval::point(Dyadic::from_f64(x))
    }

    pub fn from_f64_pair(lo: f64, hi: f64) -> Interval {
        Interval::new(Dyadic::from_f64(lo), Dyadic::from_f64(hi))
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Interval {
        Interval { lo: Dyadic::from_rational(r, prec, Round::Down), hi: Dyadic::from_rational(r, prec, Round::Up) }
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        let lo = if self.lo <= o.lo { self.lo.clone() } else { o.lo.clone() };
        let hi = if self.hi >= o.hi { self.hi.clone() } else { o.hi.clone() };
        Interval { lo, hi }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: self.hi.neg(), hi: self.lo.neg() }
    }

    pub fn add(&self, o: &Interval, prec: u32) -> Interval {
        Interval { lo: self.lo.add(&o.lo, prec, Round::Down), hi: self.hi.add(&o.hi, prec, Round::Up) }
    }

    pub fn sub(&self, o: &Interval, prec: u32) -> Interval {
        Interval { lo: self.lo.sub(&o.hi, prec, Round::Down), hi: self.hi.sub(&o.lo, prec, Round::Up) }
    }

    pub fn mul(&self, o: &Interval, prec: u32) -> Interval {
        let nonneg = |x: &Interval| x.lo.sign() != Ordering::Less;
        if nonneg(self) && nonneg(o) {
            return Interval { lo: self.lo.mul(&o.lo, prec, Round::Down), hi: self.hi.mul(&o.hi, prec, Round::Up) };
        }
        let cands = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo: Option<Dyadic> = None;
        let mut hi: Option<Dyadic> = None;
        for (a, b) in cands {
            let l = a.mul(b, prec, Round::Down);
            let h = a.mul(b, prec, Round::Up);
            if lo.as_ref().is_none_or(|x| l < *x) {
                lo = Some(l);
            }
            if hi.as_ref().is_none_or(|x| h > *x) {
                hi = Some(h);
            }
        }
        Interval { lo: lo.unwrap(), hi: hi.unwrap() }
    }

    /// Division by an interval that excludes zero.
    pub fn div(&self, o: &Interval, prec: u32) -> Option<Interval> {
        if o.contains_zero() {
            return None;
        }
        let one = Dyadic::from_int(1);
        let inv = Interval { lo: one.div(&o.hi, prec, Round::Down), hi: one.div(&o.lo, prec, Round::Up) };
        // 1/x is decreasing on each side of zero, so the swap above is right
        // whether `o` is positive or negative.
        Some(self.mul(&inv, prec))
    }

    pub fn div_int(&self, k: i64, prec: u32) -> Interval {
        assert!(k > 0);
        let kd = Dyadic::from_int(k);
        Interval { lo: self.lo.div(&kd, prec, Round::Down), hi: self.hi.div(&kd, prec, Round::Up) }
    }

    pub fn mul_pow2(&self, k: i64) -> Interval {
        Interval { lo: self.lo.mul_pow2(k), hi: self.hi.mul_pow2(k) }
    }

    pub fn powi(&self, n: u32, prec: u32) -> Interval {
        if n == 0 {
            return Interval::one();
        }
        if self.lo.sign() != Ordering::Less {
            let mut base = self.clone();
            let mut acc = Interval::one();
            let mut k = n;
            while k > 0 {
                if k & 1 == 1 {
                    acc = acc.mul(&base, prec);
                }
                k >>= 1;
                if k > 0 {
                    base = base.mul(&base, prec);
                }
            }
            return acc;
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.mul(self, prec);
        }
        acc
    }

    pub fn exp(&self, prec: u32) -> Interval {
        Interval { lo: exp_dyadic(&self.lo, prec).lo, hi: exp_dyadic(&self.hi, prec).hi }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo.sign() != Ordering::Greater && self.hi.sign() != Ordering::Less
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        self.contains(&Dyadic::from_f64(x))
    }

    pub fn overlaps(&self, o: &Interval) -> bool {
        self.lo <= o.hi && o.lo <= self.hi
    }

    pub fn subset_of(&self, o: &Interval) -> bool {
        o.lo <= self.lo && self.hi <= o.hi
    }

    /// Strict sign when determined.
    pub fn sign(&self) -> Option<Ordering> {
        if self.lo.sign() == Ordering::Greater {
            Some(Ordering::Greater)
        } else if self.hi.sign() == Ordering::Less {
            Some(Ordering::Less)
        } else if self.lo.is_zero() && self.hi.is_zero() {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    pub fn width(&self) -> Dyadic {
        self.hi.sub(&self.lo, 64, Round::Up)
    }

    pub fn width_f64(&self) -> f64 {
        self.width().to_f64()
    }

    pub fn mid(&self) -> Dyadic {
        Dyadic::add_exact(&self.lo, &self.hi).mul_pow2(-1)
    }

    pub fn mid_f64(&self) -> f64 {
        self.mid().to_f64()
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64()
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64()
    }

    /// Outward rounding of both endpoints to `f64`.
    pub fn to_f64_bounds(&self) -> (f64, f64) {
        let lo = self.lo.round(53, Round::Down).to_f64();
        let hi = self.hi.round(53, Round::Up).to_f64();
        (lo, hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Enclosure of `exp(y)` with a relative width near `2^-prec`.
///
/// Scales the argument below `2^-8`, sums a Taylor polynomial with an explicit
/// remainder bound and squares back up.
pub fn exp_dyadic(y: &Dyadic, prec: u32) -> Interval {
    if y.is_zero() {
        return Interval::one();
    }
    let s = (y.top() + 8).max(0);
    let wp = prec + 24 + s as u32;
    let z = Interval::point(y.mul_pow2(-s));
    let mut sum = Interval::one();
    let mut term = Interval::one();
    // |z| <= 2^-8, so the tail after n terms is at most 2 * 2^(-8(n+1)) / (n+1)!.
    let n_terms = (wp / 8 + 2) as i64;
    for k in 1..=n_terms {
        term = term.mul(&z, wp).div_int(k, wp);
        sum = sum.add(&term, wp);
    }
    let rem = Dyadic::pow2(-8 * (n_terms + 1) + 1);
    sum = Interval { lo: sum.lo.sub(&rem, wp, Round::Down), hi: sum.hi.add(&rem, wp, Round::Up) };
    for _ in 0..s {
        sum = sum.mul(&sum, wp);
    }
    Interval { lo: sum.lo.round(prec, Round::Down), hi: sum.hi.round(prec, Round::Up) }
}

pub fn exp_rational(r: &BigRational, prec: u32) -> Interval {
    Interval::from_rational(r, prec + 16).exp(prec)
}
