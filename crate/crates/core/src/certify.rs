//! Rigorous checks of the recurrence inequality `f(lambda) < 1`.
//!
//! `f` is a finite sum of exponentials in `lambda`. Substituting
//! `x = exp(-lambda / N)` turns it into a polynomial `g` on `[0, 1]` whose
//! coefficients are sums `c * exp(-r)` with rational `c`, `r`. Those are kept
//! symbolic and only materialised as outward-rounded intervals, which is
//! enough to run a Sturm count and an interval branch-and-bound for the
//! global maximum.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::expsum::{rat, ExpSum};
use crate::interval::{exp_rational, Dyadic, Interval, Round};
use crate::params::Prob;
use crate::star::{law_u_prime, law_u_tilde};

/// Default starting precision for all certificates, in bits.
pub const START_PREC: u32 = 128;
/// Precision cap for retries.
pub const MAX_PREC: u32 = 1 << 15;
/// Branch-and-bound boxes narrower than this are not split further.
pub const BOX_WIDTH_LOG2: i64 = -40;
/// Grid on which the certified epsilon is reported.
pub const EPSILON_GRID: i64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Three-leaf certificate at `(d, p) = (3, 5/17)`.
    G,
    /// Four-leaf certificate at `(d, p) = (4, 27/100)`.
    Gtilde,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::G => "g",
            Variant::Gtilde => "gtilde",
        }
    }

    /// Change-of-variables denominator `N` in `x = exp(-lambda / N)`.
    pub fn denominator(&self) -> i64 {
        match self {
            Variant::G => 24,
            Variant::Gtilde => 219,
        }
    }

    /// `f(lambda) = sum_u exp(-p_tilde) exp((1 - w (1+u)) lambda) P(U = u)`
    /// with `w = p_hat`.
    pub fn f(&self) -> ExpSum {
        let (law, p_tilde, w) = match self {
            Variant::G => (law_u_prime(), rat(10, 31), rat(5, 12)),
            Variant::Gtilde => (law_u_tilde(), rat(81, 265), rat(27, 73)),
        };
        let mut f = ExpSum::zero();
        for (u, pu) in law.iter().enumerate() {
            let rate = &w * BigRational::from_integer(BigInt::from(u as i64 + 1)) - BigRational::one();
            f = f.add(&ExpSum::exp(p_tilde.clone(), rate).mul(pu));
        }
        f
    }

    pub fn g(&self) -> ExpPoly {
        ExpPoly::from_expsum(&self.f(), self.denominator()).expect("integral exponents by construction")
    }
}

impl std::str::FromStr for Variant {
    type Err = FrogError;
    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "g" => Ok(Variant::G),
            "gtilde" | "g_tilde" | "gt" => Ok(Variant::Gtilde),
            _ => Err(FrogError::Domain(format!("unknown variant {s:?}"))),
        }
    }
}

/// One coefficient: `sum c * exp(-r)`, keyed by `r`.
pub type SymCoeff = BTreeMap<BigRational, BigRational>;

/// Sparse polynomial with symbolic exponential coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpPoly {
    pub terms: BTreeMap<u32, SymCoeff>,
}

impl ExpPoly {
    pub fn from_terms(terms: &[(u32, BigRational, BigRational)]) -> ExpPoly {
        let mut p = ExpPoly::default();
        for (k, c, r) in terms {
            p.push(*k, c.clone(), r.clone());
        }
        p
    }

    fn push(&mut self, k: u32, c: BigRational, r: BigRational) {
        let coeff = self.terms.entry(k).or_default();
        *coeff.entry(r.clone()).or_insert_with(BigRational::zero) += c;
        if coeff[&r].is_zero() {
            coeff.remove(&r);
        }
        if coeff.is_empty() {
            self.terms.remove(&k);
        }
    }

    /// `g(x) = F(-N ln x)`; every lambda-rate times `N` must be a
    /// nonnegative integer.
    pub fn from_expsum(f: &ExpSum, n: i64) -> Result<ExpPoly> {
        let nn = BigRational::from_integer(BigInt::from(n));
        let mut p = ExpPoly::default();
        for t in f.terms() {
            let k = &t.b * &nn;
            if !k.is_integer() || k.is_negative() {
                return Err(FrogError::Domain(format!("rate {} does not map to a monomial", t.b)));
            }
            let k = k.to_integer().to_u32().ok_or_else(|| FrogError::Domain("exponent too large".into()))?;
            p.push(k, t.c.clone(), t.a.clone());
        }
        Ok(p)
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().copied()
    }

    /// Lowest exponent with a nonzero coefficient.
    ///
    /// A coefficient is a combination of `exp(-r)` over distinct rationals
    /// `r` with nonzero rational weights, which never vanishes, so this is
    /// exact.
    pub fn valuation(&self) -> Option<u32> {
        self.terms.keys().next().copied()
    }

    pub fn derivative(&self) -> ExpPoly {
        let mut d = ExpPoly::default();
        for (k, coeff) in &self.terms {
            if *k == 0 {
                continue;
            }
            let kk = BigRational::from_integer(BigInt::from(*k));
            for (r, c) in coeff {
                d.push(k - 1, c * &kk, r.clone());
            }
        }
        d
    }

    pub fn materialize(&self, prec: u32) -> SparsePoly {
        let mut cache: HashMap<BigRational, Interval> = HashMap::new();
        let wp = prec + 16;
        let mut terms = Vec::with_capacity(self.terms.len());
        for (k, coeff) in &self.terms {
            let mut acc = Interval::zero();
            for (r, c) in coeff {
                let e = cache.entry(r.clone()).or_insert_with(|| exp_rational(&-r, wp)).clone();
                acc = acc.add(&Interval::from_rational(c, wp).mul(&e, wp), wp);
            }
            terms.push((*k, acc));
        }
        SparsePoly { terms, prec }
    }

    pub fn eval(&self, x: &Interval, prec: u32) -> Interval {
        self.materialize(prec).eval(x)
    }
}

/// Polynomial with interval coefficients, sparse in the exponent.
#[derive(Clone, Debug)]
pub struct SparsePoly {
    pub terms: Vec<(u32, Interval)>,
    pub prec: u32,
}

impl SparsePoly {
    pub fn eval(&self, x: &Interval) -> Interval {
        let p = self.prec;
        let mut acc = Interval::zero();
        for (k, c) in &self.terms {
            acc = acc.add(&c.mul(&x.powi(*k, p), p), p);
        }
        acc
    }

    fn dense(&self, shift: u32) -> Vec<Interval> {
        let deg = self.terms.last().map(|t| t.0).unwrap_or(0) - shift;
        let mut v = vec![Interval::zero(); deg as usize + 1];
        for (k, c) in &self.terms {
            v[(k - shift) as usize] = c.clone();
        }
        v
    }
}

/// Sturm chain of a dense interval polynomial, each entry scaled by a power
/// of two so that its leading coefficient is of order one.
struct SturmChain {
    polys: Vec<Vec<Interval>>,
    prec: u32,
}

fn strip_leading(mut p: Vec<Interval>) -> std::result::Result<Vec<Interval>, ()> {
    // The exact leading coefficient must be certified nonzero; a trailing
    // coefficient that straddles zero makes the degree unknown.
    while let Some(last) = p.last() {
        match last.sign() {
            Some(Ordering::Equal) => {
                p.pop();
            }
            Some(_) => return Ok(p),
            None => return Err(()),
        }
    }
    Ok(p)
}

fn normalize(p: Vec<Interval>) -> Vec<Interval> {
    let lead = p.last().unwrap();
    let mag = if lead.lo.sign() == Ordering::Greater { lead.lo.clone() } else { lead.hi.neg() };
    let f = mag.to_f64();
    let k = if f > 0.0 && f.is_finite() { -(f.log2().floor() as i64) } else { 0 };
    p.into_iter().map(|c| c.mul_pow2(k)).collect()
}

fn poly_rem(a: &[Interval], b: &[Interval], prec: u32) -> Vec<Interval> {
    let mut r: Vec<Interval> = a.to_vec();
    let db = b.len() - 1;
    let lead = &b[db];
    while r.len() > db {
        let top = r.len() - 1;
        let q = r[top].div(lead, prec).expect("certified nonzero leading coefficient");
        let s = top - db;
        for i in 0..db {
            r[s + i] = r[s + i].sub(&q.mul(&b[i], prec), prec);
        }
        r.pop();
    }
    r
}

impl SturmChain {
    fn build(p: Vec<Interval>, prec: u32) -> std::result::Result<SturmChain, ()> {
        let p0 = strip_leading(p)?;
        if p0.is_empty() {
            return Err(());
        }
        let mut polys = vec![normalize(p0)];
        if polys[0].len() > 1 {
            let d: Vec<Interval> =
                (1..polys[0].len()).map(|k| polys[0][k].mul(&Interval::from_int(k as i64), prec)).collect();
            polys.push(normalize(strip_leading(d)?));
        }
        while polys.last().unwrap().len() > 1 {
            let n = polys.len();
            let rem = poly_rem(&polys[n - 2], &polys[n - 1], prec);
            let rem: Vec<Interval> = rem.into_iter().map(|c| c.neg()).collect();
            let rem = strip_leading(rem)?;
            if rem.is_empty() {
                // A certified zero remainder would mean a repeated root; with
                // interval data that cannot be decided, so treat it as failure.
                return Err(());
            }
            polys.push(normalize(rem));
        }
        Ok(SturmChain { polys, prec })
    }

    /// Sign changes along the chain at `x`, or `None` if a sign is unknown.
    fn variations(&self, x: &Interval) -> Option<usize> {
        let mut signs = Vec::with_capacity(self.polys.len());
        for (i, p) in self.polys.iter().enumerate() {
            let mut acc = Interval::zero();
            for c in p.iter().rev() {
                acc = acc.mul(x, self.prec).add(c, self.prec);
            }
            // Zeros of later chain members do not change the count.
            match acc.sign()? {
                Ordering::Equal if i == 0 => return None,
                Ordering::Equal => {}
                s => signs.push(s),
            }
        }
        Some(signs.windows(2).filter(|w| w[0] != w[1]).count())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootMethod {
    Sturm,
    /// Descartes sign rule on Bernstein coefficients with bisection.
    Descartes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootCount {
    /// Roots in `[a, b]` counted with multiplicity at `x = 0` and simply
    /// elsewhere; the part away from zero is certified squarefree.
    pub count: u32,
    pub multiplicity_at_zero: u32,
    pub interior: u32,
    pub precision_bits: u32,
    pub method: RootMethod,
}

/// Interval Sturm chains lose about a constant number of bits per division
/// step; past this precision the Bernstein isolation is cheaper.
pub const STURM_MAX_PREC: u32 = 2048;
/// Deepest bisection level before isolation gives up at a precision.
const ISOLATION_DEPTH: u32 = 64;

/// Roots of `poly` in `[a, b]` with `0 <= a < b`.
///
/// The exact factor `x^k` is removed first. The rest is handled by an
/// interval Sturm chain, which must end in a constant of known sign, and if
/// that stays undecided by isolating intervals from the Descartes rule in the
/// Bernstein basis, each holding exactly one simple root. Either way the part
/// away from zero is certified squarefree. Precision doubles from
/// `start_prec` until every sign is decided.
pub fn sturm_count_in(poly: &ExpPoly, a: f64, b: f64, start_prec: u32) -> Result<RootCount> {
    if !(0.0 <= a && a < b) {
        return Err(FrogError::Domain(format!("bad interval [{a}, {b}]")));
    }
    let k = poly.valuation().ok_or_else(|| FrogError::Domain("zero polynomial".into()))?;
    let at_zero = if a == 0.0 { k } else { 0 };
    let mut prec = start_prec;
    while prec <= STURM_MAX_PREC {
        let sp = poly.materialize(prec);
        if let Ok(chain) = SturmChain::build(sp.dense(k), prec) {
            let va = chain.variations(&Interval::from_f64(a));
            let vb = chain.variations(&Interval::from_f64(b));
            if let (Some(va), Some(vb)) = (va, vb) {
                let interior = (va - vb) as u32;
                return Ok(RootCount {
                    count: at_zero + interior,
                    multiplicity_at_zero: at_zero,
                    interior,
                    precision_bits: prec,
                    method: RootMethod::Sturm,
                });
            }
        }
        prec *= 2;
    }
    let mut prec = start_prec;
    while prec <= MAX_PREC {
        let sp = poly.materialize(prec);
        if let Some(boxes) = isolate_roots(&sp.dense(k), a, b, prec) {
            let interior = boxes.len() as u32;
            return Ok(RootCount {
                count: at_zero + interior,
                multiplicity_at_zero: at_zero,
                interior,
                precision_bits: prec,
                method: RootMethod::Descartes,
            });
        }
        prec *= 2;
    }
    Err(FrogError::Precision(format!("root signs undecided at {MAX_PREC} bits")))
}

/// Sign variations of a coefficient list, `None` if any sign is unknown or zero.
fn strict_variations(c: &[Interval]) -> Option<usize> {
    let mut prev = None;
    let mut n = 0;
    for x in c {
        let s = match x.sign()? {
            Ordering::Equal => return None,
            s => s,
        };
        if prev.is_some_and(|p| p != s) {
            n += 1;
        }
        prev = Some(s);
    }
    Some(n)
}

/// de Casteljau split of Bernstein coefficients at `t`.
fn de_casteljau(c: &[Interval], t: &Interval, prec: u32) -> (Vec<Interval>, Vec<Interval>) {
    let n = c.len();
    let s = Interval::one().sub(t, prec);
    let mut row = c.to_vec();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    left.push(row[0].clone());
    right.push(row[n - 1].clone());
    for len in (1..n).rev() {
        for i in 0..len {
            row[i] = row[i].mul(&s, prec).add(&row[i + 1].mul(t, prec), prec);
        }
        left.push(row[0].clone());
        right.push(row[len - 1].clone());
    }
    right.reverse();
    (left, right)
}

/// Bernstein coefficients on `[a, b]` of a dense power-basis polynomial.
fn to_bernstein(p: &[Interval], a: f64, b: f64, prec: u32) -> Vec<Interval> {
    let n = p.len() - 1;
    // Taylor shift to `a`, then scale by `b - a`; both are exact dyadics.
    let mut q = p.to_vec();
    let ai = Interval::from_f64(a);
    if a != 0.0 {
        for i in 0..n {
            for j in (i..n).rev() {
                q[j] = q[j].add(&q[j + 1].mul(&ai, prec), prec);
            }
        }
    }
    let w = Interval::from_f64(b).sub(&ai, prec);
    let mut wk = Interval::one();
    for c in q.iter_mut() {
        *c = c.mul(&wk, prec);
        wk = wk.mul(&w, prec);
    }
    // b_j = sum_{i <= j} C(j, i) / C(n, i) q_i
    let mut out = vec![Interval::zero(); n + 1];
    for (i, qi) in q.iter().enumerate() {
        if qi.sign() == Some(Ordering::Equal) {
            continue;
        }
        let mut ratio = BigRational::one() / binomial(n, i);
        for (j, o) in out.iter_mut().enumerate().skip(i) {
            if j > i {
                ratio = ratio * BigRational::new(BigInt::from(j), BigInt::from(j - i));
            }
            *o = o.add(&Interval::from_rational(&ratio, prec).mul(qi, prec), prec);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> BigRational {
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    BigRational::from_integer(c)
}

/// Isolating intervals for the roots of `p` in `(a, b]`, or `None` if some
/// sign stays undecided at this precision.
fn isolate_roots(p: &[Interval], a: f64, b: f64, prec: u32) -> Option<Vec<(f64, f64)>> {
    if p.len() == 1 {
        return match p[0].sign()? {
            Ordering::Equal => None,
            _ => Some(Vec::new()),
        };
    }
    let bern = to_bernstein(p, a, b, prec);
    let mut out = Vec::new();
    let mut stack = vec![(bern, a, b, 0u32)];
    let fractions = [(1, 1), (7, 3), (9, 3), (3, 2), (5, 2), (15, 4), (17, 4)];
    while let Some((c, lo, hi, depth)) = stack.pop() {
        match strict_variations(&c) {
            Some(0) => continue,
            Some(1) => {
                out.push((lo, hi));
                continue;
            }
            _ => {}
        }
        if depth >= ISOLATION_DEPTH {
            return None;
        }
        // Split at a point where the value has a certified sign.
        let mut split = None;
        for (num, sh) in fractions {
            let t = Interval::point(Dyadic::from_parts(BigInt::from(num), -(sh + 1) as i64));
            let (l, r) = de_casteljau(&c, &t, prec);
            if matches!(l.last().unwrap().sign(), Some(Ordering::Less | Ordering::Greater)) {
                let tf = num as f64 / (1u64 << (sh + 1)) as f64;
                split = Some((l, r, lo + (hi - lo) * tf));
                break;
            }
        }
        let (l, r, m) = split?;
        stack.push((l, lo, m, depth + 1));
        stack.push((r, m, hi, depth + 1));
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    Some(out)
}

pub fn sturm_count(poly: &ExpPoly) -> Result<RootCount> {
    sturm_count_in(poly, 0.0, 1.0, START_PREC)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBound {
    pub root_count: u32,
    pub max_location: (f64, f64),
    pub max_value: (f64, f64),
    /// `epsilon_num / 10^6`
    pub epsilon_num: i64,
    pub epsilon_certified: f64,
    pub precision_bits: u32,
    pub certified: bool,
}

impl CertifiedBound {
    pub fn epsilon_rational(&self) -> BigRational {
        rat(self.epsilon_num, EPSILON_GRID)
    }
}

/// Largest `k / 10^6` with `upper < exp(-k / 10^6)`, checked rigorously.
fn certify_epsilon(upper: &Dyadic, prec: u32) -> i64 {
    let u = upper.to_f64();
    if !(u > 0.0) || u >= 1.0 {
        return 0;
    }
    let mut k = ((-u.ln()) * EPSILON_GRID as f64).floor() as i64 + 1;
    while k > 0 {
        let e = exp_rational(&rat(-k, EPSILON_GRID), prec);
        if *upper < e.lo {
            return k;
        }
        k -= 1;
    }
    0
}

struct BoxItem {
    ub: Dyadic,
    lo: Dyadic,
    hi: Dyadic,
}

impl PartialEq for BoxItem {
    fn eq(&self, o: &Self) -> bool {
        self.ub.cmp_exact(&o.ub) == Ordering::Equal
    }
}
impl Eq for BoxItem {}
impl PartialOrd for BoxItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for BoxItem {
    fn cmp(&self, o: &Self) -> Ordering {
        self.ub.cmp_exact(&o.ub).then_with(|| o.lo.cmp_exact(&self.lo))
    }
}

/// Rigorous global maximum of `poly` on `[0, 1]`.
pub fn certified_max(poly: &ExpPoly) -> Result<CertifiedBound> {
    certified_max_at(poly, START_PREC)
}

pub fn certified_max_at(poly: &ExpPoly, prec: u32) -> Result<CertifiedBound> {
    let g = poly.materialize(prec);
    let dpoly = poly.derivative();
    if dpoly.terms.is_empty() {
        // Constant polynomial.
        let c = g.eval(&Interval::one());
        let eps = certify_epsilon(&c.hi, prec);
        let (lo, hi) = c.to_f64_bounds();
        return Ok(CertifiedBound {
            root_count: 0,
            max_location: (0.0, 1.0),
            max_value: (lo, hi),
            epsilon_num: eps,
            epsilon_certified: eps as f64 / EPSILON_GRID as f64,
            precision_bits: prec,
            certified: eps > 0,
        });
    }
    let roots = sturm_count(&dpoly)?;
    let gd = dpoly.materialize(prec);
    let point = |x: &Dyadic| g.eval(&Interval::point(x.clone()));
    let upper = |lo: &Dyadic, hi: &Dyadic| -> Dyadic {
        let xb = Interval::new(lo.clone(), hi.clone());
        let dv = gd.eval(&xb);
        match dv.sign() {
            Some(Ordering::Greater) => point(hi).hi,
            Some(Ordering::Less) => point(lo).hi,
            _ => {
                let m = xb.mid();
                let mv = point(&m).add(&dv.mul(&xb.sub(&Interval::point(m), prec), prec), prec);
                let naive = g.eval(&xb);
                if mv.hi < naive.hi {
                    mv.hi
                } else {
                    naive.hi
                }
            }
        }
    };
    let zero = Dyadic::zero();
    let one = Dyadic::from_int(1);
    let mut best_lo = point(&zero).lo;
    for x in [&one] {
        let v = point(x).lo;
        if v > best_lo {
            best_lo = v;
        }
    }
    let mut heap = BinaryHeap::new();
    heap.push(BoxItem { ub: upper(&zero, &one), lo: zero.clone(), hi: one.clone() });
    let min_width = Dyadic::pow2(BOX_WIDTH_LOG2);
    let mut finals: Vec<BoxItem> = Vec::new();
    while let Some(b) = heap.pop() {
        if b.ub < best_lo {
            break;
        }
        let width = b.hi.sub(&b.lo, prec, Round::Up);
        if width <= min_width {
            finals.push(b);
            continue;
        }
        let m = Interval::new(b.lo.clone(), b.hi.clone()).mid();
        let vm = point(&m).lo;
        if vm > best_lo {
            best_lo = vm;
        }
        for (lo, hi) in [(b.lo.clone(), m.clone()), (m.clone(), b.hi.clone())] {
            let ub = upper(&lo, &hi);
            if ub >= best_lo {
                heap.push(BoxItem { ub, lo, hi });
            }
        }
    }
    finals.retain(|b| b.ub >= best_lo);
    if finals.is_empty() {
        return Err(FrogError::Precision("branch-and-bound lost every box".into()));
    }
    let mut max_hi = finals[0].ub.clone();
    let mut loc_lo = finals[0].lo.clone();
    let mut loc_hi = finals[0].hi.clone();
    for b in &finals[1..] {
        if b.ub > max_hi {
            max_hi = b.ub.clone();
        }
        if b.lo < loc_lo {
            loc_lo = b.lo.clone();
        }
        if b.hi > loc_hi {
            loc_hi = b.hi.clone();
        }
    }
    // An interior maximiser must sit on a critical point.
    if loc_lo > zero && loc_hi < one {
        let pad = Dyadic::pow2(BOX_WIDTH_LOG2 + 8);
        let l = loc_lo.sub(&pad, prec, Round::Down);
        let r = loc_hi.add(&pad, prec, Round::Up);
        let dl = gd.eval(&Interval::point(l)).sign();
        let dr = gd.eval(&Interval::point(r)).sign();
        if roots.interior == 0 || dl != Some(Ordering::Greater) || dr != Some(Ordering::Less) {
            return Err(FrogError::Precision("argmax enclosure holds no critical point".into()));
        }
    }
    let eps = certify_epsilon(&max_hi, prec);
    let maxv = Interval::new(best_lo, max_hi);
    let loc = Interval::new(loc_lo, loc_hi);
    Ok(CertifiedBound {
        root_count: roots.count,
        max_location: loc.to_f64_bounds(),
        max_value: maxv.to_f64_bounds(),
        epsilon_num: eps,
        epsilon_certified: eps as f64 / EPSILON_GRID as f64,
        precision_bits: roots.precision_bits.max(prec),
        certified: eps > 0,
    })
}

/// Enclosure of `f(lambda)` for the given certificate.
pub fn eval_f(lambda: f64, variant: Variant) -> Result<Interval> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(FrogError::Domain(format!("lambda = {lambda} must be finite and >= 0")));
    }
    Ok(variant.f().eval(&Interval::from_f64(lambda), START_PREC))
}

/// Enclosure of `g(exp(-lambda / N))`.
pub fn eval_g_at_lambda(lambda: f64, variant: Variant) -> Interval {
    let n = variant.denominator();
    let x = Interval::from_f64(lambda).div_int(n, START_PREC + 32).neg().exp(START_PREC + 32);
    variant.g().eval(&x, START_PREC)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub p: f64,
    pub p_hat: f64,
    pub delta: f64,
    pub lambda0: f64,
    pub d0: u32,
    /// Certified enclosure of `exp(1/56) - (1 + 4 exp(-delta l0) + exp(-l0/5))`.
    pub margin: (f64, f64),
    pub grid_points: usize,
    /// Smallest certified gap `exp(-1/8) - exp(lambda) * bound(lambda)` on the grid.
    pub min_grid_slack: f64,
}

/// Step of the lambda grid searched for `lambda0`.
pub const LAMBDA0_STEP: i64 = 16;

/// Finds `(delta, d0, lambda0)` for the single-leaf exploration bound.
///
/// Uses `delta = p_hat / 2`. Then `1 - 2 p_hat - (1 - p_hat)(d-5)/(d-1) <= -delta`
/// is equivalent to `d >= (5A - B)/(A - B)` with `A = 1 - p_hat` and
/// `B = 1 - 3 p_hat / 2`. `lambda0` is the least multiple of `1/16` with
/// `1 + 4 exp(-delta l0) + exp(-l0/5) <= exp(1/56)`.
pub fn certify_tail_bound(p: &Prob) -> Result<TailBoundReport> {
    let pr = p.to_rational();
    let one = BigRational::one();
    let half = rat(1, 2);
    if pr <= BigRational::zero() || pr >= half {
        return Err(FrogError::Domain(format!("p = {p} is not in (0, 1/2)")));
    }
    if pr <= rat(1, 6) {
        return Err(FrogError::Regime(format!("p = {p} <= 1/6: the bound needs p > 1/6")));
    }
    let prec = START_PREC;
    let p_hat = &pr / (&one - &pr);
    let delta = &p_hat / rat(2, 1);
    let a = &one - &p_hat;
    let b = &one - &p_hat * rat(3, 2);
    let d_min = ((&a * rat(5, 1) - &b) / (&a - &b)).ceil().to_integer();
    let d0 = d_min.max(BigInt::from(6)).to_u32().ok_or_else(|| FrogError::Domain("d0 overflow".into()))?;
    let dd = BigRational::from_integer(BigInt::from(d0));
    let slope = &one - &p_hat * rat(2, 1) - &a * (&dd - rat(5, 1)) / (&dd - &one);
    debug_assert!(slope <= -delta.clone());

    let rhs = exp_rational(&rat(1, 56), prec);
    let lhs_at = |l: &BigRational| -> Interval {
        let t1 = exp_rational(&-(&delta * l), prec).mul(&Interval::from_int(4), prec);
        let t2 = exp_rational(&-(l / rat(5, 1)), prec);
        Interval::one().add(&t1, prec).add(&t2, prec)
    };
    // Scan upward; the left side decreases in lambda0.
    let df = delta.to_f64().unwrap();
    let guess = (((4.0 / (std::f64::consts::E.powf(1.0 / 56.0) - 1.0)).ln() / df).max(0.0) * 0.5).floor();
    let mut k = (guess * LAMBDA0_STEP as f64) as i64;
    let ok = |k: i64| lhs_at(&rat(k, LAMBDA0_STEP)).hi < rhs.lo;
    while k > 0 && ok(k - 1) {
        k -= 1;
    }
    while !ok(k) {
        k += 1;
        if k > 1_000_000 {
            return Err(FrogError::Precision("no lambda0 found".into()));
        }
    }
    let lambda0 = rat(k, LAMBDA0_STEP);
    let margin = rhs.sub(&lhs_at(&lambda0), prec);

    // Check the bound itself on a geometric grid above lambda0. Every term
    // decreases in lambda, so the grid plus monotonicity covers [lambda0, inf).
    let target = exp_rational(&rat(-1, 8), prec);
    let e17 = exp_rational(&rat(-1, 7), prec);
    let c6 = &one - &p_hat * rat(6, 1);
    let mut min_slack = f64::INFINITY;
    let mut grid_points = 0;
    let mut l = lambda0.clone();
    let top = &lambda0 * rat(1000, 1);
    let step = rat(105, 100);
    while l <= top {
        let li = Interval::from_rational(&l, prec);
        let t2 = Interval::from_rational(&slope, prec).mul(&li, prec).exp(prec).mul(&Interval::from_int(4), prec);
        let t3 = Interval::from_rational(&c6, prec).mul(&li, prec).exp(prec);
        let bound = e17.mul(&Interval::one().add(&t2, prec).add(&t3, prec), prec);
        let slack = target.sub(&bound, prec);
        if slack.lo.sign() != Ordering::Greater {
            return Err(FrogError::Precision(format!("bound fails at lambda = {l}")));
        }
        min_slack = min_slack.min(slack.lo.to_f64());
        grid_points += 1;
        // Round the grid point to a short rational to keep sizes bounded.
        let next = &l * &step;
        l = BigRational::new((next.numer() * BigInt::from(1 << 20)).div_floor(next.denom()), BigInt::from(1 << 20));
        if lambda0.is_zero() {
            break;
        }
    }
    Ok(TailBoundReport {
        p: p.to_f64(),
        p_hat: p_hat.to_f64().unwrap(),
        delta: df,
        lambda0: lambda0.to_f64().unwrap(),
        d0,
        margin: margin.to_f64_bounds(),
        grid_points,
        min_grid_slack: min_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        rat(n, d)
    }

    /// The printed form of `g`, term by term.
    fn g_printed() -> ExpPoly {
        let a = r(397, 558);
        let b = r(577, 1116);
        ExpPoly::from_terms(&[
            (27, r(2, 1), a.clone()),
            (20, r(-1, 1), a.clone()),
            (20, r(-2, 1), b.clone()),
            (17, r(-2, 1), a.clone()),
            (10, r(2, 1), b.clone()),
            (6, r(1, 1), r(10, 31)),
            (0, r(1, 1), a.clone()),
        ])
    }

    #[test]
    fn g_matches_printed_polynomial() {
        assert_eq!(Variant::G.g(), g_printed());
    }

    #[test]
    fn g_derivative_matches_printed() {
        let a = r(397, 558);
        let b = r(577, 1116);
        let want = ExpPoly::from_terms(&[
            (26, r(54, 1), a.clone()),
            (19, r(-20, 1), a.clone()),
            (19, r(-40, 1), b.clone()),
            (16, r(-34, 1), a.clone()),
            (9, r(20, 1), b.clone()),
            (5, r(6, 1), r(10, 31)),
        ]);
        assert_eq!(Variant::G.g().derivative(), want);
    }

    #[test]
    fn trivial_sturm() {
        let p = ExpPoly::from_terms(&[(2, r(1, 1), r(0, 1)), (0, r(-1, 4), r(0, 1))]);
        assert_eq!(sturm_count(&p).unwrap().count, 1);
        // x^3 (x - 1/3)(x - 2/3) = x^5 - x^4 + 2/9 x^3
        let q = ExpPoly::from_terms(&[(5, r(1, 1), r(0, 1)), (4, r(-1, 1), r(0, 1)), (3, r(2, 9), r(0, 1))]);
        let c = sturm_count(&q).unwrap();
        assert_eq!((c.count, c.multiplicity_at_zero, c.interior), (5, 3, 2));
    }

    #[test]
    fn bernstein_isolation_matches_sturm() {
        // (x - 1/2)(x - 1/5)(x - 0.9) + shifted copies of the same roots
        let p = ExpPoly::from_terms(&[
            (3, r(1, 1), r(0, 1)),
            (2, r(-8, 5), r(0, 1)),
            (1, r(73, 100), r(0, 1)),
            (0, r(-9, 100), r(0, 1)),
        ]);
        let dense = p.materialize(128).dense(0);
        let boxes = isolate_roots(&dense, 0.0, 1.0, 128).unwrap();
        assert_eq!(boxes.len(), 3);
        for (want, (lo, hi)) in [0.2, 0.5, 0.9].iter().zip(&boxes) {
            assert!(lo < want && want <= hi);
        }
        assert_eq!(isolate_roots(&dense, 0.25, 1.0, 128).unwrap().len(), 2);
        assert_eq!(sturm_count_in(&p, 0.25, 1.0, 128).unwrap().interior, 2);
    }

    #[test]
    fn g_endpoints() {
        let g = Variant::G.g();
        let g0 = g.eval(&Interval::zero(), 128);
        let want0 = exp_rational(&r(-397, 558), 128);
        assert!(g0.overlaps(&want0));
        let g1 = g.eval(&Interval::one(), 128);
        let f0 = eval_f(0.0, Variant::G).unwrap();
        assert!(g1.overlaps(&f0));
        assert!(f0.overlaps(&exp_rational(&r(-10, 31), 128)));
    }

    #[test]
    fn constant_polynomial_max() {
        let p = ExpPoly::from_terms(&[(0, r(9, 10), r(0, 1))]);
        let c = certified_max(&p).unwrap();
        assert!(c.max_value.0 <= 0.9 && 0.9 <= c.max_value.1);
        let want = -(0.9f64).ln();
        assert!((c.epsilon_certified - want).abs() <= 1.0e-6 + 1e-12);
        assert!(c.epsilon_certified <= want);
    }

    #[test]
    fn simple_quadratic_max() {
        // 1/2 + x - x^2 peaks at 1/2 with value 3/4.
        let p = ExpPoly::from_terms(&[(0, r(1, 2), r(0, 1)), (1, r(1, 1), r(0, 1)), (2, r(-1, 1), r(0, 1))]);
        let c = certified_max(&p).unwrap();
        assert!(c.max_value.0 <= 0.75 && 0.75 <= c.max_value.1);
        assert!(c.max_location.0 <= 0.5 && 0.5 <= c.max_location.1);
        assert!(c.max_value.1 - c.max_value.0 < 1e-15);
        assert_eq!(c.root_count, 1);
    }

    #[test]
    fn tail_bound_regimes() {
        assert!(matches!(certify_tail_bound(&Prob::Float(0.1)), Err(FrogError::Regime(_))));
        assert!(matches!(certify_tail_bound(&Prob::ratio(1, 6)), Err(FrogError::Regime(_))));
        let t = certify_tail_bound(&Prob::Float(0.2)).unwrap();
        assert!(t.margin.0 > 0.0);
        assert!(t.d0 >= 6);
        let high = certify_tail_bound(&Prob::Float(0.49)).unwrap();
        assert!(high.lambda0 < t.lambda0);
    }
}
