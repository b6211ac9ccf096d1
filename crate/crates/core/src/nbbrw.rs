//! The three-type non-backtracking branching random walk on `Z_+`.
//!
//! Types 1 and 3 reproduce identically: with probability `p_hat` one Type-1
//! child one step left, otherwise one Type-2 child plus `Poi(1)` Type-3
//! children one step right. A Type-2 particle has one Type-2 child plus
//! `Poi(1)` Type-3 children one step right. A child landing on 0 is a
//! visit; it is then removed (killed variant) or becomes a Type-2 particle
//! at 0 (reflected variants). In the `d`-dependent reflected walk Type-3
//! particles step left with probability `p_star(d, p)` instead.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::params::{derive_params, Prob};
use crate::sample::{binomial, poisson};
use crate::seed::SeedSpec;

fn check_p(p: &Prob) -> Result<f64> {
    let x = p.to_f64();
    if x > 0.0 && x < 0.5 {
        Ok(x)
    } else {
        Err(FrogError::Domain(format!("p = {p} is not in (0, 1/2)")))
    }
}

fn p_hat_of(p: f64) -> f64 {
    p / (1.0 - p)
}

/// Exact `p <= 1/6`, so that a float equal to the nearest double of 1/6
/// lands on the transient side like the rational 1/6 does.
pub fn is_transient(p: &Prob) -> bool {
    p.to_rational() <= BigRational::new(BigInt::from(1), BigInt::from(6))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanMatrix {
    pub r: [[f64; 3]; 3],
}

pub fn mean_matrix(p: &Prob) -> Result<MeanMatrix> {
    let h = p_hat_of(check_p(p)?);
    let row = [h, 1.0 - h, 1.0 - h];
    Ok(MeanMatrix { r: [row, [0.0, 1.0, 1.0], row] })
}

/// The 2x2 matrix `Phi(theta)` acting on `(alpha_1 = alpha_3, alpha_2)`.
pub fn phi_matrix(p_hat: f64, theta: f64) -> [[f64; 2]; 2] {
    let (up, dn) = (theta.exp(), (-theta).exp());
    [[p_hat * up + (1.0 - p_hat) * dn, (1.0 - p_hat) * dn], [dn, dn]]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Transient,
    Recurrent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub p: f64,
    pub p_hat: f64,
    pub discriminant: f64,
    pub theta_plus: Option<f64>,
    pub theta_minus: Option<f64>,
    pub mu: Option<f64>,
    pub f2_1: Option<f64>,
    pub f3_1: Option<f64>,
    pub classification: Classification,
}

pub fn spectral_report(p: &Prob) -> Result<SpectralReport> {
    let x = check_p(p)?;
    let h = p_hat_of(x);
    let disc = 1.0 - 6.0 * h + 5.0 * h * h;
    let mut rep = SpectralReport {
        p: x,
        p_hat: h,
        discriminant: disc,
        theta_plus: None,
        theta_minus: None,
        mu: None,
        f2_1: None,
        f3_1: None,
        classification: Classification::Recurrent,
    };
    if is_transient(p) {
        // Rounding can push the discriminant a hair below zero at p = 1/6.
        let sq = disc.max(0.0).sqrt();
        let mu = (1.0 + h - sq) / (2.0 * (2.0 - h));
        rep.theta_plus = Some(((1.0 + h + sq) / (2.0 * h)).ln());
        rep.theta_minus = Some(((1.0 + h - sq) / (2.0 * h)).ln());
        rep.mu = Some(mu);
        rep.f2_1 = Some(mu * mu / (1.0 - mu));
        rep.f3_1 = Some(mu);
        rep.classification = Classification::Transient;
    }
    Ok(rep)
}

fn transient_mu(p: &Prob) -> Result<f64> {
    let rep = spectral_report(p)?;
    rep.mu.ok_or_else(|| FrogError::Regime(format!("p = {p} > 1/6: expected visits are infinite")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvectorCertificate {
    pub mu: f64,
    pub alpha: [f64; 3],
    pub residuals: [f64; 3],
    pub valid: bool,
}

/// Slack for calling a residual nonpositive in floating point.
pub const EIGEN_SLACK: f64 = 1e-12;

/// Residuals of `sum_j r_ij alpha_j (p_j / mu + q_j mu) - alpha_i` with
/// `p_1 = 1`, `q_2 = q_3 = 1` and the others zero.
pub fn check_eigenvector(p: &Prob, mu: f64, alpha: [f64; 3]) -> Result<EigenvectorCertificate> {
    if !(mu > 0.0) || alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(FrogError::Domain("mu and alpha must be positive".into()));
    }
    let r = mean_matrix(p)?.r;
    let shift = [1.0 / mu, mu, mu];
    let mut residuals = [0.0; 3];
    for i in 0..3 {
        let lhs: f64 = (0..3).map(|j| r[i][j] * alpha[j] * shift[j]).sum();
        residuals[i] = lhs - alpha[i];
    }
    let valid = residuals.iter().all(|x| *x <= EIGEN_SLACK);
    Ok(EigenvectorCertificate { mu, alpha, residuals, valid })
}

/// `(mu, alpha)` from the spectral solution, gauge `alpha_2 = 1`.
pub fn spectral_certificate(p: &Prob) -> Result<EigenvectorCertificate> {
    let mu = transient_mu(p)?;
    let a = (1.0 - mu) / mu;
    check_eigenvector(p, mu, [a, 1.0, a])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParticleType {
    One = 1,
    Two = 2,
    Three = 3,
}

impl TryFrom<u8> for ParticleType {
    type Error = FrogError;
    fn try_from(t: u8) -> Result<ParticleType> {
        match t {
            1 => Ok(ParticleType::One),
            2 => Ok(ParticleType::Two),
            3 => Ok(ParticleType::Three),
            _ => Err(FrogError::Domain(format!("particle type {t} is not 1, 2 or 3"))),
        }
    }
}

/// Expected visits to 0 of the killed walk from one particle at `x >= 1`.
pub fn expected_visits(p: &Prob, x: u64, ty: ParticleType) -> Result<f64> {
    let mu = transient_mu(p)?;
    Ok(f_value(mu, x, ty))
}

fn f_value(mu: f64, x: u64, ty: ParticleType) -> f64 {
    let m = mu.powi(x as i32);
    match ty {
        ParticleType::One | ParticleType::Three => m,
        ParticleType::Two => m * mu / (1.0 - mu),
    }
}

/// Expected visits to 0 of the reflected walk from one particle at `x`.
pub fn reflected_visit_series(p: &Prob, x: u64, ty: ParticleType) -> Result<f64> {
    let mu = transient_mu(p)?;
    Ok(f_value(mu, x, ty) / reflect_denominator(mu))
}

fn reflect_denominator(mu: f64) -> f64 {
    1.0 - (mu * mu / (1.0 - mu) + mu)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrwVariant {
    Killed,
    Reflected,
    ReflectedD(u32),
}

/// What happens to particles at positions `>= cutoff` and to survivors at
/// the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    /// Removed without contributing, like frogs stunned at a fence.
    Absorb(u64),
    /// Removed, contributing their exact expected future visits. Only for
    /// `p <= 1/6` and the killed or reflected variants; keeps the visit
    /// estimate unbiased.
    Compensate(u64),
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrwConfig {
    pub p: Prob,
    pub variant: BrwVariant,
    /// `(position, type)` pairs.
    pub initial: Vec<(u64, ParticleType)>,
    pub horizon: u32,
    pub population_cap: u64,
    pub cutoff: Cutoff,
}

pub const DEFAULT_POPULATION_CAP: u64 = 10_000_000;

impl BrwConfig {
    pub fn new(p: Prob, variant: BrwVariant, initial: Vec<(u64, ParticleType)>, horizon: u32) -> BrwConfig {
        BrwConfig { p, variant, initial, horizon, population_cap: DEFAULT_POPULATION_CAP, cutoff: Cutoff::None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrwOutcome {
    /// Visits to 0 in generations `1..`.
    pub visits_per_generation: Vec<u64>,
    pub total_visits: u64,
    /// Expected future visits credited for particles removed by the cutoff
    /// or left at the horizon.
    pub compensation: f64,
    /// Particles alive at the end by type.
    pub final_population: [u64; 3],
    pub truncated: bool,
    pub seed: SeedSpec,
}

impl BrwOutcome {
    pub fn estimate(&self) -> f64 {
        self.total_visits as f64 + self.compensation
    }
}

#[derive(Default, Clone)]
struct Layer {
    one: Vec<u64>,
    two: Vec<u64>,
    three: Vec<u64>,
}

impl Layer {
    fn new(n: usize) -> Layer {
        Layer { one: vec![0; n], two: vec![0; n], three: vec![0; n] }
    }
    fn total(&self) -> u64 {
        self.one.iter().chain(&self.two).chain(&self.three).sum()
    }
}

pub fn simulate_brw(config: &BrwConfig, seed: SeedSpec) -> Result<BrwOutcome> {
    let p = check_p(&config.p)?;
    if config.horizon == 0 {
        return Err(FrogError::Domain("horizon must be >= 1".into()));
    }
    let h = p_hat_of(p);
    let p3 = match config.variant {
        BrwVariant::ReflectedD(d) => derive_params(d, config.p.clone())?.p_star(),
        _ => h,
    };
    let reflect = !matches!(config.variant, BrwVariant::Killed);
    let comp_value: Option<Box<dyn Fn(u64, ParticleType) -> f64>> = match config.cutoff {
        Cutoff::Compensate(_) => {
            if matches!(config.variant, BrwVariant::ReflectedD(_)) {
                return Err(FrogError::Domain("no closed-form compensation for the d-dependent walk".into()));
            }
            let mu = transient_mu(&config.p)?;
            let denom = if reflect { reflect_denominator(mu) } else { 1.0 };
            Some(Box::new(move |x, t| f_value(mu, x, t) / denom))
        }
        _ => None,
    };
    let limit = match config.cutoff {
        Cutoff::Absorb(x) | Cutoff::Compensate(x) => Some(x.max(1)),
        Cutoff::None => None,
    };
    let max_init = config.initial.iter().map(|(x, _)| *x).max().unwrap_or(0);
    let width = limit.unwrap_or(max_init + config.horizon as u64 + 2) as usize + 2;
    let mut cur = Layer::new(width);
    let mut compensation = 0.0;
    for &(x, t) in &config.initial {
        if x == 0 && t != ParticleType::Two {
            return Err(FrogError::Domain("only Type-2 particles can sit at 0".into()));
        }
        if limit.is_some_and(|l| x >= l) {
            if let Some(f) = &comp_value {
                compensation += f(x, t);
            }
            continue;
        }
        let v = match t {
            ParticleType::One => &mut cur.one,
            ParticleType::Two => &mut cur.two,
            ParticleType::Three => &mut cur.three,
        };
        v[x as usize] += 1;
    }
    let mut rng = seed.rng();
    let mut visits = Vec::new();
    let mut truncated = false;
    for _ in 0..config.horizon {
        if cur.total() == 0 {
            break;
        }
        if cur.total() > config.population_cap {
            truncated = true;
            break;
        }
        let mut next = Layer::new(width);
        let mut arrivals = 0u64;
        for x in 0..width - 1 {
            let (n1, n2, n3) = (cur.one[x], cur.two[x], cur.three[x]);
            if n1 + n2 + n3 == 0 {
                continue;
            }
            let mut right = n2;
            for (n, q) in [(n1, h), (n3, p3)] {
                if n == 0 {
                    continue;
                }
                // Position 0 only holds Type-2 particles.
                let left = if x == 0 { 0 } else { binomial(&mut rng, n, q) };
                if left > 0 {
                    if x == 1 {
                        arrivals += left;
                    } else {
                        next.one[x - 1] += left;
                    }
                }
                right += n - left;
            }
            if right > 0 {
                next.two[x + 1] += right;
                next.three[x + 1] += poisson(&mut rng, right as f64);
            }
        }
        if reflect {
            next.two[0] += arrivals;
        }
        visits.push(arrivals);
        if let Some(l) = limit {
            let l = l as usize;
            for x in l..width {
                for (t, v) in [
                    (ParticleType::One, &mut next.one[x]),
                    (ParticleType::Two, &mut next.two[x]),
                    (ParticleType::Three, &mut next.three[x]),
                ] {
                    if *v > 0 {
                        if let Some(f) = &comp_value {
                            compensation += *v as f64 * f(x as u64, t);
                        }
                        *v = 0;
                    }
                }
            }
        }
        cur = next;
    }
    if let Some(f) = &comp_value {
        for x in 0..width {
            for (t, n) in
                [(ParticleType::One, cur.one[x]), (ParticleType::Two, cur.two[x]), (ParticleType::Three, cur.three[x])]
            {
                if n == 0 {
                    continue;
                }
                compensation += n as f64
                    * if x == 0 {
                        // Type-2 at 0: its children start at 1.
                        (f(1, ParticleType::Two) + f(1, ParticleType::Three)) * if reflect { 1.0 } else { 0.0 }
                    } else {
                        f(x as u64, t)
                    };
            }
        }
    }
    let final_population = [cur.one.iter().sum(), cur.two.iter().sum(), cur.three.iter().sum()];
    Ok(BrwOutcome {
        total_visits: visits.iter().sum(),
        visits_per_generation: visits,
        compensation,
        final_population,
        truncated,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::run_trials;
    use crate::stats::Moments;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matrix_rows() {
        let m = mean_matrix(&Prob::ratio(1, 6)).unwrap();
        assert!(close(m.r[0][0], 0.2, 1e-15) && close(m.r[0][1], 0.8, 1e-15) && close(m.r[0][2], 0.8, 1e-15));
        assert_eq!(m.r[0], m.r[2]);
        let m = mean_matrix(&Prob::Float(1e-12)).unwrap();
        assert!(close(m.r[0][0], 0.0, 1e-11) && close(m.r[0][1], 1.0, 1e-11));
        assert!(mean_matrix(&Prob::Float(0.5)).is_err());
    }

    #[test]
    fn boundary_values() {
        let r = spectral_report(&Prob::ratio(1, 6)).unwrap();
        assert_eq!(r.classification, Classification::Transient);
        assert!(close(r.mu.unwrap(), 1.0 / 3.0, 1e-12));
        assert!(close(r.theta_plus.unwrap(), 3f64.ln(), 1e-7));
        assert!(close(r.f2_1.unwrap() + r.f3_1.unwrap(), 0.5, 1e-12));
        let r = spectral_report(&Prob::Float(1.0 / 6.0)).unwrap();
        assert_eq!(r.classification, Classification::Transient);
        for p in [1.0 / 6.0 + 1e-9, 0.2, 0.49] {
            assert_eq!(spectral_report(&Prob::Float(p)).unwrap().classification, Classification::Recurrent);
        }
        for p in [0.01, 0.05, 0.1] {
            let r = spectral_report(&Prob::Float(p)).unwrap();
            let mu = r.mu.unwrap();
            assert!(mu > 0.0 && mu < 0.5);
            assert!(close(mu, (-r.theta_plus.unwrap()).exp(), 1e-14));
            assert!(r.f2_1.unwrap() + r.f3_1.unwrap() < 1.0);
        }
    }

    #[test]
    fn mu_increases_to_one_third() {
        let mut last = 0.0;
        for k in 1..=200 {
            let p = k as f64 / 200.0 / 6.0;
            let mu = spectral_report(&Prob::Float(p)).unwrap().mu.unwrap();
            assert!(mu > last);
            last = mu;
        }
        assert!(close(last, 1.0 / 3.0, 1e-7));
    }

    #[test]
    fn phi_has_eigenvalue_one_at_both_roots() {
        for p in [0.02, 0.1, 0.16] {
            let r = spectral_report(&Prob::Float(p)).unwrap();
            for th in [r.theta_plus.unwrap(), r.theta_minus.unwrap()] {
                let m = phi_matrix(r.p_hat, th);
                let det = (m[0][0] - 1.0) * (m[1][1] - 1.0) - m[0][1] * m[1][0];
                assert!(det.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenvector_residuals() {
        for k in 1..=50 {
            let p = Prob::Float(k as f64 / 50.0 / 6.0);
            let c = spectral_certificate(&p).unwrap();
            assert!(c.residuals.iter().all(|r| r.abs() <= 1e-10), "{c:?}");
            assert!(c.valid);
        }
        let c = check_eigenvector(&Prob::Float(0.2), 1.0, [1.0, 1.0, 1.0]).unwrap();
        assert!(close(c.residuals[1], 1.0, 1e-15));
        assert!(!c.valid);
    }

    #[test]
    fn no_eigenvector_when_recurrent() {
        let p = Prob::Float(0.3);
        for i in 1..100 {
            let mu = i as f64 / 100.0;
            for j in 1..100 {
                let a1 = j as f64 / 100.0;
                let a2 = 1.0 - a1;
                assert!(!check_eigenvector(&p, mu, [a1, a2, a1]).unwrap().valid);
            }
        }
    }

    #[test]
    fn visit_formulas() {
        let p = Prob::ratio(1, 6);
        assert!(close(expected_visits(&p, 2, ParticleType::One).unwrap(), 1.0 / 9.0, 1e-12));
        assert!(close(reflected_visit_series(&p, 1, ParticleType::One).unwrap(), 2.0 / 3.0, 1e-12));
        let f2 = expected_visits(&p, 3, ParticleType::Two).unwrap();
        assert!(close(reflected_visit_series(&p, 3, ParticleType::Two).unwrap(), 2.0 * f2, 1e-12));
        let mu: f64 = 1.0 / 3.0;
        let tail: f64 = (4..200).map(|k| mu.powi(k)).sum();
        assert!(close(f2, tail, 1e-12));
        assert!(matches!(expected_visits(&Prob::Float(0.2), 1, ParticleType::One), Err(FrogError::Regime(_))));
        assert!(matches!(reflected_visit_series(&Prob::Float(0.2), 1, ParticleType::One), Err(FrogError::Regime(_))));
    }

    #[test]
    fn type_two_never_visits() {
        let cfg = BrwConfig::new(Prob::Float(0.1), BrwVariant::Killed, vec![(5, ParticleType::Two)], 30);
        for s in 0..50 {
            assert_eq!(simulate_brw(&cfg, SeedSpec::new(1, s)).unwrap().total_visits, 0);
        }
    }

    #[test]
    fn type_two_mean_visits() {
        let p = Prob::Float(0.05);
        let mut cfg = BrwConfig::new(p.clone(), BrwVariant::Killed, vec![(1, ParticleType::Two)], 200);
        cfg.cutoff = Cutoff::Compensate(24);
        let m = Moments::from_iter(run_trials(2, 0, 20_000, |s| simulate_brw(&cfg, s).unwrap().estimate()));
        let want = expected_visits(&p, 1, ParticleType::Two).unwrap();
        assert!((m.mean() - want).abs() < 3.0 * m.stderr(), "{} vs {want}", m.mean());
    }

    #[test]
    fn recurrent_side_hits_zero_more_often_with_time() {
        let mut last = 0.0;
        for horizon in [1, 4, 10, 20] {
            let cfg = BrwConfig::new(Prob::Float(0.25), BrwVariant::Killed, vec![(1, ParticleType::One)], horizon);
            let hits = run_trials(3, 0, 400, |s| simulate_brw(&cfg, s).unwrap().total_visits > 0);
            let frac = hits.iter().filter(|h| **h).count() as f64 / 400.0;
            assert!(frac > last, "horizon {horizon}: {frac} after {last}");
            last = frac;
        }
        assert!(last > 0.6);
    }

    #[test]
    fn compensation_rejected_outside_closed_form() {
        let mut cfg = BrwConfig::new(Prob::Float(0.25), BrwVariant::Killed, vec![(1, ParticleType::One)], 20);
        cfg.cutoff = Cutoff::Compensate(20);
        assert!(matches!(simulate_brw(&cfg, SeedSpec::new(0, 0)), Err(FrogError::Regime(_))));
        cfg.p = Prob::Float(0.1);
        cfg.variant = BrwVariant::ReflectedD(5);
        assert!(simulate_brw(&cfg, SeedSpec::new(0, 0)).is_err());
    }

    #[test]
    fn population_cap_truncates() {
        let mut cfg = BrwConfig::new(Prob::Float(0.3), BrwVariant::Reflected, vec![(0, ParticleType::Two)], 200);
        cfg.population_cap = 1000;
        let o = simulate_brw(&cfg, SeedSpec::new(4, 0)).unwrap();
        assert!(o.truncated);
    }
}
