//! Star-graph auxiliary processes and their leaf-count laws.
//!
//! The star has a root `r`, a centre `c` and leaves `v1..vm`. The centre
//! holds Poisson(1) active particles, `v1` holds active particles and every
//! other leaf holds dormant ones. Centre particles go to `r`, to a uniform
//! leaf, or die; leaf particles pass through `c` and then go to `r` or to a
//! uniform other leaf, waking whatever sleeps there. The quantity of interest
//! is how many of `v2..vm` are ever visited.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::expsum::{rat, ExpSum};
use crate::interval::Interval;
use crate::params::{derive_params, DriftParams, Prob};
use crate::sample::PoissonSampler;
use crate::seed::{run_trials, SeedSpec, TrialRng};
use crate::stats::empirical_pmf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UVariant {
    Uprime,
    Utilde,
    GenericMSim,
    UdoubleprimeBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UPmf {
    pub variant: UVariant,
    pub lambda: f64,
    pub probs: Vec<f64>,
}

impl UPmf {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(u, p)| u as f64 * p).sum()
    }
}

/// Exact law of the three-leaf variable `U'` as functions of lambda.
///
/// Centre particles reach each of `v2, v3` at rate `rho/3` and each `v1`
/// particle reaches each at rate `rho/2`, with `rho = 7/12`.
pub fn law_u_prime() -> Vec<ExpSum> {
    let rho = rat(7, 12);
    // A given target is missed initially, and missed by one activated leaf.
    let q0 = ExpSum::exp(&rho / rat(3, 1), &rho / rat(2, 1));
    let r = ExpSum::exp(rat(0, 1), &rho / rat(2, 1));
    let p0 = q0.powi(2);
    let p1 = q0.one_minus().mul(&q0).mul(&r).scale(&rat(2, 1));
    let p2 = ExpSum::one().sub(&p0).sub(&p1);
    vec![p0, p1, p2]
}

fn u_tilde_parts() -> (ExpSum, ExpSum) {
    let rho = rat(46, 73);
    let q0 = ExpSum::exp(&rho / rat(4, 1), &rho / rat(3, 1));
    let r = ExpSum::exp(rat(0, 1), &rho / rat(3, 1));
    (q0, r)
}

/// Exact law of the four-leaf variable `U~` with `rho = 46/73`.
///
/// In the chain "one leaf hit initially, it wakes exactly one more, which
/// then misses the last", the last leaf must also be missed by the first
/// leaf, hence the factor `r^2` in that term.
pub fn law_u_tilde() -> Vec<ExpSum> {
    let (q0, r) = u_tilde_parts();
    let three = rat(3, 1);
    let p0 = q0.powi(3);
    let p1 = q0.one_minus().mul(&q0.powi(2)).mul(&r.powi(2)).scale(&three);
    let both_first = q0.one_minus().powi(2).mul(&q0).mul(&r.powi(2)).scale(&three);
    let chain = q0.one_minus().mul(&q0.powi(2)).mul(&r.one_minus().mul(&r).scale(&rat(2, 1))).mul(&r).scale(&three);
    let p2 = both_first.add(&chain);
    let p3 = ExpSum::one().sub(&p0).sub(&p1).sub(&p2);
    vec![p0, p1, p2, p3]
}

/// The four-leaf law with the chain term missing its final `r` factor.
///
/// Kept only to quantify how far that form sits from the simulated process.
pub fn law_u_tilde_without_chain_factor() -> Vec<ExpSum> {
    let (q0, r) = u_tilde_parts();
    let three = rat(3, 1);
    let p0 = q0.powi(3);
    let p1 = q0.one_minus().mul(&q0.powi(2)).mul(&r.powi(2)).scale(&three);
    let both_first = q0.one_minus().powi(2).mul(&q0).mul(&r.powi(2)).scale(&three);
    let chain = q0.one_minus().mul(&q0.powi(2)).mul(&r.one_minus().mul(&r).scale(&rat(2, 1))).scale(&three);
    let p2 = both_first.add(&chain);
    let p3 = ExpSum::one().sub(&p0).sub(&p1).sub(&p2);
    vec![p0, p1, p2, p3]
}

pub fn pmf_from_law(law: &[ExpSum], lambda: f64, variant: UVariant) -> Result<UPmf> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(FrogError::Domain(format!("lambda = {lambda} must be finite and >= 0")));
    }
    let l = Interval::from_f64(lambda);
    let probs = law.iter().map(|e| e.eval(&l, 128).mid_f64()).collect();
    Ok(UPmf { variant, lambda, probs })
}

pub fn pmf_u_prime(lambda: f64) -> Result<UPmf> {
    pmf_from_law(&law_u_prime(), lambda, UVariant::Uprime)
}

pub fn pmf_u_tilde(lambda: f64) -> Result<UPmf> {
    pmf_from_law(&law_u_tilde(), lambda, UVariant::Utilde)
}

/// Drift probabilities of one star process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StarProcess {
    pub leaves: usize,
    pub central_to_root: f64,
    pub central_to_leaf: f64,
    pub leaf_to_root: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarSample {
    pub frozen_at_root: u64,
    pub leaves_activated: u64,
}

impl StarProcess {
    /// The auxiliary process of the self-similar frog model.
    pub fn auxiliary(params: &DriftParams) -> StarProcess {
        StarProcess {
            leaves: params.d as usize,
            central_to_root: params.p_star(),
            central_to_leaf: 1.0 - params.p_star(),
            leaf_to_root: params.p_hat(),
        }
    }

    /// The modified process on `m` leaves: centre drifts `p*(m,p)` to the
    /// root and `1 - p_hat` to the leaves, the rest is killed.
    pub fn modified(m: usize, p: &Prob) -> Result<StarProcess> {
        if m < 3 {
            return Err(FrogError::Domain(format!("m = {m} must be at least 3")));
        }
        let pm = derive_params(m as u32, p.clone())?;
        Ok(StarProcess {
            leaves: m,
            central_to_root: pm.p_star(),
            central_to_leaf: 1.0 - pm.p_hat(),
            leaf_to_root: pm.p_hat(),
        })
    }

    /// One run to fixation. `leaf_law` draws the particle count of a leaf;
    /// it is called for `v1` first and then for each leaf as it is woken.
    pub fn run<F>(&self, rng: &mut TrialRng, mut leaf_law: F) -> StarSample
    where
        F: FnMut(&mut TrialRng) -> u64,
    {
        let m = self.leaves;
        let mut visited = vec![false; m];
        visited[0] = true;
        let mut pending: Vec<usize> = Vec::new();
        let mut frozen = 0u64;
        let central = PoissonSampler::new(1.0).sample(rng);
        for _ in 0..central {
            let u: f64 = rng.random();
            if u < self.central_to_root {
                frozen += 1;
            } else if u < self.central_to_root + self.central_to_leaf {
                let j = rng.random_range(0..m);
                if !visited[j] {
                    visited[j] = true;
                    pending.push(j);
                }
            }
        }
        let mut release = |i: usize, rng: &mut TrialRng, visited: &mut Vec<bool>, pending: &mut Vec<usize>| {
            let n = leaf_law(rng);
            for _ in 0..n {
                if rng.random::<f64>() < self.leaf_to_root {
                    frozen += 1;
                } else {
                    let mut j = rng.random_range(0..m - 1);
                    if j >= i {
                        j += 1;
                    }
                    if !visited[j] {
                        visited[j] = true;
                        pending.push(j);
                    }
                }
            }
        };
        release(0, rng, &mut visited, &mut pending);
        while let Some(j) = pending.pop() {
            release(j, rng, &mut visited, &mut pending);
        }
        let leaves_activated = visited[1..].iter().filter(|v| **v).count() as u64;
        StarSample { frozen_at_root: frozen, leaves_activated }
    }
}

/// Empirical law of the modified `m`-leaf count with Poisson(lambda) leaves.
pub fn simulate_modified_m(m: usize, p: &Prob, lambda: f64, trials: u64, master_seed: u64) -> Result<UPmf> {
    if trials == 0 {
        return Err(FrogError::Domain("trials must be positive".into()));
    }
    let proc_ = StarProcess::modified(m, p)?;
    let leaf = PoissonSampler::new(lambda);
    let samples = run_trials(master_seed, 0, trials, |s| {
        let mut rng = s.rng();
        proc_.run(&mut rng, |r| leaf.sample(r)).leaves_activated
    });
    Ok(UPmf { variant: UVariant::GenericMSim, lambda, probs: empirical_pmf(&samples, m) })
}

/// Where one pre-sampled particle goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dest {
    Root,
    Leaf(u32),
}

/// Leaf-by-leaf record of one exploration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationTrace {
    pub a_sets: Vec<Vec<u32>>,
    pub b_sets: Vec<Vec<u32>>,
    pub c_sets: Vec<Vec<u32>>,
    pub final_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationResult {
    pub counts: Vec<u64>,
    pub probs: Vec<f64>,
    pub traces: Vec<ExplorationTrace>,
}

/// Particle destinations sampled up front so that both exploration modes
/// see the same randomness. Leaf indices run over `0..d`, with 0 as `v1`.
struct Environment {
    initial: Vec<Dest>,
    leaves: Vec<Vec<Dest>>,
}

impl Environment {
    fn sample(params: &DriftParams, lambda: f64, rng: &mut TrialRng) -> Environment {
        let d = params.d as usize;
        let (ps, ph) = (params.p_star(), params.p_hat());
        let pois = PoissonSampler::new(lambda);
        let mut initial = Vec::new();
        let n0 = PoissonSampler::new(1.0).sample(rng);
        for _ in 0..n0 {
            let dest = if rng.random::<f64>() < ps { Dest::Root } else { Dest::Leaf(rng.random_range(0..d) as u32) };
            initial.push(dest);
        }
        let mut leaves = Vec::with_capacity(d);
        for i in 0..d {
            let n = pois.sample(rng);
            let mut v = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let dest = if rng.random::<f64>() < ph {
                    Dest::Root
                } else {
                    let mut j = rng.random_range(0..d - 1);
                    if j >= i {
                        j += 1;
                    }
                    Dest::Leaf(j as u32)
                };
                v.push(dest);
            }
            leaves.push(v);
        }
        // v1's particles are active from the start.
        let v1 = std::mem::take(&mut leaves[0]);
        initial.extend(v1);
        Environment { initial, leaves }
    }
}

fn explore(
    env: &Environment,
    single_leaf: bool,
    rng: &mut TrialRng,
    keep_trace: bool,
) -> (u64, Option<ExplorationTrace>) {
    let mut a: BTreeSet<u32> = env
        .initial
        .iter()
        .filter_map(|x| match x {
            Dest::Leaf(j) if *j != 0 => Some(*j),
            _ => None,
        })
        .collect();
    let mut c: BTreeSet<u32> = BTreeSet::new();
    let mut trace = keep_trace.then(ExplorationTrace::default);
    while let Some(&v) = a.iter().next() {
        if let Some(t) = trace.as_mut() {
            t.a_sets.push(a.iter().copied().collect());
            t.c_sets.push(c.iter().copied().collect());
        }
        a.remove(&v);
        c.insert(v);
        let b: BTreeSet<u32> = env.leaves[v as usize]
            .iter()
            .filter_map(|x| match x {
                Dest::Leaf(j) if *j != 0 && !a.contains(j) && !c.contains(j) => Some(*j),
                _ => None,
            })
            .collect();
        if let Some(t) = trace.as_mut() {
            t.b_sets.push(b.iter().copied().collect());
        }
        if single_leaf {
            if !b.is_empty() {
                let k = rng.random_range(0..b.len());
                a.insert(*b.iter().nth(k).unwrap());
            }
        } else {
            a.extend(b);
        }
    }
    let count = c.len() as u64;
    if let Some(t) = trace.as_mut() {
        t.a_sets.push(a.iter().copied().collect());
        t.c_sets.push(c.iter().copied().collect());
        t.final_count = count;
    }
    (count, trace)
}

/// Leaf count of the auxiliary process sampled by exploration.
///
/// With `single_leaf_mode` each round keeps only one uniformly chosen newly
/// visited leaf, which gives `U''`. Both modes consume the same environment
/// for a given seed, so `U'' <= U` holds trial by trial.
pub fn sample_u_exploration(
    params: &DriftParams,
    lambda: f64,
    trials: u64,
    master_seed: u64,
    single_leaf_mode: bool,
    keep_traces: bool,
) -> ExplorationResult {
    let out = run_trials(master_seed, 0, trials, |s: SeedSpec| {
        let mut rng = s.rng();
        let env = Environment::sample(params, lambda, &mut rng);
        explore(&env, single_leaf_mode, &mut rng, keep_traces)
    });
    let counts: Vec<u64> = out.iter().map(|x| x.0).collect();
    let probs = empirical_pmf(&counts, params.d as usize);
    let traces = out.into_iter().filter_map(|x| x.1).collect();
    ExplorationResult { counts, probs, traces }
}

/// Upper bound on `P(U'' = j)` for `1 <= j <= 4`.
pub fn u_double_prime_bound(params: &DriftParams, lambda: f64) -> f64 {
    let d = params.d as f64;
    (-(1.0 - params.p_hat()) * lambda * (d - 5.0) / (d - 1.0)).exp()
}
