//! The self-similar frog model SFM(d, p) and the operator on laws given by
//! its star-graph auxiliary process.
//!
//! SFM follows the NBFM rules with `Poi(lambda)` dormant frogs per site, and
//! a frog stepping away from the root into an already visited vertex is
//! killed. When several frogs step into the same unvisited vertex in one
//! round, the vertex wakes and one of them, chosen uniformly, survives.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::estimate::{s_value, LevelStats};
use crate::params::DriftParams;
use crate::sample::PoissonSampler;
use crate::seed::{run_trials, SeedSpec};
use crate::star::{StarProcess, StarSample};
use crate::stats::Moments;
use crate::tree_sim::{choose_move, probs, Arena, LevelPoint, ModelKind, Move, Phase, SimOutcome, DEFAULT_MOVE_CAP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfmConfig {
    pub params: DriftParams,
    pub lambda_init: f64,
    pub fence: u32,
}

/// One draw of the auxiliary process: frogs frozen at the root and leaves
/// other than `v1` woken.
pub type OperatorSample = StarSample;

#[derive(Clone, Debug, PartialEq)]
pub struct SfmRun {
    pub outcome: SimOutcome,
    pub killed_on_entry: u64,
    /// Largest number of frogs that entered one vertex from above and lived.
    pub max_entries_from_above: u32,
}

#[derive(Clone, Copy)]
struct Walker {
    node: u32,
    phase: Phase,
    came: u32,
}

pub fn simulate_sfm(config: &SfmConfig, seed: SeedSpec) -> Result<SimOutcome> {
    Ok(simulate_sfm_detailed(config, seed)?.outcome)
}

pub fn simulate_sfm_detailed(config: &SfmConfig, seed: SeedSpec) -> Result<SfmRun> {
    if !(config.lambda_init >= 0.0) || !config.lambda_init.is_finite() {
        return Err(FrogError::Domain(format!("lambda = {} must be finite and >= 0", config.lambda_init)));
    }
    if config.fence == 0 {
        return Err(FrogError::Domain("fence level must be >= 1".into()));
    }
    let d = config.params.d;
    let pr = probs(&config.params);
    let dormant = PoissonSampler::new(config.lambda_init);
    let fence = config.fence as u16;
    let mut rng = seed.rng();
    let mut arena = Arena::new(d);
    let mut entries: Vec<u32> = vec![0];
    let mut active = vec![Walker { node: 0, phase: Phase::Fresh, came: 0 }];
    let (mut visits, mut moves, mut stunned, mut killed) = (0u64, 0u64, 0u64, 0u64);
    while !active.is_empty() {
        let mut next = Vec::with_capacity(active.len());
        let mut downs: Vec<Walker> = Vec::new();
        for w in active {
            moves += 1;
            let depth = arena.depth[w.node as usize] as usize;
            match choose_move(ModelKind::Nbfm, d, pr, depth, w.phase, w.came, &mut rng) {
                Move::Up => {
                    let came = arena.slot[w.node as usize] as u32;
                    let node = arena.parent[w.node as usize];
                    if node == 0 {
                        visits += 1;
                    } else {
                        next.push(Walker { node, phase: Phase::Inbound, came });
                    }
                }
                Move::Down(c) => {
                    let node = arena.child(w.node, c);
                    downs.push(Walker { node, phase: Phase::Outbound, came: 0 });
                }
            }
        }
        if moves > DEFAULT_MOVE_CAP {
            return Err(FrogError::Budget(format!("SFM exceeded {DEFAULT_MOVE_CAP} moves")));
        }
        entries.resize(arena.depth.len(), 0);
        downs.sort_by_key(|w| w.node);
        for group in downs.chunk_by(|a, b| a.node == b.node) {
            let v = group[0].node as usize;
            if arena.activated[v] {
                killed += group.len() as u64;
                continue;
            }
            arena.activated[v] = true;
            let winner = if group.len() > 1 { rng.random_range(0..group.len()) } else { 0 };
            killed += group.len() as u64 - 1;
            entries[v] += 1;
            if arena.depth[v] == fence {
                stunned += 1;
                continue;
            }
            next.push(group[winner]);
            for _ in 0..dormant.sample(&mut rng) {
                next.push(Walker { node: v as u32, phase: Phase::Fresh, came: 0 });
            }
        }
        active = next;
    }
    Ok(SfmRun {
        outcome: SimOutcome {
            frozen_at_fence: stunned,
            root_visits: visits,
            steps_taken: moves,
            seed,
            censored: false,
        },
        killed_on_entry: killed,
        max_entries_from_above: entries.iter().copied().max().unwrap_or(0),
    })
}

/// Root visits of `trials` SFM runs on streams `0..trials`.
pub fn sfm_visits(config: &SfmConfig, trials: u64, master_seed: u64) -> Result<Vec<u64>> {
    run_trials(master_seed, 0, trials, |s| simulate_sfm(config, s).map(|o| o.root_visits)).into_iter().collect()
}

/// Level statistics of SFM with fences at `levels`. Trial `i` uses stream
/// `i` at every level; each level is a separate run.
pub fn sfm_level_curve(
    params: &DriftParams,
    lambda: f64,
    levels: &[u32],
    trials_fn: impl Fn(u32) -> u64,
    master_seed: u64,
) -> Result<(Vec<LevelStats>, Vec<Vec<LevelPoint>>)> {
    if levels.is_empty() || levels.contains(&0) {
        return Err(FrogError::Domain("need fence levels >= 1".into()));
    }
    let trials: Vec<u64> = levels.iter().map(|&l| trials_fn(l)).collect();
    let max_trials = trials.iter().copied().max().unwrap_or(0);
    if trials.contains(&0) {
        return Err(FrogError::Domain("every level needs at least one trial".into()));
    }
    let runs: Vec<Vec<LevelPoint>> = run_trials(master_seed, 0, max_trials, |s| {
        levels
            .iter()
            .zip(&trials)
            .filter(|(_, &t)| s.stream_id < t)
            .map(|(&ell, _)| {
                let cfg = SfmConfig { params: params.clone(), lambda_init: lambda, fence: ell };
                simulate_sfm(&cfg, s).map(|o| LevelPoint {
                    ell,
                    frozen: o.frozen_at_fence,
                    root_visits: o.root_visits,
                    moves: o.steps_taken,
                    censored: false,
                })
            })
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(levels.len());
    for (&ell, &t) in levels.iter().zip(&trials) {
        let pts: Vec<&LevelPoint> = runs[..t as usize].iter().filter_map(|r| r.iter().find(|x| x.ell == ell)).collect();
        let a = Moments::from_iter(pts.iter().map(|x| x.frozen as f64));
        out.push(LevelStats {
            ell,
            trials: t,
            mean_A: a.mean(),
            stderr_A: if a.n > 1 { a.stderr() } else { 0.0 },
            s_ell: s_value(ell, params.p_hat(), a.mean()),
            censored: 0,
            n_k: None,
        });
    }
    Ok((out, runs))
}

/// The auxiliary process with `Poi(lambda)` particles at `v1` and at each
/// woken leaf.
pub fn apply_operator(lambda: f64, params: &DriftParams, trials: u64, master_seed: u64) -> Result<Vec<OperatorSample>> {
    if trials == 0 {
        return Err(FrogError::Domain("trials must be positive".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(FrogError::Domain(format!("lambda = {lambda} must be finite and >= 0")));
    }
    let star = StarProcess::auxiliary(params);
    let leaf = PoissonSampler::new(lambda);
    Ok(run_trials(master_seed, 0, trials, |s| star.run(&mut s.rng(), |r| leaf.sample(r))))
}

/// The auxiliary process with leaf counts resampled from `law`.
pub fn apply_operator_empirical(
    law: &[u64],
    params: &DriftParams,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<OperatorSample>> {
    if trials == 0 || law.is_empty() {
        return Err(FrogError::Domain("need trials and a nonempty law".into()));
    }
    let star = StarProcess::auxiliary(params);
    Ok(run_trials(master_seed, 0, trials, |s| star.run(&mut s.rng(), |r| law[r.random_range(0..law.len())])))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterPoint {
    pub iter: u32,
    pub lambda_in: f64,
    pub mean_out: f64,
    pub stderr: f64,
}

/// Repeatedly applies the operator to `Poi(lambda)`, feeding the sample
/// mean of each output back in as the next `lambda`.
pub fn iterate_operator(
    lambda0: f64,
    params: &DriftParams,
    n_iters: u32,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<IterPoint>> {
    if n_iters == 0 {
        return Err(FrogError::Domain("n_iters must be >= 1".into()));
    }
    let mut lambda = lambda0;
    let mut out = Vec::with_capacity(n_iters as usize);
    for k in 0..n_iters {
        let seed = SeedSpec::derive(master_seed, &format!("iterate/{k}"));
        let samples = apply_operator(lambda, params, trials, seed)?;
        let m = Moments::from_iter(samples.iter().map(|s| s.frozen_at_root as f64));
        out.push(IterPoint { iter: k + 1, lambda_in: lambda, mean_out: m.mean(), stderr: m.stderr() });
        lambda = m.mean();
    }
    Ok(out)
}

/// Empirical `P(A Poi(lambda) = 0)` against the mean of
/// `exp(-(p* + p_hat (1 + U) lambda))` over the same samples, with the
/// standard error of their difference.
pub fn poisson_zero_check(samples: &[OperatorSample], params: &DriftParams, lambda: f64) -> (f64, f64, f64) {
    let (ps, ph) = (params.p_star(), params.p_hat());
    let diff = Moments::from_iter(samples.iter().map(|s| {
        let zero = if s.frozen_at_root == 0 { 1.0 } else { 0.0 };
        zero - (-(ps + ph * (1.0 + s.leaves_activated as f64) * lambda)).exp()
    }));
    let emp = samples.iter().filter(|s| s.frozen_at_root == 0).count() as f64 / samples.len() as f64;
    let pred =
        Moments::from_iter(samples.iter().map(|s| (-(ps + ph * (1.0 + s.leaves_activated as f64) * lambda)).exp()))
            .mean();
    (emp, pred, diff.stderr())
}

/// `E[exp(-Theta)] <= exp(-lambda)` for a finite law of `Theta` given as
/// `(weight, value)` pairs.
pub fn laplace_criterion(theta: &[(f64, f64)], lambda: f64) -> bool {
    theta.iter().map(|(w, t)| w * (-t).exp()).sum::<f64>() <= (-lambda).exp()
}

/// `Poi(Theta) >= Poi(lambda)` in the usual stochastic order, by comparing
/// CDFs until both laws have placed all but `1e-10` of their mass.
pub fn poisson_mixture_dominates(theta: &[(f64, f64)], lambda: f64) -> bool {
    let top = theta.iter().map(|t| t.1).fold(lambda, f64::max);
    let kmax = (top + 12.0 * top.sqrt() + 40.0) as usize;
    let mut terms: Vec<(f64, f64, f64)> = theta.iter().map(|&(w, t)| (w, t, (-t).exp())).collect();
    let mut z = (-lambda).exp();
    let (mut cy, mut cz) = (0.0, 0.0);
    for k in 0..=kmax {
        cy += terms.iter().map(|t| t.0 * t.2).sum::<f64>();
        cz += z;
        if cy > cz + 1e-12 {
            return false;
        }
        if cy >= 1.0 - 1e-10 && cz >= 1.0 - 1e-10 {
            break;
        }
        for t in terms.iter_mut() {
            t.2 *= t.1 / (k + 1) as f64;
        }
        z *= lambda / (k + 1) as f64;
    }
    true
}
