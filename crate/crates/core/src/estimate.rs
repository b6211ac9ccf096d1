//! Level statistics `s(ell) = ell * p_hat^ell * E[A(ell)]`, a growth-rate
//! classifier for them, and bisection for the critical drift.

use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::params::{derive_params, DriftParams, Prob};
use crate::seed::run_trials;
use crate::stats::Moments;
use crate::tree_sim::{run_levels, InitConfig, LevelPoint, ModelKind, DEFAULT_MOVE_CAP};

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub ell: u32,
    pub trials: u64,
    pub mean_A: f64,
    pub stderr_A: f64,
    pub s_ell: f64,
    pub censored: u64,
    /// Mean root visits made while the fence sat at `ell`.
    pub n_k: Option<f64>,
}

pub fn s_value(ell: u32, p_hat: f64, mean_a: f64) -> f64 {
    ell as f64 * p_hat.powi(ell as i32) * mean_a
}

/// Trial schedule: `trials_low` trials up to level `split`, `trials_high` beyond.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub levels: u32,
    pub split: u32,
    pub trials_low: u64,
    pub trials_high: u64,
}

impl Protocol {
    /// 1000 trials up to level 10 and 500 for levels 11 to 15.
    pub fn standard() -> Protocol {
        Protocol { levels: 15, split: 10, trials_low: 1000, trials_high: 500 }
    }

    pub fn trials(&self, ell: u32) -> u64 {
        if ell <= self.split {
            self.trials_low
        } else {
            self.trials_high
        }
    }

    pub fn scaled(&self, k: u64) -> Protocol {
        Protocol { trials_low: self.trials_low * k, trials_high: self.trials_high * k, ..*self }
    }
}

impl Default for Protocol {
    fn default() -> Protocol {
        Protocol::standard()
    }
}

/// Level statistics for `levels`, with `trials_fn(ell)` trials at level `ell`.
///
/// Trial `i` uses stream `i` and runs the coupled fence sequence up to the
/// deepest level that needs it, so lower levels reuse deeper trials.
/// Censored trials are counted and left out of the means.
pub fn level_curve(
    kind: ModelKind,
    params: &DriftParams,
    levels: &[u32],
    trials_fn: impl Fn(u32) -> u64,
    init: InitConfig,
    master_seed: u64,
    move_cap: u64,
) -> Result<Vec<LevelStats>> {
    Ok(level_curve_with_runs(kind, params, levels, trials_fn, init, master_seed, move_cap)?.0)
}

/// `level_curve` that also returns every trial's coupled fence sequence,
/// indexed by stream.
pub fn level_curve_with_runs(
    kind: ModelKind,
    params: &DriftParams,
    levels: &[u32],
    trials_fn: impl Fn(u32) -> u64,
    init: InitConfig,
    master_seed: u64,
    move_cap: u64,
) -> Result<(Vec<LevelStats>, Vec<Vec<LevelPoint>>)> {
    if levels.len() < 2 {
        return Err(FrogError::Domain("need at least two levels".into()));
    }
    if levels.contains(&0) {
        return Err(FrogError::Domain("fence levels start at 1".into()));
    }
    let trials: Vec<u64> = levels.iter().map(|&l| trials_fn(l)).collect();
    if trials.contains(&0) {
        return Err(FrogError::Domain("every level needs at least one trial".into()));
    }
    let max_trials = *trials.iter().max().unwrap();
    let depth_for = |i: u64| levels.iter().zip(&trials).filter(|(_, &t)| i < t).map(|(&l, _)| l).max().unwrap();
    let runs =
        run_trials(master_seed, 0, max_trials, |s| run_levels(kind, params, depth_for(s.stream_id), init, s, move_cap));
    let p_hat = params.p_hat();
    let mut out = Vec::with_capacity(levels.len());
    for (&ell, &t) in levels.iter().zip(&trials) {
        let mut a = Moments::default();
        let mut nk = Moments::default();
        let mut censored = 0;
        for run in &runs[..t as usize] {
            let pt = run[ell as usize - 1];
            if pt.censored {
                censored += 1;
                continue;
            }
            a.push(pt.frozen as f64);
            let before = if ell > 1 { run[ell as usize - 2].root_visits } else { 0 };
            nk.push((pt.root_visits - before) as f64);
        }
        let mean = if a.n > 0 { a.mean() } else { 0.0 };
        out.push(LevelStats {
            ell,
            trials: t,
            mean_A: mean,
            stderr_A: if a.n > 1 { a.stderr() } else { 0.0 },
            s_ell: s_value(ell, p_hat, mean),
            censored,
            n_k: if nk.n > 0 { Some(nk.mean()) } else { None },
        })
    }
    Ok((out, runs))
}

/// `level_curve` over `1..=levels` with a protocol's trial schedule.
pub fn protocol_curve(
    kind: ModelKind,
    params: &DriftParams,
    protocol: &Protocol,
    master_seed: u64,
) -> Result<Vec<LevelStats>> {
    let levels: Vec<u32> = (1..=protocol.levels).collect();
    level_curve(kind, params, &levels, |l| protocol.trials(l), InitConfig::OnePerSite, master_seed, DEFAULT_MOVE_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveClass {
    RecurrentLeaning,
    TransientLeaning,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub class: CurveClass,
    pub slope: f64,
    pub slope_stderr: f64,
    pub levels_used: usize,
}

/// Relative error floor, so a level whose trials all agree keeps a finite weight.
const MIN_REL_ERR: f64 = 1e-6;

/// Weighted least-squares slope of `ln s(ell)` over the last `ceil(2L/3)`
/// levels, with weights `1 / (stderr_A / mean_A)^2`. The slope standard
/// error is inflated by the reduced chi-square when that exceeds one, since
/// coupled levels are not independent.
pub fn fit_curve(stats: &[LevelStats]) -> Result<CurveFit> {
    let l = stats.len();
    if l < 6 {
        return Err(FrogError::Domain(format!("need at least 6 levels, got {l}")));
    }
    let tail = &stats[l - (2 * l).div_ceil(3)..];
    let pts: Vec<(f64, f64, f64)> = tail
        .iter()
        .filter(|s| s.mean_A > 0.0 && s.s_ell > 0.0)
        .map(|s| {
            let rel = (s.stderr_A / s.mean_A).max(MIN_REL_ERR);
            (s.ell as f64, s.s_ell.ln(), 1.0 / (rel * rel))
        })
        .collect();
    let transient = CurveFit {
        class: CurveClass::TransientLeaning,
        slope: f64::NEG_INFINITY,
        slope_stderr: 0.0,
        levels_used: pts.len(),
    };
    if pts.len() < 3 || tail.last().is_some_and(|s| s.mean_A == 0.0) {
        return Ok(transient);
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let xb = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let yb = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xb).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xb) * (p.1 - yb)).sum();
    let slope = sxy / sxx;
    let icpt = yb - slope * xb;
    let chi2: f64 = pts.iter().map(|p| p.2 * (p.1 - icpt - slope * p.0).powi(2)).sum();
    let scale = (chi2 / (pts.len() - 2) as f64).max(1.0);
    let se = (scale / sxx).sqrt();
    let class = if slope - 2.0 * se > 0.0 {
        CurveClass::RecurrentLeaning
    } else if slope + 2.0 * se < 0.0 {
        CurveClass::TransientLeaning
    } else {
        CurveClass::Inconclusive
    };
    Ok(CurveFit { class, slope, slope_stderr: se, levels_used: pts.len() })
}

pub fn classify_curve(stats: &[LevelStats]) -> Result<CurveClass> {
    Ok(fit_curve(stats)?.class)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectRound {
    pub p: f64,
    pub trial_scale: u64,
    pub fit: CurveFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub model: ModelKind,
    pub d: u32,
    pub p_low: f64,
    pub p_high: f64,
    pub point: f64,
    pub protocol: Protocol,
    pub rounds: Vec<BisectRound>,
}

fn classify_at(
    kind: ModelKind,
    d: u32,
    p: f64,
    protocol: &Protocol,
    seed: u64,
    rounds: &mut Vec<BisectRound>,
) -> Result<CurveClass> {
    let params = derive_params(d, Prob::Float(p))?;
    let mut scale = 1;
    loop {
        let stats = protocol_curve(kind, &params, &protocol.scaled(scale), seed)?;
        let fit = fit_curve(&stats)?;
        rounds.push(BisectRound { p, trial_scale: scale, fit });
        if fit.class != CurveClass::Inconclusive || scale > 1 {
            return Ok(fit.class);
        }
        scale = 4;
    }
}

/// Bisection on `p` with `classify_curve`. Every curve uses streams
/// `0..trials` of `seed`, so neighbouring drifts share random numbers.
/// An inconclusive curve is rerun with four times the trials; if it stays
/// inconclusive the midpoint counts as transient, which moves the bracket
/// up.
pub fn bisect_drift(
    kind: ModelKind,
    d: u32,
    p_range: (f64, f64),
    tolerance: f64,
    protocol: &Protocol,
    seed: u64,
) -> Result<DriftEstimate> {
    let (mut lo, mut hi) = p_range;
    if !(0.0 < lo && lo < hi && hi < 0.5) || !(tolerance > 0.0) {
        return Err(FrogError::Domain(format!("bad range [{lo}, {hi}] or tolerance {tolerance}")));
    }
    let mut rounds = Vec::new();
    let c_lo = classify_at(kind, d, lo, protocol, seed, &mut rounds)?;
    let c_hi = classify_at(kind, d, hi, protocol, seed, &mut rounds)?;
    if c_lo != CurveClass::TransientLeaning || c_hi != CurveClass::RecurrentLeaning {
        return Err(FrogError::Bracket(format!("endpoints classify as {c_lo:?} at {lo} and {c_hi:?} at {hi}")));
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        match classify_at(kind, d, mid, protocol, seed, &mut rounds)? {
            CurveClass::RecurrentLeaning => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(DriftEstimate { model: kind, d, p_low: lo, p_high: hi, point: 0.5 * (lo + hi), protocol: *protocol, rounds })
}
