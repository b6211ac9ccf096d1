//! FM(d, p) and NBFM(d, p) on the d-ary tree with stunning fences.
//!
//! Two engines share one move rule. The synchronous engine keeps explicit
//! vertex addresses and a time index; it backs `step_fm` / `step_nbfm` and
//! trajectory checks. The fast engine exploits that fence counts and root
//! visits depend only on which frogs ever wake, not on the order in which
//! their walks are carried out: it runs each frog to completion from a
//! stack over an arena of materialised vertices, and releases stunned frogs
//! one fence at a time, so a single run yields every level `1..=L` with
//! the levels coupled.

use std::collections::{HashMap, HashSet};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::address::VertexAddress;
use crate::error::{FrogError, Result};
use crate::params::DriftParams;
use crate::sample::PoissonSampler;
use crate::seed::{SeedSpec, TrialRng};

/// Particle moves allowed per trial before it is censored.
pub const DEFAULT_MOVE_CAP: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fm,
    Nbfm,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Fm => "fm",
            ModelKind::Nbfm => "nbfm",
        }
    }
}

impl FromStr for ModelKind {
    type Err = FrogError;
    fn from_str(s: &str) -> Result<ModelKind> {
        match s.to_ascii_lowercase().as_str() {
            "fm" => Ok(ModelKind::Fm),
            "nbfm" => Ok(ModelKind::Nbfm),
            _ => Err(FrogError::Domain(format!("unknown model {s:?}"))),
        }
    }
}

/// Dormant frogs per nonroot site; the root always starts with one active frog.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    OnePerSite,
    Poisson(f64),
}

impl InitConfig {
    fn sampler(&self) -> Option<PoissonSampler> {
        match self {
            InitConfig::OnePerSite => None,
            InitConfig::Poisson(l) => Some(PoissonSampler::new(*l)),
        }
    }
}

fn draw_dormant(sampler: &Option<PoissonSampler>, rng: &mut TrialRng) -> u64 {
    match sampler {
        None => 1,
        Some(s) => s.sample(rng),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Woken, has not moved yet. The initial frog at the root is fresh too.
    Fresh,
    Inbound,
    Outbound,
    Stunned,
    Killed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Move {
    Up,
    /// Zero-based child index.
    Down(u32),
}

/// One move of a frog at depth `depth` in `phase`; `came` is the zero-based
/// index of the child an inbound frog arrived from.
#[inline]
pub(crate) fn choose_move(
    kind: ModelKind,
    d: u32,
    probs: (f64, f64, f64),
    depth: usize,
    phase: Phase,
    came: u32,
    rng: &mut TrialRng,
) -> Move {
    let (p, p_star, p_hat) = probs;
    if depth == 0 {
        return Move::Down(rng.random_range(0..d));
    }
    match kind {
        ModelKind::Fm => {
            if rng.random::<f64>() < p {
                Move::Up
            } else {
                Move::Down(rng.random_range(0..d))
            }
        }
        ModelKind::Nbfm => match phase {
            Phase::Fresh => {
                if rng.random::<f64>() < p_star {
                    Move::Up
                } else {
                    Move::Down(rng.random_range(0..d))
                }
            }
            Phase::Inbound => {
                if rng.random::<f64>() < p_hat {
                    Move::Up
                } else {
                    // Non-backtracking: never straight back down.
                    let c = rng.random_range(0..d - 1);
                    Move::Down(if c >= came { c + 1 } else { c })
                }
            }
            _ => Move::Down(rng.random_range(0..d)),
        },
    }
}

pub(crate) fn probs(params: &DriftParams) -> (f64, f64, f64) {
    (params.p(), params.p_star(), params.p_hat())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub id: usize,
    pub position: VertexAddress,
    pub phase: Phase,
    /// Zero-based index of the child an inbound particle came from.
    pub came_from: Option<u32>,
    pub ever_away: bool,
}

/// Synchronous world. `particles` holds every particle ever woken,
/// including stunned and killed ones.
#[derive(Clone, Debug)]
pub struct WorldState {
    pub kind: ModelKind,
    pub d: u32,
    pub fence: Option<usize>,
    pub particles: Vec<Particle>,
    /// Remaining dormant count per vertex whose count has been drawn.
    pub dormant_map: HashMap<VertexAddress, u64>,
    /// Vertices whose dormant frogs have been woken.
    pub visited: HashSet<VertexAddress>,
    pub root_visits: u64,
    pub time: u64,
    pub moves: u64,
    pub activations: u64,
    /// Depth history per particle id, when enabled.
    pub trace: Option<Vec<Vec<usize>>>,
    sampler: Option<PoissonSampler>,
}

impl WorldState {
    /// One active frog at the root, dormant frogs everywhere else.
    pub fn new(kind: ModelKind, d: u32, fence: Option<usize>, init: InitConfig, trace: bool) -> WorldState {
        let mut w = WorldState {
            kind,
            d,
            fence,
            particles: Vec::new(),
            dormant_map: HashMap::new(),
            visited: HashSet::new(),
            root_visits: 0,
            time: 0,
            moves: 0,
            activations: 0,
            trace: if trace { Some(Vec::new()) } else { None },
            sampler: init.sampler(),
        };
        w.visited.insert(VertexAddress::root());
        w.spawn(VertexAddress::root(), Phase::Fresh);
        w
    }

    /// Adds a particle, for tests and custom starting configurations.
    pub fn spawn(&mut self, position: VertexAddress, phase: Phase) -> usize {
        let id = self.particles.len();
        if let Some(t) = self.trace.as_mut() {
            t.push(vec![position.depth()]);
        }
        self.particles.push(Particle { id, position, phase, came_from: None, ever_away: false });
        id
    }

    pub fn active_count(&self) -> usize {
        self.particles.iter().filter(|q| !matches!(q.phase, Phase::Stunned | Phase::Killed)).count()
    }

    pub fn stunned_count(&self) -> usize {
        self.particles.iter().filter(|q| q.phase == Phase::Stunned).count()
    }

    pub fn killed_count(&self) -> usize {
        self.particles.iter().filter(|q| q.phase == Phase::Killed).count()
    }

    fn step(&mut self, params: &DriftParams, rng: &mut TrialRng) {
        self.time += 1;
        let pr = probs(params);
        let n = self.particles.len();
        let mut arrived = Vec::new();
        for i in 0..n {
            let q = &mut self.particles[i];
            if matches!(q.phase, Phase::Stunned | Phase::Killed) {
                continue;
            }
            let depth = q.position.depth();
            let mv = choose_move(self.kind, self.d, pr, depth, q.phase, q.came_from.unwrap_or(0), rng);
            match mv {
                Move::Up => {
                    q.came_from = q.position.last().map(|c| c - 1);
                    q.position = q.position.parent().expect("depth >= 1");
                    q.phase = Phase::Inbound;
                }
                Move::Down(c) => {
                    q.position = q.position.child(c + 1);
                    q.phase = Phase::Outbound;
                    q.came_from = None;
                    q.ever_away = true;
                }
            }
            self.moves += 1;
            arrived.push(i);
        }
        for i in arrived {
            let pos = self.particles[i].position.clone();
            if let Some(t) = self.trace.as_mut() {
                t[i].push(pos.depth());
            }
            if pos.is_root() {
                self.root_visits += 1;
                if self.kind == ModelKind::Nbfm {
                    self.particles[i].phase = Phase::Killed;
                }
                continue;
            }
            if Some(pos.depth()) == self.fence {
                self.particles[i].phase = Phase::Stunned;
                continue;
            }
            if self.visited.insert(pos.clone()) {
                let k = match self.dormant_map.get(&pos) {
                    Some(&k) => k,
                    None => draw_dormant(&self.sampler, rng),
                };
                self.dormant_map.insert(pos.clone(), 0);
                self.activations += k;
                for _ in 0..k {
                    self.spawn(pos.clone(), Phase::Fresh);
                }
            }
        }
    }
}

/// One synchronous FM round: every active particle moves once; dormant
/// frogs at newly entered sites wake and move from the next round on.
pub fn step_fm(state: &mut WorldState, params: &DriftParams, rng: &mut TrialRng) {
    debug_assert_eq!(state.kind, ModelKind::Fm);
    state.step(params, rng);
}

/// One synchronous NBFM round; arrivals at the root are counted and killed.
pub fn step_nbfm(state: &mut WorldState, params: &DriftParams, rng: &mut TrialRng) {
    debug_assert_eq!(state.kind, ModelKind::Nbfm);
    state.step(params, rng);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub frozen_at_fence: u64,
    pub root_visits: u64,
    pub steps_taken: u64,
    pub seed: SeedSpec,
    pub censored: bool,
}

/// Synchronous run to fixation at `fence`; `censored` is set if more than
/// `move_cap` moves were needed.
pub fn run_to_fence_sync(
    kind: ModelKind,
    params: &DriftParams,
    fence: usize,
    init: InitConfig,
    seed: SeedSpec,
    move_cap: u64,
) -> SimOutcome {
    let mut rng = seed.rng();
    let mut w = WorldState::new(kind, params.d, Some(fence), init, false);
    let mut censored = false;
    while w.active_count() > 0 {
        w.step(params, &mut rng);
        if w.moves > move_cap {
            censored = true;
            break;
        }
    }
    SimOutcome {
        frozen_at_fence: w.stunned_count() as u64,
        root_visits: w.root_visits,
        steps_taken: w.moves,
        seed,
        censored,
    }
}

/// Counts at one fence level of a coupled multi-level run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub ell: u32,
    pub frozen: u64,
    pub root_visits: u64,
    pub moves: u64,
    pub censored: bool,
}

pub(crate) const NONE: u32 = u32::MAX;

pub(crate) struct Arena {
    d: u32,
    pub(crate) parent: Vec<u32>,
    pub(crate) slot: Vec<u8>,
    pub(crate) depth: Vec<u16>,
    pub(crate) activated: Vec<bool>,
    kids: Vec<u32>,
    kid_block: Vec<u32>,
}

impl Arena {
    pub(crate) fn new(d: u32) -> Arena {
        let mut a = Arena {
            d,
            parent: Vec::new(),
            slot: Vec::new(),
            depth: Vec::new(),
            activated: Vec::new(),
            kids: Vec::new(),
            kid_block: Vec::new(),
        };
        a.push(NONE, 0, 0);
        a.activated[0] = true;
        a
    }

    fn push(&mut self, parent: u32, slot: u32, depth: u16) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(parent);
        self.slot.push(slot as u8);
        self.depth.push(depth);
        self.activated.push(false);
        self.kid_block.push(NONE);
        id
    }

    #[inline]
    pub(crate) fn child(&mut self, v: u32, c: u32) -> u32 {
        let mut b = self.kid_block[v as usize];
        if b == NONE {
            b = self.kids.len() as u32;
            self.kids.extend(std::iter::repeat_n(NONE, self.d as usize));
            self.kid_block[v as usize] = b;
        }
        let k = self.kids[(b + c) as usize];
        if k != NONE {
            return k;
        }
        let depth = self.depth[v as usize] + 1;
        let k = self.push(v, c, depth);
        self.kids[(b + c) as usize] = k;
        k
    }
}

#[derive(Clone, Copy)]
struct Frog {
    node: u32,
    phase: Phase,
    came: u32,
}

/// Runs one trial with fences at `1, 2, ..., max_level` in turn.
///
/// Level `l` is the exact fence-`l` process: after fixation at fence `l`,
/// the stunned frogs wake the dormant frogs at their sites and continue.
/// Once `move_cap` is exceeded the current and all deeper levels are
/// marked censored.
pub fn run_levels(
    kind: ModelKind,
    params: &DriftParams,
    max_level: u32,
    init: InitConfig,
    seed: SeedSpec,
    move_cap: u64,
) -> Vec<LevelPoint> {
    assert!(max_level >= 1 && max_level < u16::MAX as u32);
    let d = params.d;
    let pr = probs(params);
    let sampler = init.sampler();
    let mut rng = seed.rng();
    let mut arena = Arena::new(d);
    let mut stack = vec![Frog { node: 0, phase: Phase::Fresh, came: 0 }];
    let mut stunned: Vec<Frog> = Vec::new();
    let mut visits = 0u64;
    let mut moves = 0u64;
    let mut out = Vec::with_capacity(max_level as usize);

    for ell in 1..=max_level {
        let fence = ell as u16;
        for f in std::mem::take(&mut stunned) {
            if !arena.activated[f.node as usize] {
                arena.activated[f.node as usize] = true;
                for _ in 0..draw_dormant(&sampler, &mut rng) {
                    stack.push(Frog { node: f.node, phase: Phase::Fresh, came: 0 });
                }
            }
            stack.push(f);
        }
        let mut censored = false;
        'frogs: while let Some(f) = stack.pop() {
            let (mut node, mut phase, mut came) = (f.node, f.phase, f.came);
            loop {
                moves += 1;
                if moves > move_cap {
                    censored = true;
                    break 'frogs;
                }
                let depth = arena.depth[node as usize] as usize;
                match choose_move(kind, d, pr, depth, phase, came, &mut rng) {
                    Move::Up => {
                        came = arena.slot[node as usize] as u32;
                        node = arena.parent[node as usize];
                        phase = Phase::Inbound;
                        if node == 0 {
                            visits += 1;
                            if kind == ModelKind::Nbfm {
                                break;
                            }
                        }
                        // Ancestors of a materialised vertex are already woken.
                    }
                    Move::Down(c) => {
                        node = arena.child(node, c);
                        phase = Phase::Outbound;
                        if arena.depth[node as usize] == fence {
                            stunned.push(Frog { node, phase, came: 0 });
                            break;
                        }
                        if !arena.activated[node as usize] {
                            arena.activated[node as usize] = true;
                            for _ in 0..draw_dormant(&sampler, &mut rng) {
                                stack.push(Frog { node, phase: Phase::Fresh, came: 0 });
                            }
                        }
                    }
                }
            }
        }
        if censored {
            for l in ell..=max_level {
                out.push(LevelPoint { ell: l, frozen: 0, root_visits: visits, moves, censored: true });
            }
            break;
        }
        out.push(LevelPoint { ell, frozen: stunned.len() as u64, root_visits: visits, moves, censored: false });
    }
    out
}

/// `A(ell)` and root visits of one trial with a fence at `fence`.
pub fn run_to_fence(
    kind: ModelKind,
    params: &DriftParams,
    fence: u32,
    init: InitConfig,
    seed: SeedSpec,
) -> Result<SimOutcome> {
    run_to_fence_capped(kind, params, fence, init, seed, DEFAULT_MOVE_CAP)
}

pub fn run_to_fence_capped(
    kind: ModelKind,
    params: &DriftParams,
    fence: u32,
    init: InitConfig,
    seed: SeedSpec,
    move_cap: u64,
) -> Result<SimOutcome> {
    if fence == 0 {
        return Err(FrogError::Domain("fence level must be >= 1".into()));
    }
    let last = *run_levels(kind, params, fence, init, seed, move_cap).last().expect("one level");
    if last.censored {
        return Err(FrogError::Budget(format!("more than {move_cap} moves before fixation at fence {fence}")));
    }
    Ok(SimOutcome {
        frozen_at_fence: last.frozen,
        root_visits: last.root_visits,
        steps_taken: last.moves,
        seed,
        censored: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_params, Prob};
    use crate::stats::Moments;

    fn params(d: u32, p: f64) -> DriftParams {
        derive_params(d, Prob::Float(p)).unwrap()
    }

    #[test]
    fn fm_root_step_goes_to_depth_one() {
        let pr = params(3, 0.3);
        let mut rng = SeedSpec::new(1, 0).rng();
        for _ in 0..100 {
            let mut w = WorldState::new(ModelKind::Fm, 3, None, InitConfig::Poisson(0.0), false);
            step_fm(&mut w, &pr, &mut rng);
            assert_eq!(w.particles[0].position.depth(), 1);
        }
    }

    #[test]
    fn fm_mean_depth_change() {
        let p = 0.3;
        let pr = params(3, p);
        let mut rng = SeedSpec::new(2, 0).rng();
        let mut w = WorldState::new(ModelKind::Fm, 3, None, InitConfig::Poisson(0.0), false);
        w.particles[0].position = VertexAddress { path: vec![1; 5] };
        let mut m = Moments::default();
        for _ in 0..100_000 {
            let before = w.particles[0].position.depth() as f64;
            if before == 0.0 || before > 40.0 {
                w.particles[0].position = VertexAddress { path: vec![1; 5] };
                continue;
            }
            step_fm(&mut w, &pr, &mut rng);
            m.push(w.particles[0].position.depth() as f64 - before);
        }
        assert!((m.mean() - (1.0 - 2.0 * p)).abs() < 3.0 * m.stderr(), "{} vs {}", m.mean(), 1.0 - 2.0 * p);
    }

    #[test]
    fn fm_zero_drift_descends() {
        let pr = DriftParams { p: Prob::Float(0.0), ..params(3, 0.2) };
        let mut rng = SeedSpec::new(3, 0).rng();
        let mut w = WorldState::new(ModelKind::Fm, 3, None, InitConfig::Poisson(0.0), false);
        w.particles[0].position = VertexAddress { path: vec![2] };
        step_fm(&mut w, &pr, &mut rng);
        assert_eq!(w.particles[0].position.depth(), 2);
    }

    #[test]
    fn fresh_step_toward_root_rate() {
        let pr = params(3, 0.2725);
        let mut rng = SeedSpec::new(4, 0).rng();
        let n = 1_000_000;
        let mut ups = 0u64;
        for _ in 0..n {
            if choose_move(ModelKind::Nbfm, 3, probs(&pr), 3, Phase::Fresh, 0, &mut rng) == Move::Up {
                ups += 1;
            }
        }
        let q = pr.p_star();
        let sd = (q * (1.0 - q) / n as f64).sqrt();
        assert!((ups as f64 / n as f64 - q).abs() < 3.0 * sd);
    }

    #[test]
    fn turn_away_depth_is_geometric() {
        // Large-d proxy: fresh frogs also climb with probability p_hat.
        let base = params(3, 0.25);
        let pr = DriftParams { p_star: base.p_hat.clone(), ..base };
        let ph = pr.p_hat();
        let mut rng = SeedSpec::new(5, 0).rng();
        let n = 200_000;
        // bins: turned at depth 3, 2, 1, killed at root
        let mut counts = [0u64; 4];
        for _ in 0..n {
            let mut w = WorldState::new(ModelKind::Nbfm, 3, None, InitConfig::Poisson(0.0), false);
            w.particles[0].position = VertexAddress { path: vec![1, 2, 3] };
            loop {
                let depth = w.particles[0].position.depth();
                step_nbfm(&mut w, &pr, &mut rng);
                let q = &w.particles[0];
                if q.phase == Phase::Killed {
                    counts[3] += 1;
                    break;
                }
                if q.phase == Phase::Outbound {
                    counts[3 - depth] += 1;
                    break;
                }
            }
        }
        let want = [1.0 - ph, ph * (1.0 - ph), ph * ph * (1.0 - ph), ph.powi(3)];
        for (c, w) in counts.iter().zip(want) {
            let sd = (w * (1.0 - w) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - w).abs() < 4.0 * sd, "{counts:?} vs {want:?}");
        }
    }

    #[test]
    fn outbound_always_descends() {
        let pr = params(3, 0.45);
        let mut rng = SeedSpec::new(6, 0).rng();
        for _ in 0..1000 {
            assert!(matches!(
                choose_move(ModelKind::Nbfm, 3, probs(&pr), 4, Phase::Outbound, 0, &mut rng),
                Move::Down(_)
            ));
        }
    }

    #[test]
    fn fence_one() {
        for kind in [ModelKind::Fm, ModelKind::Nbfm] {
            for s in 0..20 {
                let o = run_to_fence(kind, &params(3, 0.3), 1, InitConfig::OnePerSite, SeedSpec::new(7, s)).unwrap();
                assert_eq!((o.frozen_at_fence, o.root_visits), (1, 0));
                let o = run_to_fence_sync(kind, &params(3, 0.3), 1, InitConfig::OnePerSite, SeedSpec::new(7, s), 1000);
                assert_eq!((o.frozen_at_fence, o.root_visits), (1, 0));
            }
        }
        assert!(run_to_fence(ModelKind::Fm, &params(3, 0.3), 0, InitConfig::OnePerSite, SeedSpec::new(7, 0)).is_err());
    }

    #[test]
    fn conservation_and_no_down_then_up() {
        let pr = params(3, 0.3);
        for s in 0..30 {
            let mut rng = SeedSpec::new(8, s).rng();
            let mut w = WorldState::new(ModelKind::Nbfm, 3, Some(6), InitConfig::OnePerSite, true);
            while w.active_count() > 0 {
                step_nbfm(&mut w, &pr, &mut rng);
                let total = w.stunned_count() + w.killed_count() + w.active_count();
                assert_eq!(total as u64, w.activations + 1);
                for v in &w.visited {
                    assert_eq!(w.dormant_map.get(v).copied().unwrap_or(0), 0);
                }
            }
            for hist in w.trace.as_ref().unwrap() {
                let mut went_down = false;
                for pair in hist.windows(2) {
                    if pair[1] > pair[0] {
                        went_down = true;
                    } else {
                        assert!(!went_down, "down-then-up in {hist:?}");
                    }
                }
            }
            assert!(w.stunned_count() as u64 <= w.activations + 1);
        }
    }

    #[test]
    fn deterministic() {
        let pr = params(3, 0.28);
        for kind in [ModelKind::Fm, ModelKind::Nbfm] {
            let a = run_levels(kind, &pr, 7, InitConfig::OnePerSite, SeedSpec::new(9, 3), DEFAULT_MOVE_CAP);
            let b = run_levels(kind, &pr, 7, InitConfig::OnePerSite, SeedSpec::new(9, 3), DEFAULT_MOVE_CAP);
            assert_eq!(a, b);
            let single = run_to_fence(kind, &pr, 5, InitConfig::OnePerSite, SeedSpec::new(9, 3)).unwrap();
            assert_eq!(single.frozen_at_fence, a[4].frozen);
        }
    }

    #[test]
    fn censoring() {
        let pr = params(3, 0.3);
        let r = run_levels(ModelKind::Fm, &pr, 8, InitConfig::OnePerSite, SeedSpec::new(10, 0), 50);
        assert_eq!(r.len(), 8);
        assert!(r.last().unwrap().censored);
        assert!(matches!(
            run_to_fence_capped(ModelKind::Fm, &pr, 8, InitConfig::OnePerSite, SeedSpec::new(10, 0), 50),
            Err(FrogError::Budget(_))
        ));
    }

    #[test]
    fn fast_engine_matches_synchronous_in_law() {
        for (kind, p, fence) in [(ModelKind::Fm, 0.3, 4usize), (ModelKind::Nbfm, 0.3, 5), (ModelKind::Nbfm, 0.2, 5)] {
            let pr = params(3, p);
            let n = 1500;
            let (mut fa, mut fv, mut sa, mut sv) =
                (Moments::default(), Moments::default(), Moments::default(), Moments::default());
            for s in 0..n {
                let f = run_to_fence(kind, &pr, fence as u32, InitConfig::OnePerSite, SeedSpec::new(11, s)).unwrap();
                let y = run_to_fence_sync(kind, &pr, fence, InitConfig::OnePerSite, SeedSpec::new(12, s), u64::MAX);
                fa.push(f.frozen_at_fence as f64);
                fv.push(f.root_visits as f64);
                sa.push(y.frozen_at_fence as f64);
                sv.push(y.root_visits as f64);
            }
            for (x, y) in [(&fa, &sa), (&fv, &sv)] {
                let se = (x.stderr().powi(2) + y.stderr().powi(2)).sqrt();
                assert!((x.mean() - y.mean()).abs() < 4.0 * se + 1e-12, "{kind:?}: {} vs {}", x.mean(), y.mean());
            }
        }
    }
}
