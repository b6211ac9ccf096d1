//! End-to-end acceptance checks. Each test writes one `criterion N: PASS|FAIL`
//! line to stderr (outside libtest capture) and then asserts.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;

use frogsim_core::certify::{certify_tail_bound, eval_f, eval_g_at_lambda, Variant};
use frogsim_core::estimate::{bisect_drift, Protocol};
use frogsim_core::nbbrw::{
    reflected_visit_series, simulate_brw, spectral_certificate, spectral_report, BrwConfig, BrwVariant, Classification,
    Cutoff, ParticleType,
};
use frogsim_core::seed::{run_trials, SeedSpec};
use frogsim_core::sfm::{apply_operator, poisson_zero_check, SfmConfig};
use frogsim_core::star::{pmf_u_prime, pmf_u_tilde, sample_u_exploration, simulate_modified_m, u_double_prime_bound};
use frogsim_core::stats::{total_variation, Moments};
use frogsim_core::tree_sim::{run_levels, InitConfig, ModelKind, DEFAULT_MOVE_CAP};
use frogsim_core::{derive_params, FrogError, Prob};

const G_MAX_BOUND: f64 = 0.9963 + 1e-4;
const G_EPSILON: f64 = 0.003;
const G_SECONDS: u64 = 10;
const GT_ROOTS: u64 = 70;
const GT_ARGMAX: f64 = 0.992241;
const GT_MAX: f64 = 0.998772;
const GT_TOL: f64 = 1e-4;
const GT_EPSILON: f64 = 0.001;
const GT_SECONDS: u64 = 60;
const TV_BOUND: f64 = 0.01;
const PMF_TRIALS: u64 = 1_000_000;
const PMF_SECONDS: u64 = 120;
const BOUNDARY_TOL: f64 = 1e-12;
const VISIT_TRIALS: u64 = 100_000;
const VISIT_SECONDS: u64 = 300;
const EIGEN_TOL: f64 = 1e-10;
const POI_TRIALS: u64 = 100_000;
const SIGMAS: f64 = 3.0;
const DRIFT_SECONDS: u64 = 2 * 3600;

static SERIAL: Mutex<()> = Mutex::new(());

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {n:>2} [{name}]: {verdict} {detail}");
    assert!(pass, "criterion {n} failed: {detail}");
}

fn frogsim(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_frogsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("FROGSIM_SEED")
        .output()
        .expect("binary runs")
}

fn overlaps(iv: &Value, target: f64, tol: f64) -> bool {
    let (lo, hi) = (iv[0].as_f64().unwrap(), iv[1].as_f64().unwrap());
    lo <= target + tol && hi >= target - tol
}

#[test]
fn c01_certificate_g() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let o = frogsim(&["certify", "--variant", "g"], dir.path());
    let secs = t.elapsed();
    let c: Value = serde_json::from_slice(&o.stdout).unwrap();
    let roots = c["root_count"].as_u64().unwrap();
    let max_hi = c["max_interval"][1].as_f64().unwrap();
    let eps = c["epsilon"].as_f64().unwrap();
    let pass = o.status.success()
        && roots == 6
        && max_hi <= G_MAX_BOUND
        && eps >= G_EPSILON
        && secs < Duration::from_secs(G_SECONDS);
    report(1, "certificate g", pass, &format!("roots={roots} max<={max_hi:.8} eps={eps} time={secs:.2?}"));
}

#[test]
fn c02_certificate_gtilde() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let o = frogsim(&["certify", "--variant", "gtilde"], dir.path());
    let secs = t.elapsed();
    let c: Value = serde_json::from_slice(&o.stdout).unwrap();
    let roots = c["root_count"].as_u64().unwrap();
    let eps = c["epsilon"].as_f64().unwrap();
    let checks = [
        ("roots", roots == GT_ROOTS),
        ("argmax", overlaps(&c["argmax_interval"], GT_ARGMAX, GT_TOL)),
        ("max", overlaps(&c["max_interval"], GT_MAX, GT_TOL)),
        ("epsilon", eps >= GT_EPSILON),
        ("time", secs < Duration::from_secs(GT_SECONDS)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    report(
        2,
        "certificate g-tilde",
        o.status.success() && failed.is_empty(),
        &format!(
            "roots={roots} argmax={} max={} eps={eps} time={secs:.2?} failed={failed:?}",
            c["argmax_interval"], c["max_interval"]
        ),
    );
}

#[test]
fn c03_change_of_variables() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = SeedSpec::new(3, 0).rng();
    let mut bad = Vec::new();
    for _ in 0..100 {
        let lambda = rng.random_range(0.0..100.0);
        for v in [Variant::G, Variant::Gtilde] {
            let f = eval_f(lambda, v).unwrap();
            let g = eval_g_at_lambda(lambda, v);
            if !(f.lo_f64() <= g.hi_f64() && g.lo_f64() <= f.hi_f64()) {
                bad.push((lambda, v.name()));
            }
        }
    }
    report(3, "change of variables", bad.is_empty(), &format!("200 enclosure pairs, disjoint={bad:?}"));
}

#[test]
fn c04_exact_vs_simulated_pmf() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for (m, p) in [(3, Prob::ratio(5, 17)), (4, Prob::ratio(27, 100))] {
        let t = Instant::now();
        for lambda in [0.0, 1.0, 5.0] {
            let exact = if m == 3 { pmf_u_prime(lambda) } else { pmf_u_tilde(lambda) }.unwrap();
            let sim = simulate_modified_m(m, &p, lambda, PMF_TRIALS, 40 + m as u64).unwrap();
            worst = worst.max(total_variation(&exact.probs, &sim.probs));
        }
        slowest = slowest.max(t.elapsed());
    }
    let pass = worst <= TV_BOUND && slowest < Duration::from_secs(PMF_SECONDS);
    report(4, "exact vs simulated pmf", pass, &format!("max TV={worst:.5} slowest law={slowest:.2?}"));
}

#[test]
fn c05_spectral_boundary() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let class = |p: Prob| spectral_report(&p).unwrap().classification;
    let transient = [Prob::Float(0.05), Prob::Float(0.1), Prob::ratio(1, 6)]
        .into_iter()
        .all(|p| class(p) == Classification::Transient);
    let recurrent =
        [Prob::Float(1.0 / 6.0 + 1e-9), Prob::Float(0.2)].into_iter().all(|p| class(p) == Classification::Recurrent);
    let r = spectral_report(&Prob::ratio(1, 6)).unwrap();
    let nan = f64::NAN;
    let (mu, f_sum) = (r.mu.unwrap_or(nan), r.f2_1.unwrap_or(nan) + r.f3_1.unwrap_or(nan));
    let mu_ok = (mu - 1.0 / 3.0).abs() <= BOUNDARY_TOL;
    let f_ok = (f_sum - 0.5).abs() <= BOUNDARY_TOL;
    report(5, "spectral boundary", transient && recurrent && mu_ok && f_ok, &format!("mu(1/6)={mu} f2+f3={f_sum}"));
}

#[test]
fn c06_visit_count_oracles() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for p in [Prob::Float(0.05), Prob::Float(0.10), Prob::ratio(1, 6)] {
        let mu = spectral_report(&p).unwrap().mu.expect("transient side has mu");
        for (variant, want) in [
            (BrwVariant::Killed, mu),
            (BrwVariant::Reflected, reflected_visit_series(&p, 1, ParticleType::One).unwrap()),
        ] {
            let mut cfg = BrwConfig::new(p.clone(), variant, vec![(1, ParticleType::One)], 400);
            cfg.cutoff = Cutoff::Compensate(40);
            let est = run_trials(6, 0, VISIT_TRIALS, |s| simulate_brw(&cfg, s).map(|o| o.estimate()));
            let m = Moments::from_iter(est.into_iter().map(|x| x.unwrap()));
            let ok = (m.mean() - want).abs() <= SIGMAS * m.stderr();
            pass &= ok;
            lines.push(format!("p={p} {variant:?}: {:.5}+-{:.5} vs {want:.5}", m.mean(), m.stderr()));
        }
    }
    let secs = t.elapsed();
    pass &= secs < Duration::from_secs(VISIT_SECONDS);
    report(6, "visit-count oracles", pass, &format!("{} time={secs:.2?}", lines.join("; ")));
}

#[test]
fn c07_eigenvector_residuals() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = SeedSpec::new(7, 0).rng();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = Prob::Float(rng.random_range(1e-4..=1.0 / 6.0));
        let c = spectral_certificate(&p).unwrap();
        worst = c.residuals.iter().fold(worst, |w, r| w.max(r.abs()));
    }
    report(7, "eigenvector residuals", worst <= EIGEN_TOL, &format!("max |residual|={worst:.3e}"));
}

#[test]
fn c08_poisson_zero_identity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let params = derive_params(3, Prob::ratio(5, 17)).unwrap();
    let samples = apply_operator(1.0, &params, POI_TRIALS, 8).unwrap();
    let (emp, pred, se) = poisson_zero_check(&samples, &params, 1.0);
    report(
        8,
        "P(A Poi = 0) identity",
        (emp - pred).abs() <= SIGMAS * se,
        &format!("empirical={emp:.5} predicted={pred:.5} se={se:.5}"),
    );
}

#[test]
fn c09_critical_drift() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let cases = [
        (ModelKind::Fm, 3, (0.20, 0.30), (0.23, 0.27)),
        (ModelKind::Nbfm, 3, (0.22, 0.32), (0.25, 0.29)),
        (ModelKind::Nbfm, 4, (0.20, 0.30), (0.226, 0.266)),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for (kind, d, range, (lo, hi)) in cases {
        match bisect_drift(kind, d, range, 0.01, &Protocol::standard(), 2024) {
            Ok(e) => {
                let ok = lo <= e.point && e.point <= hi;
                pass &= ok;
                lines.push(format!("{} d={d}: {:.4} in [{:.4}, {:.4}]", kind.name(), e.point, e.p_low, e.p_high));
            }
            Err(err) => {
                pass = false;
                lines.push(format!("{} d={d}: {err}", kind.name()));
            }
        }
    }
    let secs = t.elapsed();
    pass &= secs < Duration::from_secs(DRIFT_SECONDS);
    report(9, "critical drift", pass, &format!("{} time={secs:.2?}", lines.join("; ")));
}

fn mean_gap_ok(lo: &Moments, hi: &Moments) -> bool {
    lo.mean() <= hi.mean() + SIGMAS * (lo.stderr().powi(2) + hi.stderr().powi(2)).sqrt()
}

#[test]
fn c10_dominance() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut notes = Vec::new();
    let mut pass = true;

    // Root visits of SFM, NBFM and FM at a common fence.
    let (d, fence, trials) = (3u32, 8u32, 2000u64);
    let params = derive_params(d, Prob::Float(0.25)).unwrap();
    let init = InitConfig::Poisson(1.0);
    let last = |kind| {
        run_trials(10, 0, trials, |s| *run_levels(kind, &params, fence, init, s, DEFAULT_MOVE_CAP).last().unwrap())
    };
    let (fm, nb) = (last(ModelKind::Fm), last(ModelKind::Nbfm));
    let sfm_cfg = SfmConfig { params: params.clone(), lambda_init: 1.0, fence };
    let sfm = run_trials(10, 0, trials, |s| frogsim_core::sfm::simulate_sfm(&sfm_cfg, s).unwrap().root_visits);
    let v = |xs: &[frogsim_core::tree_sim::LevelPoint]| Moments::from_iter(xs.iter().map(|x| x.root_visits as f64));
    let a = |xs: &[frogsim_core::tree_sim::LevelPoint]| Moments::from_iter(xs.iter().map(|x| x.frozen as f64));
    let vs = Moments::from_iter(sfm.iter().map(|x| *x as f64));
    let ok = mean_gap_ok(&vs, &v(&nb)) && mean_gap_ok(&v(&nb), &v(&fm)) && mean_gap_ok(&a(&nb), &a(&fm));
    pass &= ok;
    notes.push(format!(
        "V sfm/nbfm/fm={:.3}/{:.3}/{:.3} A nbfm/fm={:.2}/{:.2}",
        vs.mean(),
        v(&nb).mean(),
        v(&fm).mean(),
        a(&nb).mean(),
        a(&fm).mean()
    ));

    // NBFM(d, p) <= RNBBRW(d, p) <= RNBBRW(p) at p <= 1/6, common absorbing level.
    for (d, level) in [(5u32, 6u32), (20, 4)] {
        let p = Prob::Float(0.15);
        let pr = derive_params(d, p.clone()).unwrap();
        let nbfm = run_trials(11, 0, trials, |s| {
            run_levels(ModelKind::Nbfm, &pr, level, InitConfig::OnePerSite, s, DEFAULT_MOVE_CAP)
                .last()
                .unwrap()
                .root_visits
        });
        let brw = |variant| {
            let mut cfg = BrwConfig::new(p.clone(), variant, vec![(0, ParticleType::Two)], 10_000);
            cfg.cutoff = Cutoff::Absorb(level as u64);
            run_trials(11, 0, trials, |s| simulate_brw(&cfg, s).unwrap().total_visits)
        };
        let m = |xs: &[u64]| Moments::from_iter(xs.iter().map(|x| *x as f64));
        let (x, y, z) = (m(&nbfm), m(&brw(BrwVariant::ReflectedD(d))), m(&brw(BrwVariant::Reflected)));
        let ok = mean_gap_ok(&x, &y) && mean_gap_ok(&y, &z);
        pass &= ok;
        notes.push(format!("d={d}: nbfm/rnbbrw(d)/rnbbrw={:.4}/{:.4}/{:.4}", x.mean(), y.mean(), z.mean()));
    }

    // U'' <= U trial by trial.
    let pr = derive_params(10, Prob::Float(0.25)).unwrap();
    let u = sample_u_exploration(&pr, 2.0, 20_000, 12, false, false).counts;
    let u2 = sample_u_exploration(&pr, 2.0, 20_000, 12, true, false).counts;
    let trialwise = u.iter().zip(&u2).all(|(a, b)| b <= a);
    pass &= trialwise;
    notes.push(format!("U''<=U trialwise={trialwise}"));

    // P(U'' = j) bound for j = 1..4 at (50, 0.2, 5).
    let pr = derive_params(50, Prob::Float(0.2)).unwrap();
    let n = 100_000u64;
    let r = sample_u_exploration(&pr, 5.0, n, 13, true, false);
    let bound = u_double_prime_bound(&pr, 5.0);
    let mut worst = f64::NEG_INFINITY;
    for j in 1..=4 {
        let q = r.probs.get(j).copied().unwrap_or(0.0);
        let se = (q * (1.0 - q) / n as f64).sqrt();
        worst = worst.max(q - bound - SIGMAS * se);
    }
    pass &= worst <= 0.0;
    notes.push(format!("P(U''=j) bound={bound:.3e} worst excess={worst:.3e}"));
    report(10, "dominance", pass, &notes.join("; "));
}

#[test]
fn c11_tail_bound() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let ok = certify_tail_bound(&Prob::Float(0.2));
    let regime = matches!(certify_tail_bound(&Prob::Float(0.1)), Err(FrogError::Regime(_)));
    let detail = match &ok {
        Ok(r) => format!(
            "delta={} lambda0={} d0={} margin=[{:.3e}, {:.3e}] regime error at 0.1={regime}",
            r.delta, r.lambda0, r.d0, r.margin.0, r.margin.1
        ),
        Err(e) => format!("{e}"),
    };
    let pass = ok.as_ref().is_ok_and(|r| r.delta > 0.0 && r.margin.0 > 0.0) && regime;
    report(11, "tail bound", pass, &detail);
}

#[test]
fn c12_determinism() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let root = tempfile::tempdir().unwrap();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "fm",
            vec![
                "simulate", "--model", "fm", "--d", "3", "--p", "0.28", "--levels", "8", "--trials", "300", "--seed",
                "1",
            ],
        ),
        (
            "nbfm",
            vec![
                "simulate", "--model", "nbfm", "--d", "4", "--p", "0.26", "--levels", "8", "--trials", "300", "--seed",
                "2",
            ],
        ),
        (
            "sfm",
            vec![
                "simulate", "--model", "sfm", "--d", "3", "--p", "5/17", "--levels", "6", "--trials", "300", "--seed",
                "3",
            ],
        ),
        ("iterate", vec!["iterate", "--d", "3", "--p", "5/17", "--iters", "4", "--trials", "5000", "--seed", "4"]),
        (
            "estimate",
            vec![
                "estimate",
                "--model",
                "nbfm",
                "--d",
                "3",
                "--range",
                "0.15:0.45",
                "--tol",
                "0.1",
                "--levels",
                "9",
                "--split",
                "9",
                "--trials-low",
                "300",
                "--trials-high",
                "300",
                "--seed",
                "5",
            ],
        ),
    ];
    let mut bad = Vec::new();
    for (name, args) in &runs {
        let dir = root.path().join(name);
        let mut a = args.clone();
        let out = dir.to_str().unwrap().to_string();
        a.extend(["--out", out.as_str()]);
        if !frogsim(&a, root.path()).status.success() {
            bad.push(format!("{name}: run failed"));
            continue;
        }
        let o = frogsim(&["replay", "--manifest", dir.join("manifest.json").to_str().unwrap()], root.path());
        if !o.status.success() || String::from_utf8_lossy(&o.stdout).contains("DIFFER") {
            bad.push(format!("{name}: replay differs"));
        }
    }
    report(12, "determinism", bad.is_empty(), &format!("{} commands replayed, problems={bad:?}", runs.len()));
}
