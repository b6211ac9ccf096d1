use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use frogsim_core::certify::{certified_max, certify_tail_bound, Variant};
use frogsim_core::estimate::{bisect_drift, level_curve_with_runs, Protocol};
use frogsim_core::io::{
    merge_series, read_level_csv, trial_records, write_figure_csv, write_jsonl, write_level_csv, write_plot_table,
    write_trajectory_csv, LevelRow, PlotTable,
};
use frogsim_core::nbbrw::spectral_report;
use frogsim_core::sfm::{iterate_operator, sfm_level_curve};
use frogsim_core::star::{pmf_u_prime, pmf_u_tilde};
use frogsim_core::tree_sim::{InitConfig, ModelKind, DEFAULT_MOVE_CAP};
use frogsim_core::{derive_params, FrogError, Prob};

const EXIT_MISMATCH: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_PRECISION: u8 = 4;
const EXIT_REGIME: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "frogsim", version, about = "Frog models with drift on d-ary trees: simulation and certificates")]
struct Cli {
    /// Maximum number of worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
enum Cmd {
    /// Simulate fenced runs and write per-level statistics
    Simulate(SimulateArgs),
    /// Certify the maximum of g or g-tilde, or the tail bound at a drift p
    Certify(CertifyArgs),
    /// Spectral quantities of the non-backtracking branching random walk
    Spectra(SpectraArgs),
    /// Exact law of U' or U-tilde at a given lambda
    Pmf(PmfArgs),
    /// Bisect for the critical drift of FM or NBFM
    Estimate(EstimateArgs),
    /// Iterate the star-graph operator starting from Poi(lambda0)
    Iterate(IterateArgs),
    /// Merge up to three level CSVs into one plot table
    Plotdata(PlotdataArgs),
    /// Re-run a manifest and compare output digests
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Fm,
    Nbfm,
    Sfm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum VariantArg {
    G,
    Gtilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PmfVariant {
    Uprime,
    Utilde,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SimulateArgs {
    /// Model to simulate
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Tree degree d >= 2
    #[arg(long)]
    d: u32,
    /// Drift p, as a decimal or an exact ratio such as 5/17
    #[arg(long)]
    p: String,
    /// Fence levels 1..=LEVELS
    #[arg(long, default_value_t = 15)]
    levels: u32,
    /// Trials at every level (default: 1000 up to level 10, 500 beyond)
    #[arg(long)]
    trials: Option<u64>,
    /// Mean dormant frogs per site for sfm
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Particle-move cap per trial before it is censored (fm, nbfm)
    #[arg(long, default_value_t = DEFAULT_MOVE_CAP)]
    move_cap: u64,
    /// Master seed
    #[arg(long, env = "FROGSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CertifyArgs {
    /// Polynomial to certify
    #[arg(long, value_enum, required_unless_present = "tail_bound", conflicts_with = "tail_bound")]
    variant: Option<VariantArg>,
    /// Certify the tail bound at drift --p instead
    #[arg(long, requires = "p")]
    tail_bound: bool,
    /// Drift p for --tail-bound
    #[arg(long)]
    p: Option<String>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SpectraArgs {
    /// Drift p
    #[arg(long)]
    p: String,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct PmfArgs {
    /// Which law
    #[arg(long, value_enum)]
    variant: PmfVariant,
    /// Poisson mean of the leaf frogs
    #[arg(long)]
    lambda: f64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EstimateArgs {
    /// Model, fm or nbfm
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Tree degree d >= 2
    #[arg(long)]
    d: u32,
    /// Search range LO:HI
    #[arg(long)]
    range: String,
    /// Stop when the bracket is narrower than this
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Deepest fence level
    #[arg(long, default_value_t = 15)]
    levels: u32,
    /// Last level run with --trials-low trials
    #[arg(long, default_value_t = 10)]
    split: u32,
    /// Trials per level up to --split
    #[arg(long, default_value_t = 1000)]
    trials_low: u64,
    /// Trials per level beyond --split
    #[arg(long, default_value_t = 500)]
    trials_high: u64,
    /// Master seed
    #[arg(long, env = "FROGSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct IterateArgs {
    /// Tree degree d >= 2
    #[arg(long)]
    d: u32,
    /// Drift p
    #[arg(long)]
    p: String,
    /// Starting Poisson mean
    #[arg(long, default_value_t = 0.0)]
    lambda0: f64,
    /// Number of operator applications
    #[arg(long, default_value_t = 10)]
    iters: u32,
    /// Samples per application
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Master seed
    #[arg(long, env = "FROGSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct PlotdataArgs {
    /// Level CSVs written by simulate, one per series (at most three)
    #[arg(long, num_args = 1..=3, required = true)]
    input: Vec<PathBuf>,
    /// Also write plot.svg
    #[arg(long)]
    svg: bool,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ReplayArgs {
    /// Manifest written by an earlier run
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for the replayed outputs (default: replay/ next to the manifest)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Simulate(_) => "simulate",
            Cmd::Certify(_) => "certify",
            Cmd::Spectra(_) => "spectra",
            Cmd::Pmf(_) => "pmf",
            Cmd::Estimate(_) => "estimate",
            Cmd::Iterate(_) => "iterate",
            Cmd::Plotdata(_) => "plotdata",
            Cmd::Replay(_) => "replay",
        }
    }

    fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Cmd::Simulate(a) => Some(&mut a.out),
            Cmd::Certify(a) => Some(&mut a.out),
            Cmd::Spectra(a) => Some(&mut a.out),
            Cmd::Pmf(a) => Some(&mut a.out),
            Cmd::Estimate(a) => Some(&mut a.out),
            Cmd::Iterate(a) => Some(&mut a.out),
            Cmd::Plotdata(a) => Some(&mut a.out),
            Cmd::Replay(_) => None,
        }
    }

    fn seed_mut(&mut self) -> Option<&mut u64> {
        match self {
            Cmd::Simulate(a) => Some(&mut a.seed),
            Cmd::Estimate(a) => Some(&mut a.seed),
            Cmd::Iterate(a) => Some(&mut a.seed),
            _ => None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command_line: Vec<String>,
    subcommand: String,
    config: serde_json::Value,
    master_seed: Option<u64>,
    version: String,
    wall_time_s: f64,
    /// Flagged when some trials were censored by the move cap.
    partial: bool,
    /// File name to sha256 of its bytes.
    outputs: BTreeMap<String, String>,
}

#[derive(Debug)]
enum CliError {
    Core(FrogError),
    Usage(String),
    Io(std::io::Error),
    Mismatch,
}

impl From<FrogError> for CliError {
    fn from(e: FrogError) -> CliError {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(FrogError::Budget(_)) => EXIT_BUDGET,
            CliError::Core(FrogError::Precision(_)) => EXIT_PRECISION,
            CliError::Core(FrogError::Regime(_)) => EXIT_REGIME,
            CliError::Mismatch => EXIT_MISMATCH,
            _ => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(s) => write!(f, "{s}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Mismatch => write!(f, "replayed outputs differ from the manifest"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Files written by one command, plus whether the run is partial.
struct Outputs {
    files: Vec<String>,
    partial: bool,
}

fn parse_prob(s: &str) -> CliResult<Prob> {
    s.parse::<Prob>().map_err(CliError::from)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), &text)?;
    print!("{text}");
    Ok(name.to_string())
}

fn create<P: AsRef<Path>>(path: P) -> CliResult<fs::File> {
    Ok(fs::File::create(path)?)
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<Outputs> {
    let prob = parse_prob(&a.p)?;
    let params = derive_params(a.d, prob.clone())?;
    if a.levels == 0 {
        return Err(CliError::Usage("--levels must be >= 1".into()));
    }
    let protocol = Protocol { levels: a.levels, ..Protocol::standard() };
    let trials = |ell: u32| a.trials.unwrap_or_else(|| protocol.trials(ell));
    let levels: Vec<u32> = (1..=a.levels).collect();
    let (stats, runs) = match a.model {
        ModelArg::Sfm => sfm_level_curve(&params, a.lambda, &levels, trials, a.seed)?,
        m => {
            let kind = if m == ModelArg::Fm { ModelKind::Fm } else { ModelKind::Nbfm };
            if levels.len() == 1 {
                let (mut s, r) =
                    level_curve_with_runs(kind, &params, &[1, 1], trials, InitConfig::OnePerSite, a.seed, a.move_cap)?;
                s.truncate(1);
                (s, r)
            } else {
                level_curve_with_runs(kind, &params, &levels, trials, InitConfig::OnePerSite, a.seed, a.move_cap)?
            }
        }
    };
    let model = match a.model {
        ModelArg::Fm => "fm",
        ModelArg::Nbfm => "nbfm",
        ModelArg::Sfm => "sfm",
    };
    let p_label = prob.to_string();
    let rows: Vec<LevelRow> = stats.iter().map(|s| LevelRow::new(model, a.d, &p_label, s)).collect();
    write_level_csv(create(a.out.join("levels.csv"))?, &rows)?;
    write_figure_csv(create(a.out.join("figure.csv"))?, &rows)?;
    write_jsonl(
        std::io::BufWriter::new(create(a.out.join("trials.jsonl"))?),
        &trial_records(model, a.d, &p_label, &runs),
    )?;
    let partial = stats.iter().any(|s| s.censored > 0);
    Ok(Outputs { files: vec!["levels.csv".into(), "figure.csv".into(), "trials.jsonl".into()], partial })
}

#[derive(Serialize)]
struct CertificateJson {
    variant: &'static str,
    root_count: u32,
    max_interval: [f64; 2],
    argmax_interval: [f64; 2],
    epsilon: f64,
    precision_bits: u32,
    certified: bool,
}

fn cmd_certify(a: &CertifyArgs) -> CliResult<Outputs> {
    let name = if a.tail_bound {
        let p = parse_prob(a.p.as_deref().unwrap_or_default())?;
        write_json(&a.out, "tail_bound.json", &certify_tail_bound(&p)?)?
    } else {
        let v = match a.variant {
            Some(VariantArg::G) => Variant::G,
            Some(VariantArg::Gtilde) => Variant::Gtilde,
            None => return Err(CliError::Usage("need --variant or --tail-bound".into())),
        };
        let c = certified_max(&v.g())?;
        let json = CertificateJson {
            variant: v.name(),
            root_count: c.root_count,
            max_interval: [c.max_value.0, c.max_value.1],
            argmax_interval: [c.max_location.0, c.max_location.1],
            epsilon: c.epsilon_num as f64 / 1e6,
            precision_bits: c.precision_bits,
            certified: c.certified,
        };
        write_json(&a.out, "certificate.json", &json)?
    };
    Ok(Outputs { files: vec![name], partial: false })
}

fn cmd_spectra(a: &SpectraArgs) -> CliResult<Outputs> {
    let r = spectral_report(&parse_prob(&a.p)?)?;
    Ok(Outputs { files: vec![write_json(&a.out, "spectra.json", &r)?], partial: false })
}

fn cmd_pmf(a: &PmfArgs) -> CliResult<Outputs> {
    let pmf = match a.variant {
        PmfVariant::Uprime => pmf_u_prime(a.lambda)?,
        PmfVariant::Utilde => pmf_u_tilde(a.lambda)?,
    };
    Ok(Outputs { files: vec![write_json(&a.out, "pmf.json", &pmf)?], partial: false })
}

fn cmd_estimate(a: &EstimateArgs) -> CliResult<Outputs> {
    let kind = match a.model {
        ModelArg::Fm => ModelKind::Fm,
        ModelArg::Nbfm => ModelKind::Nbfm,
        ModelArg::Sfm => return Err(CliError::Usage("estimate supports fm and nbfm".into())),
    };
    let (lo, hi) = a
        .range
        .split_once(':')
        .and_then(|(l, h)| Some((l.trim().parse::<f64>().ok()?, h.trim().parse::<f64>().ok()?)))
        .ok_or_else(|| CliError::Usage(format!("--range must be LO:HI, got {:?}", a.range)))?;
    let protocol = Protocol { levels: a.levels, split: a.split, trials_low: a.trials_low, trials_high: a.trials_high };
    let est = bisect_drift(kind, a.d, (lo, hi), a.tol, &protocol, a.seed)?;
    Ok(Outputs { files: vec![write_json(&a.out, "estimate.json", &est)?], partial: false })
}

fn cmd_iterate(a: &IterateArgs) -> CliResult<Outputs> {
    let params = derive_params(a.d, parse_prob(&a.p)?)?;
    let pts = iterate_operator(a.lambda0, &params, a.iters, a.trials, a.seed)?;
    write_trajectory_csv(create(a.out.join("trajectory.csv"))?, &pts)?;
    Ok(Outputs { files: vec!["trajectory.csv".into()], partial: false })
}

fn cmd_plotdata(a: &PlotdataArgs) -> CliResult<Outputs> {
    let mut series = Vec::new();
    for path in &a.input {
        let f = fs::File::open(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        series.push(read_level_csv(f)?);
    }
    let table = merge_series(&series)?;
    write_plot_table(create(a.out.join("plot.csv"))?, &table)?;
    let mut files = vec!["plot.csv".to_string()];
    if a.svg {
        fs::write(a.out.join("plot.svg"), render_svg(&table))?;
        files.push("plot.svg".into());
    }
    Ok(Outputs { files, partial: false })
}

/// `s_ell` against `ell`, one polyline per series, on a log scale.
fn render_svg(t: &PlotTable) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];
    let pts: Vec<(u32, f64)> = t
        .rows
        .iter()
        .flat_map(|(ell, cells)| cells.iter().flatten().map(move |c| (*ell, c[2])))
        .filter(|x| x.1 > 0.0)
        .collect();
    let (lmin, lmax) = pts.iter().fold((u32::MAX, 0), |(a, b), x| (a.min(x.0), b.max(x.0)));
    let (ymin, ymax) =
        pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x.1.ln()), b.max(x.1.ln())));
    let sx = |l: u32| M + (W - 2.0 * M) * (l.saturating_sub(lmin)) as f64 / (lmax.saturating_sub(lmin)).max(1) as f64;
    let sy = |y: f64| H - M - (H - 2.0 * M) * (y.ln() - ymin) / (ymax - ymin).max(1e-9);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{M}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{t}\" text-anchor=\"middle\">level</text>\n\
         <text x=\"12\" y=\"{cy}\" transform=\"rotate(-90 12 {cy})\" text-anchor=\"middle\">s (log scale)</text>\n",
        b = H - M,
        r = W - M,
        cx = W / 2.0,
        t = H - 10.0,
        cy = H / 2.0,
    );
    for (i, label) in t.labels.iter().enumerate() {
        let line: Vec<String> = t
            .rows
            .iter()
            .filter_map(|(ell, cells)| {
                cells[i].filter(|c| c[2] > 0.0).map(|c| format!("{:.1},{:.1}", sx(*ell), sy(c[2])))
            })
            .collect();
        let color = COLORS[i % COLORS.len()];
        svg +=
            &format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n", line.join(" "));
        svg += &format!("<text x=\"{}\" y=\"{}\" fill=\"{color}\">{label}</text>\n", M + 10.0, M + 16.0 * i as f64);
    }
    svg + "</svg>\n"
}

fn sha256_file(path: &Path) -> CliResult<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn execute(cmd: &Cmd, command_line: Vec<String>) -> CliResult<bool> {
    let started = Instant::now();
    let mut cmd = cmd.clone();
    let out_dir = cmd.out_mut().map(|p| p.clone());
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir)?;
    }
    let res = match &cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Certify(a) => cmd_certify(a),
        Cmd::Spectra(a) => cmd_spectra(a),
        Cmd::Pmf(a) => cmd_pmf(a),
        Cmd::Estimate(a) => cmd_estimate(a),
        Cmd::Iterate(a) => cmd_iterate(a),
        Cmd::Plotdata(a) => cmd_plotdata(a),
        Cmd::Replay(a) => return cmd_replay(a),
    }?;
    let dir = out_dir.expect("every non-replay command has --out");
    let mut outputs = BTreeMap::new();
    for f in &res.files {
        outputs.insert(f.clone(), sha256_file(&dir.join(f))?);
    }
    let manifest = RunManifest {
        command_line,
        subcommand: cmd.name().into(),
        master_seed: cmd.seed_mut().map(|s| *s),
        config: serde_json::to_value(&cmd)?,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        partial: res.partial,
        outputs,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(!res.partial)
}

fn cmd_replay(a: &ReplayArgs) -> CliResult<bool> {
    let text = fs::read_to_string(&a.manifest)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.manifest.display())))?;
    let m: RunManifest = serde_json::from_str(&text)?;
    let argv = std::iter::once("frogsim".to_string()).chain(m.command_line.iter().cloned());
    let mut cmd = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?.cmd;
    if matches!(cmd, Cmd::Replay(_)) {
        return Err(CliError::Usage("cannot replay a replay".into()));
    }
    let dir = a.out.clone().unwrap_or_else(|| a.manifest.parent().unwrap_or(Path::new(".")).join("replay"));
    *cmd.out_mut().expect("checked above") = dir.clone();
    if let (Some(s), Some(want)) = (cmd.seed_mut(), m.master_seed) {
        *s = want;
    }
    let complete = execute(&cmd, m.command_line.clone())?;
    let mut same = true;
    for (name, digest) in &m.outputs {
        let got = sha256_file(&dir.join(name))?;
        let ok = &got == digest;
        same &= ok;
        println!("{} {name}", if ok { "MATCH" } else { "DIFFER" });
    }
    if !same {
        return Err(CliError::Mismatch);
    }
    Ok(complete)
}

fn run(args: Vec<String>) -> u8 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return EXIT_USAGE;
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool already initialised");
    }
    match execute(&cli.cmd, args.into_iter().skip(1).collect()) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("warning: some trials hit the move cap; outputs are partial");
            EXIT_BUDGET
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args().collect()))
}
