//! Command-line front end. Structured artifacts are JSON, curves are CSV.
//!
//! Every JSON artifact carries the `code_hash` of the alist it was computed
//! from; commands that consume artifacts refuse to mix codes. An optional run
//! manifest records which files each stage wrote, plus timestamps, so the
//! artifacts themselves stay byte-identical across reruns.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::code::{code_hash, load_alist, random_regular, TannerGraph};
use crate::decoder::{DecoderConfig, ErrorPattern, DEFAULT_MAX_ITERATIONS};
use crate::enumeration::{
    Checkpoint, EnumerationOptions, EnumerationOutcome, EnumerationResult, Enumerator,
    DEFAULT_CHECKPOINT_INTERVAL,
};
use crate::error::Error;
use crate::estimation::{log_grid, rate_point, Estimator, EstimatorInput};
use crate::failure::{
    certify_trapping_set, check_trapping_condition, FailureKind, TrappingSetReport,
};
use crate::simulation::{
    calibrate_n0, choose_n0, estimate_m, simulate, MAveraging, MEstimate, SimConfig, SimResult,
};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_BUDGET: u8 = 4;

pub const ESTIMATE_HEADER: &str = "epsilon,p_j,fer_lower,fer_upper,ber_estimate";
pub const SIMULATE_HEADER: &str = "epsilon,frames,frame_errors,fer,fer_ci_low,fer_ci_high,ber";

#[derive(Parser, Debug)]
#[command(
    name = "ldpc-floor",
    version,
    about = "Error-floor estimation for LDPC codes under hard-decision decoding"
)]
pub struct Cli {
    /// Record stage outputs in this run manifest (created if missing).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print basic statistics of a code.
    Info {
        #[arg(long)]
        code: PathBuf,
    },
    /// Write a random regular code in alist format.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        dv: usize,
        #[arg(long, default_value_t = 6)]
        dc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        allow_4cycles: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find J and |E_J| by exhaustive search over increasing weights.
    Enumerate(EnumerateArgs),
    /// Evaluate FER_L, FER_U and BER over a crossover grid.
    Estimate(EstimateArgs),
    /// Monte Carlo FER/BER over the BSC.
    Simulate(SimulateArgs),
    /// Choose N0 by matching FER_U(N) to simulated FERs.
    #[command(name = "calibrate-n0")]
    CalibrateN0(CalibrateArgs),
    /// Estimate M, the mean residual error weight for weight-N0 inputs.
    #[command(name = "estimate-m")]
    EstimateM(EstimateMArgs),
    /// Check the trapping-set condition for a set and certify it by decoding.
    #[command(name = "check-ts")]
    CheckTs(CheckTsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecoderKind {
    Ga,
    Mb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MMode {
    Failures,
    AllTrials,
}

impl From<MMode> for MAveraging {
    fn from(m: MMode) -> Self {
        match m {
            MMode::Failures => MAveraging::Failures,
            MMode::AllTrials => MAveraging::AllTrials,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct CodeArgs {
    #[arg(long)]
    pub code: PathBuf,
    #[arg(long, value_enum, default_value = "ga")]
    pub decoder: DecoderKind,
    /// Order for `mb`: an integer, or a file with one order per variable node.
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    /// Worker threads.
    #[arg(long, env = "LDPC_FLOOR_WORKERS", default_value_t = 1)]
    pub workers: usize,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    #[arg(long)]
    pub max_weight: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to keep progress; defaults to `<out>.ckpt` when `--out` is set.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CHECKPOINT_INTERVAL)]
    pub checkpoint_interval: u64,
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after testing this many patterns (leaves a checkpoint).
    #[arg(long, hide = true)]
    pub stop_after: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Enumeration result JSON.
    #[arg(long)]
    pub from: PathBuf,
    #[arg(long, required_unless_present = "calibration")]
    pub n0: Option<usize>,
    /// Calibration JSON to take N0 from.
    #[arg(long, conflicts_with = "n0")]
    pub calibration: Option<PathBuf>,
    #[arg(long, required_unless_present = "m_from")]
    pub m_avg: Option<f64>,
    /// estimate-m JSON to take M from.
    #[arg(long, conflicts_with = "m_avg")]
    pub m_from: Option<PathBuf>,
    /// Which average from `--m-from` to use.
    #[arg(long, value_enum, default_value = "failures")]
    pub m_mode: MMode,
    /// `start:stop:points[,log|,lin]`
    #[arg(long)]
    pub eps: String,
    /// Caps N for FER_L/FER_U; `n` stands for the block length. Defaults to N0.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Vec<String>,
    /// Output CSV. With several N values, `_N<value>` is appended to the stem.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Comma-separated crossover probabilities, or a `start:stop:points[,log|,lin]` grid.
    #[arg(long)]
    pub eps: String,
    #[arg(long, default_value_t = 100)]
    pub min_frame_errors: u64,
    #[arg(long, default_value_t = 100_000_000)]
    pub max_frames: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the full results, with input-weight histograms, as JSON.
    #[arg(long)]
    pub details: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Enumeration result JSON.
    #[arg(long)]
    pub from: PathBuf,
    /// Code to simulate; must match the enumeration.
    #[arg(long, required_unless_present = "points")]
    pub code: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ga")]
    pub decoder: DecoderKind,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, env = "LDPC_FLOOR_WORKERS", default_value_t = 1)]
    pub workers: usize,
    /// Crossover probabilities to simulate, comma-separated.
    #[arg(long, value_delimiter = ',', required_unless_present = "points")]
    pub eps: Vec<f64>,
    /// Already simulated `eps:fer` pairs; skips simulation.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["eps", "code"])]
    pub points: Vec<String>,
    #[arg(long, default_value_t = 100)]
    pub min_frame_errors: u64,
    #[arg(long, default_value_t = 100_000_000)]
    pub max_frames: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EstimateMArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    #[arg(long, required_unless_present = "calibration")]
    pub n0: Option<usize>,
    #[arg(long, conflicts_with = "n0")]
    pub calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckTsArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Comma-separated 0-based variable indices.
    #[arg(long, value_delimiter = ',')]
    pub set: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerationArtifact {
    pub code_hash: String,
    pub decoder: DecoderConfig,
    pub n: usize,
    pub result: EnumerationResult,
    /// Share of each failure class among the weight-J failures, in percent.
    pub class_percentages: BTreeMap<FailureKind, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub code_hash: String,
    pub decoder: Option<DecoderConfig>,
    pub n: usize,
    pub j: usize,
    pub e_j_count: u64,
    pub n0: usize,
    pub objective: Vec<(usize, f64)>,
    /// (epsilon, fer) pairs used in the objective.
    pub used_points: Vec<(f64, f64)>,
    /// Simulation results, when calibration ran its own simulations.
    pub simulations: Vec<SimResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MArtifact {
    pub code_hash: String,
    pub decoder: DecoderConfig,
    pub n0: usize,
    pub m_avg: f64,
    pub m_failures_only: Option<f64>,
    pub trials: u64,
    pub failures: u64,
    pub seed: u64,
}

impl MArtifact {
    pub fn estimate(&self) -> MEstimate {
        MEstimate {
            n0: self.n0,
            trials: self.trials,
            m_avg: self.m_avg,
            m_failures_only: self.m_failures_only,
            failures: self.failures,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrappingSetArtifact {
    pub code_hash: String,
    pub decoder: DecoderConfig,
    pub report: TrappingSetReport,
    /// `None` when the condition fails and certification does not apply.
    pub certified: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub outputs: Vec<PathBuf>,
    pub finished_unix: u64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub code_hash: String,
    pub decoder: Option<DecoderConfig>,
    pub stage_outputs: BTreeMap<String, StageRecord>,
}

/// What a finished command reports back to the manifest.
struct StageRun {
    stage: &'static str,
    code_hash: Option<String>,
    decoder: Option<DecoderConfig>,
    outputs: Vec<PathBuf>,
    budget_exhausted: bool,
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: Cli) -> crate::Result<u8> {
    let started = Instant::now();
    let stage = match cli.command {
        Command::Info { code } => cmd_info(&code)?,
        Command::Generate {
            n,
            dv,
            dc,
            seed,
            allow_4cycles,
            out,
        } => cmd_generate(n, dv, dc, seed, allow_4cycles, out)?,
        Command::Enumerate(a) => cmd_enumerate(&a)?,
        Command::Estimate(a) => cmd_estimate(&a)?,
        Command::Simulate(a) => cmd_simulate(&a)?,
        Command::CalibrateN0(a) => cmd_calibrate_n0(&a)?,
        Command::EstimateM(a) => cmd_estimate_m(&a)?,
        Command::CheckTs(a) => cmd_check_ts(&a)?,
    };
    let wall = started.elapsed().as_secs_f64();
    info!("{} finished in {wall:.3} s", stage.stage);
    if let Some(path) = &cli.manifest {
        record_stage(path, &stage, wall)?;
    }
    Ok(if stage.budget_exhausted {
        EXIT_BUDGET
    } else {
        0
    })
}

fn record_stage(path: &Path, stage: &StageRun, wall_seconds: f64) -> crate::Result<()> {
    let Some(hash) = &stage.code_hash else {
        return Ok(());
    };
    let mut manifest = if path.exists() {
        let m: RunManifest = read_json(path)?;
        if &m.code_hash != hash {
            return Err(Error::Mismatch(format!(
                "manifest {} belongs to code {}, this stage used {hash}",
                path.display(),
                m.code_hash
            )));
        }
        m
    } else {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            code_hash: hash.clone(),
            decoder: None,
            stage_outputs: BTreeMap::new(),
        }
    };
    if let Some(cfg) = &stage.decoder {
        match &manifest.decoder {
            Some(existing) if existing != cfg => {
                return Err(Error::Mismatch(format!(
                    "manifest {} was produced with a different decoder configuration",
                    path.display()
                )))
            }
            _ => manifest.decoder = Some(cfg.clone()),
        }
    }
    let finished_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    manifest.stage_outputs.insert(
        stage.stage.to_string(),
        StageRecord {
            outputs: stage.outputs.clone(),
            finished_unix,
            wall_seconds,
        },
    );
    write_json(path, &manifest)
}

struct LoadedCode {
    graph: TannerGraph,
    hash: String,
}

fn load_code(path: &Path) -> crate::Result<LoadedCode> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let graph = load_alist(&text)?;
    Ok(LoadedCode {
        graph,
        hash: code_hash(&text),
    })
}

fn decoder_config(
    g: &TannerGraph,
    kind: DecoderKind,
    omega: Option<&str>,
    max_iterations: usize,
) -> crate::Result<DecoderConfig> {
    let cfg = match (kind, omega) {
        (DecoderKind::Ga, None) => DecoderConfig::gallager_a(g),
        (DecoderKind::Ga, Some(_)) => {
            return Err(Error::Config("--omega applies to --decoder mb only".into()));
        }
        (DecoderKind::Mb, None) => {
            return Err(Error::Config("--decoder mb needs --omega".into()));
        }
        (DecoderKind::Mb, Some(s)) => match s.trim().parse::<usize>() {
            Ok(w) => DecoderConfig::mb(g, w)?,
            Err(_) => DecoderConfig::mb_per_node(g, read_orders(Path::new(s))?)?,
        },
    };
    let cfg = cfg.with_max_iterations(max_iterations);
    cfg.validate(g)?;
    Ok(cfg)
}

fn read_orders(path: &Path) -> crate::Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Config(format!("{}: bad order {t:?}", path.display())))
        })
        .collect()
}

impl CodeArgs {
    fn load(&self) -> crate::Result<(LoadedCode, DecoderConfig)> {
        let code = load_code(&self.code)?;
        let cfg = decoder_config(
            &code.graph,
            self.decoder,
            self.omega.as_deref(),
            self.max_iterations,
        )?;
        Ok((code, cfg))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> crate::Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn to_json_text<T: Serialize>(path: &Path, value: &T) -> crate::Result<String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    Ok(inline_number_arrays(&text))
}

/// Puts arrays that hold only numbers (or null) on a single line.
fn inline_number_arrays(pretty: &str) -> String {
    let lines: Vec<&str> = pretty.lines().collect();
    let mut out = String::with_capacity(pretty.len());
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if line.ends_with('[') {
            let mut k = i + 1;
            let mut items = Vec::new();
            while k < lines.len() {
                let t = lines[k].trim();
                if t.starts_with(']') {
                    break;
                }
                let item = t.trim_end_matches(',');
                if item != "null" && item.parse::<f64>().is_err() {
                    break;
                }
                items.push(item);
                k += 1;
            }
            if k < lines.len() && lines[k].trim().starts_with(']') {
                out.push_str(line);
                out.push_str(&items.join(", "));
                out.push_str(lines[k].trim());
                out.push('\n');
                i = k + 1;
                continue;
            }
        }
        out.push_str(line);
        out.push('\n');
        i += 1;
    }
    out
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> crate::Result<()> {
    let text = to_json_text(path, value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `text` to `out`, or stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> crate::Result<Vec<PathBuf>> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Error::io(path, e))?;
            Ok(vec![path.to_path_buf()])
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))?;
            Ok(Vec::new())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> crate::Result<Vec<PathBuf>> {
    let text = to_json_text(out.unwrap_or(Path::new("<stdout>")), value)?;
    emit(out, &text)
}

fn require_same_code(expected: &str, found: &str, what: &Path) -> crate::Result<()> {
    if expected != found {
        return Err(Error::Mismatch(format!(
            "{} was computed for code {found}, expected {expected}",
            what.display()
        )));
    }
    Ok(())
}

/// Parses `start:stop:points[,log|,lin]`, or a comma-separated list when
/// `allow_list` is set.
pub fn parse_eps(spec: &str, allow_list: bool) -> crate::Result<Vec<f64>> {
    let bad = || Error::Precondition(format!("cannot parse crossover grid {spec:?}"));
    let grid = if spec.contains(':') {
        let (range, scale) = match spec.split_once(',') {
            Some((r, s)) => (r, s.trim()),
            None => (spec, "log"),
        };
        let parts: Vec<&str> = range.split(':').collect();
        let [a, b, k] = parts[..] else {
            return Err(bad());
        };
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        let k: usize = k.trim().parse().map_err(|_| bad())?;
        for e in [a, b] {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Epsilon(e));
            }
        }
        match scale {
            "log" => log_grid(a, b, k)?,
            "lin" => match k {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..k)
                    .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
                    .collect(),
            },
            _ => return Err(bad()),
        }
    } else if allow_list {
        spec.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<crate::Result<_>>()?
    } else {
        return Err(bad());
    };
    if grid.is_empty() {
        return Err(bad());
    }
    if let Some(&e) = grid.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::Epsilon(e));
    }
    Ok(grid)
}

fn cmd_info(path: &Path) -> crate::Result<StageRun> {
    let code = load_code(path)?;
    let g = &code.graph;
    let dist = g.degree_distributions();
    let info = serde_json::json!({
        "code_hash": code.hash,
        "n": g.n(),
        "m": g.m(),
        "edges": g.edge_count(),
        "lambda": dist.lambda_coeffs,
        "rho": dist.rho_coeffs,
        "has_4cycles": g.has_4cycles(),
    });
    emit_json(None, &info)?;
    Ok(StageRun {
        stage: "info",
        code_hash: None,
        decoder: None,
        outputs: Vec::new(),
        budget_exhausted: false,
    })
}

fn cmd_generate(
    n: usize,
    dv: usize,
    dc: usize,
    seed: u64,
    allow_4cycles: bool,
    out: Option<PathBuf>,
) -> crate::Result<StageRun> {
    let g = random_regular(n, dv, dc, !allow_4cycles, seed)?;
    let text = g.to_alist();
    let outputs = emit(out.as_deref(), &text)?;
    Ok(StageRun {
        stage: "generate",
        code_hash: Some(code_hash(&text)),
        decoder: None,
        outputs,
        budget_exhausted: false,
    })
}

fn cmd_enumerate(a: &EnumerateArgs) -> crate::Result<StageRun> {
    let (code, cfg) = a.code.load()?;
    let enumerator = Enumerator::new(&code.graph, cfg.clone(), code.hash.clone())?;
    let checkpoint_path = a.checkpoint.clone().or_else(|| {
        a.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".ckpt");
            PathBuf::from(s)
        })
    });
    let opts = EnumerationOptions {
        checkpoint_interval: a.checkpoint_interval,
        checkpoint_path: checkpoint_path.clone(),
        stop_after: a.stop_after,
        ..EnumerationOptions::new(a.max_weight, a.code.workers)
    };
    let resume = a.resume.as_deref().map(Checkpoint::load).transpose()?;
    if let Some(ck) = &resume {
        if ck.max_weight != a.max_weight.min(code.graph.n()) {
            return Err(Error::Mismatch(format!(
                "checkpoint was written for --max-weight {}",
                ck.max_weight
            )));
        }
    }
    let mut stage = StageRun {
        stage: "enumerate",
        code_hash: Some(code.hash.clone()),
        decoder: Some(cfg.clone()),
        outputs: Vec::new(),
        budget_exhausted: false,
    };
    match enumerator.run(&opts, resume)? {
        EnumerationOutcome::Interrupted(ck) => {
            eprintln!(
                "stopped at weight {} rank {}; resume with --resume {}",
                ck.weight,
                ck.next_rank,
                checkpoint_path
                    .as_deref()
                    .map_or("<none>".into(), |p| p.display().to_string())
            );
            stage.outputs.extend(checkpoint_path);
            stage.budget_exhausted = true;
        }
        EnumerationOutcome::Complete(result) => {
            let total: u64 = result.failures_by_class.values().sum();
            let class_percentages = result
                .failures_by_class
                .iter()
                .map(|(&k, &v)| (k, 100.0 * v as f64 / total as f64))
                .collect();
            if result.j_min.is_none() {
                eprintln!("no failing pattern up to weight {}", result.max_weight);
                stage.budget_exhausted = true;
            }
            let artifact = EnumerationArtifact {
                code_hash: code.hash,
                decoder: cfg,
                n: code.graph.n(),
                result,
                class_percentages,
            };
            stage.outputs = emit_json(a.out.as_deref(), &artifact)?;
            if let Some(p) = &checkpoint_path {
                if p.exists() {
                    fs::remove_file(p).map_err(|e| Error::io(p, e))?;
                }
            }
        }
    }
    Ok(stage)
}

fn load_enumeration(path: &Path) -> crate::Result<(EnumerationArtifact, usize)> {
    let art: EnumerationArtifact = read_json(path)?;
    let j = art.result.j_min.ok_or_else(|| {
        Error::Precondition(format!(
            "{} found no failures up to weight {}",
            path.display(),
            art.result.max_weight
        ))
    })?;
    Ok((art, j))
}

fn cmd_estimate(a: &EstimateArgs) -> crate::Result<StageRun> {
    let (enumeration, j) = load_enumeration(&a.from)?;
    let n = enumeration.n;
    let hash = enumeration.code_hash.clone();
    let n0 = match (&a.calibration, a.n0) {
        (Some(p), _) => {
            let c: CalibrationArtifact = read_json(p)?;
            require_same_code(&hash, &c.code_hash, p)?;
            c.n0
        }
        (None, Some(v)) => v,
        (None, None) => unreachable!("clap requires --n0 or --calibration"),
    };
    let m_avg = match (&a.m_from, a.m_avg) {
        (Some(p), _) => {
            let m: MArtifact = read_json(p)?;
            require_same_code(&hash, &m.code_hash, p)?;
            if m.n0 != n0 {
                return Err(Error::Mismatch(format!(
                    "{} estimated M at N0 = {}, but N0 = {n0}",
                    p.display(),
                    m.n0
                )));
            }
            m.estimate().value(a.m_mode.into())
        }
        (None, Some(v)) => v,
        (None, None) => unreachable!("clap requires --m-avg or --m-from"),
    };
    let inp = EstimatorInput {
        n,
        j,
        e_j_count: enumeration.result.e_j_count,
        n0,
        m_avg,
    };
    inp.validate()?;
    let grid = parse_eps(&a.eps, false)?;
    let caps: Vec<usize> = if a.n_list.is_empty() {
        vec![n0]
    } else {
        a.n_list
            .iter()
            .map(|t| match t.trim() {
                "n" => Ok(n),
                s => s
                    .parse::<usize>()
                    .map_err(|_| Error::Precondition(format!("bad N value {s:?}"))),
            })
            .collect::<crate::Result<_>>()?
    };
    for &cap in &caps {
        if cap < j || cap > n {
            return Err(Error::Estimator(format!(
                "N = {cap} outside [J, n] = [{j}, {n}]"
            )));
        }
    }
    if caps.len() > 1 && a.out.is_none() {
        return Err(Error::Precondition("several N values need --out".into()));
    }
    let est = Estimator::for_input(&inp)?;
    let mut outputs = Vec::new();
    for &cap in &caps {
        let mut csv = String::from(ESTIMATE_HEADER);
        csv.push('\n');
        for &eps in &grid {
            let r = rate_point(&est, &inp, cap, eps)?;
            csv.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e}\n",
                r.epsilon, r.p_j, r.fer_lower, r.fer_upper, r.ber
            ));
        }
        let path = a.out.as_ref().map(|o| {
            if caps.len() > 1 {
                suffixed(o, cap)
            } else {
                o.clone()
            }
        });
        outputs.extend(emit(path.as_deref(), &csv)?);
    }
    Ok(StageRun {
        stage: "estimate",
        code_hash: Some(hash),
        decoder: Some(enumeration.decoder),
        outputs,
        budget_exhausted: false,
    })
}

fn suffixed(path: &Path, cap: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_N{cap}.{}", ext.to_string_lossy()),
        None => format!("{stem}_N{cap}"),
    };
    path.with_file_name(name)
}

fn cmd_simulate(a: &SimulateArgs) -> crate::Result<StageRun> {
    let (code, cfg) = a.code.load()?;
    let grid = parse_eps(&a.eps, true)?;
    let mut csv = String::from(SIMULATE_HEADER);
    csv.push('\n');
    let mut results = Vec::with_capacity(grid.len());
    for eps in grid {
        let sim = SimConfig {
            min_frame_errors: a.min_frame_errors,
            max_frames: a.max_frames,
            workers: a.code.workers,
            ..SimConfig::new(eps, a.seed)
        };
        let r = simulate(&code.graph, &cfg, &sim)?;
        if let Some(note) = &r.note {
            eprintln!("eps {eps:e}: {note}");
        }
        csv.push_str(&format!(
            "{:e},{},{},{:e},{:e},{:e},{:e}\n",
            r.epsilon, r.frames, r.frame_errors, r.fer, r.fer_ci_low, r.fer_ci_high, r.ber
        ));
        results.push(r);
    }
    let mut outputs = emit(a.out.as_deref(), &csv)?;
    if let Some(p) = &a.details {
        let details =
            serde_json::json!({ "code_hash": code.hash, "decoder": cfg, "results": results });
        write_json(p, &details)?;
        outputs.push(p.clone());
    }
    Ok(StageRun {
        stage: "simulate",
        code_hash: Some(code.hash),
        decoder: Some(cfg),
        outputs,
        budget_exhausted: false,
    })
}

fn parse_points(items: &[String]) -> crate::Result<Vec<(f64, f64)>> {
    items
        .iter()
        .map(|t| {
            let bad = || Error::Precondition(format!("expected eps:fer, got {t:?}"));
            let (e, f) = t.split_once(':').ok_or_else(bad)?;
            let e: f64 = e.trim().parse().map_err(|_| bad())?;
            let f: f64 = f.trim().parse().map_err(|_| bad())?;
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Epsilon(e));
            }
            Ok((e, f))
        })
        .collect()
}

fn cmd_calibrate_n0(a: &CalibrateArgs) -> crate::Result<StageRun> {
    let (enumeration, j) = load_enumeration(&a.from)?;
    let n = enumeration.n;
    let e = enumeration.result.e_j_count;
    let artifact = if let Some(path) = &a.code {
        let code = load_code(path)?;
        require_same_code(&enumeration.code_hash, &code.hash, path)?;
        let cfg = decoder_config(&code.graph, a.decoder, a.omega.as_deref(), a.max_iterations)?;
        if cfg != enumeration.decoder {
            return Err(Error::Mismatch(format!(
                "{} was enumerated with a different decoder configuration",
                a.from.display()
            )));
        }
        if a.eps.is_empty() {
            return Err(Error::Precondition(
                "--eps is required when simulating".into(),
            ));
        }
        let per_point = SimConfig {
            min_frame_errors: a.min_frame_errors,
            max_frames: a.max_frames,
            workers: a.workers,
            ..SimConfig::new(a.eps[0], a.seed)
        };
        let report = calibrate_n0(&code.graph, &cfg, j, e, &a.eps, &per_point)?;
        let (lo, hi) = crate::simulation::CALIBRATION_FER_RANGE;
        let used_points = report
            .points
            .iter()
            .map(|p| (p.epsilon, p.fer))
            .filter(|&(_, f)| (lo..=hi).contains(&f))
            .collect();
        CalibrationArtifact {
            code_hash: code.hash,
            decoder: Some(cfg),
            n,
            j,
            e_j_count: e,
            n0: report.n0,
            objective: report.objective,
            used_points,
            simulations: report.points,
        }
    } else {
        let points = parse_points(&a.points)?;
        let est = Estimator::new(n, j, e)?;
        let choice = choose_n0(&est, n, j, &points)?;
        CalibrationArtifact {
            code_hash: enumeration.code_hash.clone(),
            decoder: Some(enumeration.decoder.clone()),
            n,
            j,
            e_j_count: e,
            n0: choice.n0,
            objective: choice.objective,
            used_points: choice.used_points,
            simulations: Vec::new(),
        }
    };
    eprintln!("N0 = {}", artifact.n0);
    let outputs = emit_json(a.out.as_deref(), &artifact)?;
    Ok(StageRun {
        stage: "calibrate-n0",
        code_hash: Some(artifact.code_hash.clone()),
        decoder: artifact.decoder.clone(),
        outputs,
        budget_exhausted: false,
    })
}

fn cmd_estimate_m(a: &EstimateMArgs) -> crate::Result<StageRun> {
    let (code, cfg) = a.code.load()?;
    let n0 = match (&a.calibration, a.n0) {
        (Some(p), _) => {
            let c: CalibrationArtifact = read_json(p)?;
            require_same_code(&code.hash, &c.code_hash, p)?;
            c.n0
        }
        (None, Some(v)) => v,
        (None, None) => unreachable!("clap requires --n0 or --calibration"),
    };
    let m = estimate_m(&code.graph, &cfg, n0, a.trials, a.seed, a.code.workers)?;
    let artifact = MArtifact {
        code_hash: code.hash.clone(),
        decoder: cfg.clone(),
        n0,
        m_avg: m.m_avg,
        m_failures_only: m.m_failures_only,
        trials: m.trials,
        failures: m.failures,
        seed: a.seed,
    };
    let outputs = emit_json(a.out.as_deref(), &artifact)?;
    Ok(StageRun {
        stage: "estimate-m",
        code_hash: Some(code.hash),
        decoder: Some(cfg),
        outputs,
        budget_exhausted: false,
    })
}

fn cmd_check_ts(a: &CheckTsArgs) -> crate::Result<StageRun> {
    let (code, cfg) = a.code.load()?;
    let set = ErrorPattern::new(a.set.clone(), code.graph.n())?;
    let report = check_trapping_condition(&code.graph, &cfg, &set)?;
    let certified = if report.condition_holds {
        Some(certify_trapping_set(&code.graph, &cfg, &set)?)
    } else {
        None
    };
    let artifact = TrappingSetArtifact {
        code_hash: code.hash.clone(),
        decoder: cfg.clone(),
        report,
        certified,
    };
    let outputs = emit_json(a.out.as_deref(), &artifact)?;
    Ok(StageRun {
        stage: "check-ts",
        code_hash: Some(code.hash),
        decoder: Some(cfg),
        outputs,
        budget_exhausted: false,
    })
}
