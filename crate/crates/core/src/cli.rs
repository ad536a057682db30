//! Command-line front end: `generate`, `tune` and `bench`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::approx::{compare, divide, ApproxError, CompareConfig, DivideConfig, Threshold};
use crate::ckks::{CkksContext, CkksError, CkksParams, Preset};
use crate::combine::{combine, suggest_dbscan_params, CombineError, CombineStrategy, GlobalHp};
use crate::gridcluster::GridError;
use crate::hpdata::{
    generate_synthetic_lho, load_reports, minmax_scale, read_space, select_top_fraction, write_reports,
    HpDataError, HpSpace,
};
use crate::mhe::{
    aggregate_key_messages, aggregate_pk, aggregate_rlk, d_bootstrap, d_decrypt, d_key_gen, pk_share,
    rlk_round1, rlk_round2, sec_key_gen, CommonReference, MheError,
};
use crate::protocols::{ProtocolConfig, ProtocolError, ProtocolKind, Session, Transcript};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hpfed", version, about = "Federated hyperparameter tuning with plaintext and encrypted combination")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic per-client LHO files.
    Generate(GenerateArgs),
    /// Combine client reports into global hyperparameters.
    Tune(TuneArgs),
    /// Time the cryptographic operations.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Mean,
    Median,
    TrimmedMean,
    TopMean,
    TopMedian,
    Dbscan,
    PfMean,
    PfDbscan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Test,
    N14,
    N15,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Test => Preset::Test,
            PresetArg::N14 => Preset::N14,
            PresetArg::N15 => Preset::N15,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub clients: Option<usize>,
    #[arg(long)]
    pub heterogeneity: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Report file or directory of report files.
    #[arg(long)]
    pub input: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub granularity: Option<f64>,
    #[arg(long = "min-pts")]
    pub min_pts: Option<usize>,
    #[arg(long = "top-fraction")]
    pub top_fraction: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long)]
    pub clients: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON output path; printed after the table when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

// Configuration file.

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub space: Option<HpSpace>,
    #[serde(default)]
    pub generate: GenerateSection,
    #[serde(default)]
    pub tune: TuneSection,
    #[serde(default)]
    pub bench: BenchSection,
    pub compare: Option<CompareConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub clients: Option<usize>,
    pub heterogeneity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub strategy: Option<StrategyArg>,
    pub preset: Option<Preset>,
    pub granularity: Option<f64>,
    pub min_pts: Option<usize>,
    pub top_fraction: Option<f64>,
    pub trim_fraction: Option<f64>,
    /// DBSCAN radius in scaled units; suggested from the data when absent.
    pub eps: Option<f64>,
    pub max_records: Option<usize>,
    pub count_cap: Option<usize>,
    pub k_max: Option<usize>,
    pub epsilon: Option<f64>,
    pub divide_tolerance: Option<f64>,
    pub divide_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub preset: Option<Preset>,
    pub clients: Option<usize>,
    pub reps: Option<usize>,
}

// Errors.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn input(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
            exit_code: EXIT_INPUT,
        }
    }

    fn protocol(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
            exit_code: EXIT_PROTOCOL,
        }
    }

    fn numeric(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
            exit_code: EXIT_NUMERIC,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<HpDataError> for CliError {
    fn from(e: HpDataError) -> Self {
        Self::input("input", e.to_string())
    }
}

impl From<CkksError> for CliError {
    fn from(e: CkksError) -> Self {
        match e {
            CkksError::InvalidParams(_) => Self::input("config", e.to_string()),
            _ => Self::numeric("numeric", e.to_string()),
        }
    }
}

impl From<MheError> for CliError {
    fn from(e: MheError) -> Self {
        match e {
            MheError::Ckks(c) => c.into(),
            e => Self::protocol("protocol", e.to_string()),
        }
    }
}

impl From<ApproxError> for CliError {
    fn from(e: ApproxError) -> Self {
        match e {
            ApproxError::InvalidConfig(m) => Self::input("config", m),
            ApproxError::LevelExhausted => Self::numeric("level-exhausted", e.to_string()),
            ApproxError::Ckks(c) => c.into(),
            ApproxError::Mhe(m) => m.into(),
        }
    }
}

impl From<CombineError> for CliError {
    fn from(e: CombineError) -> Self {
        match e {
            CombineError::AllNoise => Self::protocol("all-noise", e.to_string()),
            _ => Self::input("input", e.to_string()),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::InvalidGrid(_) => Self::input("config", e.to_string()),
            GridError::ClusterOverflow { .. } => Self::protocol("cluster-overflow", e.to_string()),
            GridError::NoCluster => Self::protocol("all-noise", e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Input(m) => Self::input("input", m),
            ProtocolError::Config(m) => Self::input("config", m),
            ProtocolError::DivisorRange { .. } => Self::protocol("divisor-range", e.to_string()),
            ProtocolError::AllNoise => Self::protocol("all-noise", e.to_string()),
            ProtocolError::Grid(g) => g.into(),
            ProtocolError::Combine(c) => c.into(),
            ProtocolError::Approx(a) => a.into(),
            ProtocolError::Mhe(m) => m.into(),
            ProtocolError::Ckks(c) => c.into(),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::input("io", format!("{}: {e}", path.display()))
}

pub fn read_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            toml::from_str(&text).map_err(|e| CliError::input("config", format!("{}: {e}", p.display())))
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            }
            fs::write(p, text).map_err(|e| io_error(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}").and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::input("io", e.to_string())),
                _ => Ok(()),
            }
        }
    }
}

// generate

pub fn cmd_generate(args: &GenerateArgs) -> Result<serde_json::Value, CliError> {
    let cfg = read_config(args.config.as_deref())?;
    let space = cfg.space.clone().unwrap_or_else(HpSpace::default_2d);
    let clients = args.clients.or(cfg.generate.clients).unwrap_or(10);
    let het = args.heterogeneity.or(cfg.generate.heterogeneity).unwrap_or(0.0);
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    if clients == 0 {
        return Err(CliError::input("input", "--clients must be at least 1"));
    }
    if !(het >= 0.0 && het.is_finite()) {
        return Err(CliError::input("input", "--heterogeneity must be a non-negative number"));
    }
    let reports = generate_synthetic_lho(&space, clients, het, seed);
    let paths = write_reports(&args.out, &space, &reports)?;
    Ok(serde_json::json!({
        "files": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "clients": clients,
        "heterogeneity": het,
        "seed": seed,
    }))
}

// tune

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub strategy: String,
    pub config: serde_json::Value,
    pub global_hp: GlobalHp,
    pub plaintext_reference: Option<GlobalHp>,
    pub mse: Option<f64>,
    pub transcript: Option<Transcript>,
    /// Key generation, recorded apart from the protocol run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keygen: Option<Transcript>,
}

impl TuneReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

fn protocol_config(
    kind: ProtocolKind,
    args: &TuneArgs,
    cfg: &FileConfig,
) -> ProtocolConfig {
    let t = &cfg.tune;
    let mut pc = match kind {
        ProtocolKind::PfMean => ProtocolConfig::pf_mean(),
        ProtocolKind::PfDbscan => ProtocolConfig::pf_dbscan(),
    };
    if let Some(p) = args.preset.map(Preset::from).or(t.preset) {
        pc.preset = p;
    }
    if let Some(g) = args.granularity.or(t.granularity) {
        pc.granularity = g;
    }
    if let Some(m) = args.min_pts.or(t.min_pts) {
        pc.min_pts = m;
    }
    if let Some(f) = args.top_fraction.or(t.top_fraction) {
        pc.top_fraction = f;
    }
    if let Some(m) = t.max_records {
        pc.max_records = m;
    }
    pc.count_cap = t.count_cap.or(pc.count_cap);
    pc.k_max = t.k_max.or(pc.k_max);
    if let Some(e) = t.epsilon {
        pc.epsilon = e;
    }
    if let Some(e) = t.divide_tolerance {
        pc.divide_tolerance = e;
    }
    pc.divide_iterations = t.divide_iterations.or(pc.divide_iterations);
    if let Some(c) = cfg.compare {
        pc.compare = c;
    }
    pc
}

pub fn cmd_tune(args: &TuneArgs) -> Result<TuneReport, CliError> {
    let cfg = read_config(args.config.as_deref())?;
    let space = match &cfg.space {
        Some(s) => s.clone(),
        None => read_space(&args.input)?,
    };
    let reports = load_reports(&args.input, &space)?;
    let strategy = args
        .strategy
        .or(cfg.tune.strategy)
        .ok_or_else(|| CliError::input("input", "--strategy is required"))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let t = &cfg.tune;
    let top_fraction = args.top_fraction.or(t.top_fraction);

    let plain = |s: CombineStrategy| -> Result<TuneReport, CliError> {
        let hp = combine(&s, &reports, &space)?;
        Ok(TuneReport {
            strategy: s.name().into(),
            config: serde_json::json!({ "combine": s, "seed": seed, "space": space }),
            global_hp: hp,
            plaintext_reference: None,
            mse: None,
            transcript: None,
            keygen: None,
        })
    };
    match strategy {
        StrategyArg::Mean => plain(CombineStrategy::Mean),
        StrategyArg::Median => plain(CombineStrategy::Median),
        StrategyArg::TrimmedMean => plain(CombineStrategy::TrimmedMean {
            trim_fraction: t.trim_fraction.unwrap_or(0.1),
        }),
        StrategyArg::TopMean => plain(CombineStrategy::TopMean {
            fraction: top_fraction.unwrap_or(0.05),
        }),
        StrategyArg::TopMedian => plain(CombineStrategy::TopMedian {
            fraction: top_fraction.unwrap_or(0.05),
        }),
        StrategyArg::Dbscan => {
            let top_fraction = top_fraction.unwrap_or(0.05);
            let min_pts = args.min_pts.or(t.min_pts);
            let (eps, min_pts) = match (t.eps, min_pts) {
                (Some(e), Some(m)) => (e, m),
                (eps, m) => {
                    let points: Vec<Vec<f64>> = reports
                        .iter()
                        .flat_map(|r| minmax_scale(&select_top_fraction(r, top_fraction), &space).records)
                        .map(|r| r.values)
                        .collect();
                    let (se, sm) = suggest_dbscan_params(&points, space.d())?;
                    (eps.unwrap_or(se), m.unwrap_or(sm))
                }
            };
            plain(CombineStrategy::Dbscan {
                eps,
                min_pts,
                top_fraction,
            })
        }
        StrategyArg::PfMean | StrategyArg::PfDbscan => {
            let kind = if strategy == StrategyArg::PfMean {
                ProtocolKind::PfMean
            } else {
                ProtocolKind::PfDbscan
            };
            let pc = protocol_config(kind, args, &cfg);
            let mut session = Session::new(pc.preset, reports.len(), seed)?;
            let out = crate::protocols::run(&reports, &space, &pc, &mut session)?;
            Ok(TuneReport {
                strategy: kind.name().into(),
                config: serde_json::json!({ "protocol": pc, "seed": seed, "clients": reports.len(), "space": space }),
                global_hp: out.global_hp,
                plaintext_reference: Some(out.plaintext_reference),
                mse: Some(out.mse),
                transcript: Some(out.transcript),
                keygen: Some(session.keygen_transcript().clone()),
            })
        }
    }
}

// bench

/// The benchmarked operations, in table order.
pub const BENCH_OPS: [&str; 10] = [
    "SecKeyGen (per client)",
    "DKeyGen (pk generation)",
    "DKeyGen (ek generation)",
    "Encrypt",
    "Add",
    "Mul_ct",
    "Divide",
    "DBootstrap",
    "Compare (with bootstrapping)",
    "DDecrypt",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub op: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub preset: Preset,
    pub clients: usize,
    pub reps: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "preset {}, {} clients, {} repetitions", self.preset, self.clients, self.reps);
        let _ = writeln!(s, "{:<32} | {:>24}", "Operation", "Mean ± Std Dev [ms]");
        let _ = writeln!(s, "{:-<32}-+-{:->24}", "", "");
        for r in &self.rows {
            let _ = writeln!(s, "{:<32} | {:>24}", r.op, format!("{:.3} ± {:.3}", r.mean_ms, r.std_ms));
        }
        s
    }
}

fn stats(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn time_ms<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

pub fn run_bench(preset: Preset, clients: usize, reps: usize, seed: u64) -> Result<BenchReport, CliError> {
    if clients == 0 || reps == 0 {
        return Err(CliError::input("input", "--clients and --reps must be at least 1"));
    }
    let ctx = CkksContext::new(CkksParams::preset(preset))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let crs = CommonReference::new(seed);
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); BENCH_OPS.len()];

    let shares: Vec<_> = (0..clients).map(|i| sec_key_gen(&ctx, i, &mut rng)).collect();
    let (pk, rlk) = d_key_gen(&ctx, &shares, &crs, &mut rng)?;
    let slots = ctx.slots();
    let dcfg = DivideConfig::default();
    let ccfg = CompareConfig::default();

    for _ in 0..reps {
        let (_, ms) = time_ms(|| sec_key_gen(&ctx, 0, &mut rng));
        samples[0].push(ms);

        let (r, ms) = time_ms(|| {
            let msgs: Vec<_> = shares.iter().map(|s| pk_share(&ctx, s, &crs, &mut rng)).collect();
            aggregate_pk(&ctx, &crs, &msgs, clients)
        });
        r?;
        samples[1].push(ms);

        let (r, ms) = time_ms(|| {
            let (ephs, r1): (Vec<_>, Vec<_>) = shares.iter().map(|s| rlk_round1(&ctx, s, &crs, &mut rng)).unzip();
            let agg = aggregate_key_messages(&ctx, &r1, clients)?;
            let r2: Vec<_> = shares
                .iter()
                .zip(&ephs)
                .map(|(s, e)| rlk_round2(&ctx, s, e, &agg, &mut rng))
                .collect();
            aggregate_rlk(&ctx, &agg, &r2, clients)
        });
        r?;
        samples[2].push(ms);

        let x: Vec<f64> = (0..slots).map(|_| rng.random_range(0.0..1.0)).collect();
        let den: Vec<f64> = (0..slots).map(|_| rng.random_range(1.0..50.0)).collect();
        let (ct, ms) = time_ms(|| ctx.encrypt_values(&pk, &x, &mut rng));
        let ct = ct?;
        samples[3].push(ms);
        let ct_den = ctx.encrypt_values(&pk, &den, &mut rng)?;

        let (r, ms) = time_ms(|| ctx.add(&ct, &ct_den));
        r?;
        samples[4].push(ms);

        let (r, ms) = time_ms(|| ctx.mul(&ct, &ct_den, &rlk));
        r?;
        samples[5].push(ms);

        let (r, ms) = time_ms(|| divide(&ctx, &ct, &ct_den, &dcfg, &rlk, &mut crate::approx::NoRefresh));
        r?;
        samples[6].push(ms);

        let low = ctx.level_down(&ct, 0)?;
        let (r, ms) = time_ms(|| d_bootstrap(&ctx, &pk, &low, &shares, &mut rng));
        r?;
        samples[7].push(ms);

        let (r, ms) = time_ms(|| {
            let mut boot = BenchRefresh {
                ctx: &ctx,
                pk: &pk,
                shares: &shares,
                rng: &mut rng,
            };
            compare(&ctx, &ct, Threshold::Const(0.5), &ccfg, &rlk, &mut boot)
        });
        r?;
        samples[8].push(ms);

        let (r, ms) = time_ms(|| d_decrypt(&ctx, &ct, &shares, clients, &mut rng));
        r?;
        samples[9].push(ms);
    }

    let rows = BENCH_OPS
        .iter()
        .zip(&samples)
        .map(|(op, s)| {
            let (mean_ms, std_ms) = stats(s);
            BenchRow {
                op: op.to_string(),
                mean_ms,
                std_ms,
                reps: s.len(),
            }
        })
        .collect();
    Ok(BenchReport {
        preset,
        clients,
        reps,
        rows,
    })
}

struct BenchRefresh<'a> {
    ctx: &'a CkksContext,
    pk: &'a crate::ckks::PublicKey,
    shares: &'a [crate::mhe::SecretKeyShare],
    rng: &'a mut ChaCha20Rng,
}

impl crate::approx::Refresh for BenchRefresh<'_> {
    fn refresh(&mut self, ct: &crate::ckks::Ciphertext) -> Result<crate::ckks::Ciphertext, ApproxError> {
        Ok(d_bootstrap(self.ctx, self.pk, ct, self.shares, self.rng)?)
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    let cfg = read_config(args.config.as_deref())?;
    let preset = args.preset.map(Preset::from).or(cfg.bench.preset).unwrap_or(Preset::Test);
    let clients = args.clients.or(cfg.bench.clients).unwrap_or(10);
    let reps = args.reps.or(cfg.bench.reps).unwrap_or(20);
    run_bench(preset, clients, reps, args.seed.or(cfg.seed).unwrap_or(0))
}

/// Runs a parsed command, writing its outputs; returns the exit code.
pub fn execute(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a).and_then(|v| write_output(None, &v.to_string())),
        Command::Tune(a) => cmd_tune(a).and_then(|r| write_output(a.out.as_deref(), &r.to_json())),
        Command::Bench(a) => cmd_bench(a).and_then(|r| {
            let _ = write!(std::io::stdout(), "{}", r.table());
            write_output(a.out.as_deref(), &serde_json::to_string_pretty(&r).expect("serializable"))
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code
        }
    }
}

/// Entry point for the binary: parses `args` and runs.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return EXIT_OK;
            }
            eprintln!("{}", CliError::input("usage", e.to_string().trim_end()).to_json());
            EXIT_INPUT
        }
    }
}
