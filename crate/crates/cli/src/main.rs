//! `rof-accel` command-line front end.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use rof_accel::channel::{
    self, ber_sweep, generate, write_sweep_csv, ChannelConfig, Detector, SweepEntry, ThresholdDetector,
};
use rof_accel::cost_model::{efficiency_index, estimate, write_reports_csv, PlatformMeasurement, ResourceProfile};
use rof_accel::nn::{weights_file, NetKind, Network, NetworkDims};
use rof_accel::numerics::{Arithmetic, Fx, Scalar};
use rof_accel::schedules::{self, ScheduleKind};
use rof_accel::training::{self, Optimizer, TrainConfig};
use serde::Serialize;

use config::{header, pick, FileConfig, ProfileSpec};

#[derive(Debug, Parser)]
#[command(name = "rof-accel", version, about = "CNN/BCNN symbol-decision accelerator model")]
struct Cli {
    /// TOML file with default values for any flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled dataset from the synthetic channel
    GenData(GenDataArgs),
    /// Train a CNN or BCNN on a dataset
    Train(TrainArgs),
    /// Run a trained network over a dataset under one schedule
    Infer(InferArgs),
    /// BER over the bundled channel sweep
    BerSweep(SweepArgs),
    /// Modeled resources and latency per schedule
    CostReport(CostArgs),
    /// Efficiency index of an optimized design against a baseline
    Efficiency(EfficiencyArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    /// Frames to generate [default: 10000]
    #[arg(long)]
    symbols: Option<usize>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Arithmetic recorded in the file header [default: real32]
    #[arg(long)]
    arithmetic: Option<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// cnn or bcnn (default topology)
    #[arg(long, default_value = "cnn")]
    net: String,
    /// Per-epoch loss CSV
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// sgd or adam
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Arithmetic the saved weights are quantized to [default: real32]
    #[arg(long)]
    arithmetic: Option<String>,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Decisions CSV [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// sequential, inner-parallel or fully-unrolled [default: sequential]
    #[arg(long)]
    schedule: Option<String>,
    /// Overrides the arithmetic recorded in the weights file
    #[arg(long)]
    arithmetic: Option<String>,
    /// vc709, arty7 or unit [default: vc709]
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Trained network; the threshold detector is used when omitted
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Frames per sweep point [default: 100000]
    #[arg(long)]
    symbols: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    arithmetic: Option<String>,
}

#[derive(Debug, Args)]
struct CostArgs {
    /// cnn-default, bcnn-default or a weights file
    #[arg(long, default_value = "cnn-default")]
    net: String,
    /// all, sequential, inner-parallel or fully-unrolled [default: all]
    #[arg(long)]
    schedule: Option<String>,
    /// vc709, arty7 or unit [default: vc709]
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    arithmetic: Option<String>,
    /// Ignore the profile's DSP/LUT budget
    #[arg(long)]
    unconstrained: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EfficiencyArgs {
    /// Baseline `latency_s,power_w`
    #[arg(long)]
    base: String,
    /// Optimized `latency_s,power_w`
    #[arg(long)]
    opt: String,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    Invalid(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Invalid(_) => 4,
        }
    }
}

impl From<rof_accel::Error> for Failure {
    fn from(e: rof_accel::Error) -> Self {
        match e {
            rof_accel::Error::Io(io) => Failure::Io(io.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROF_ACCEL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, msg) = match &f {
                Failure::Usage(m) => ("usage", m),
                Failure::Io(m) => ("io", m),
                Failure::Invalid(m) => ("invalid", m),
            };
            eprintln!("error[{kind}]: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(p) => {
            require_file(p)?;
            FileConfig::load(p)?
        }
        None => FileConfig::default(),
    };
    match cli.command {
        Command::GenData(a) => gen_data(a, &file),
        Command::Train(a) => train(a, &file),
        Command::Infer(a) => infer(a, &file),
        Command::BerSweep(a) => sweep(a, &file),
        Command::CostReport(a) => cost_report(a, &file),
        Command::Efficiency(a) => efficiency(a),
    }
}

/// Runs `$body` with `$T` bound to the scalar type of `$arith`.
macro_rules! with_scalar {
    ($arith:expr, $T:ident => $body:expr) => {
        match $arith {
            Arithmetic::Real32 => {
                type $T = f32;
                $body
            }
            Arithmetic::Real64 => {
                type $T = f64;
                $body
            }
            Arithmetic::Fixed(q) => match (q.total_bits(), q.frac_bits()) {
                (8, 4) => {
                    type $T = Fx<8, 4>;
                    $body
                }
                (16, 8) => {
                    type $T = Fx<16, 8>;
                    $body
                }
                (16, 12) => {
                    type $T = Fx<16, 12>;
                    $body
                }
                (32, 16) => {
                    type $T = Fx<32, 16>;
                    $body
                }
                _ => Err(Failure::Invalid(format!(
                    "unsupported Q-format {q}; supported: 8.4, 16.8, 16.12, 32.16"
                ))),
            },
        }
    };
}

fn require_file(p: &Path) -> Outcome {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::Io(format!("{}: no such file", p.display())))
    }
}

fn require_parent(p: &Path) -> Outcome {
    match p.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(d) if !d.is_dir() => Err(Failure::Io(format!("{}: directory does not exist", d.display()))),
        _ => Ok(()),
    }
}

fn parse_arithmetic(s: &str) -> Result<Arithmetic, Failure> {
    Ok(s.parse()?)
}

fn resolve_profile(flag: Option<&String>, file: &FileConfig) -> Result<ResourceProfile, Failure> {
    match (flag, &file.profile) {
        (Some(name), _) => ProfileSpec::Preset(name.clone()).resolve(),
        (None, Some(spec)) => spec.resolve(),
        (None, None) => Ok(ResourceProfile::vc709()),
    }
}

/// Opens `path` for writing, or stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_dataset(p: &Path) -> Result<channel::Dataset, Failure> {
    channel::file::load(p).map(|(ds, _)| ds).map_err(|e| with_path(p, e))
}

fn load_weights(p: &Path) -> Result<weights_file::WeightsFile, Failure> {
    weights_file::load(p).map_err(|e| with_path(p, e))
}

fn with_path(p: &Path, e: rof_accel::Error) -> Failure {
    match Failure::from(e) {
        Failure::Io(m) => Failure::Io(format!("{}: {m}", p.display())),
        Failure::Invalid(m) => Failure::Invalid(format!("{}: {m}", p.display())),
        f => f,
    }
}

#[derive(Serialize)]
struct GenDataEcho<'a> {
    out: &'a Path,
    symbols: usize,
    arithmetic: String,
    channel: &'a ChannelConfig,
}

fn gen_data(a: GenDataArgs, file: &FileConfig) -> Outcome {
    require_parent(&a.out)?;
    let mut cfg = file.channel.clone().unwrap_or_default();
    cfg.snr_db = pick(a.snr, None, cfg.snr_db);
    cfg.rng_seed = pick(a.seed, file.seed, cfg.rng_seed);
    let symbols = pick(a.symbols, file.symbols, 10_000);
    let arithmetic = parse_arithmetic(&pick(a.arithmetic, file.arithmetic.clone(), "real32".into()))?;
    info!(
        "{}",
        header(
            "gen-data",
            &GenDataEcho {
                out: &a.out,
                symbols,
                arithmetic: arithmetic.to_string(),
                channel: &cfg
            }
        )?
    );
    let ds = generate(&cfg, symbols)?;
    channel::file::save(&a.out, &ds, arithmetic)?;
    eprintln!(
        "wrote {} frames of length {} to {}",
        ds.len(),
        ds.window_len(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs, file: &FileConfig) -> Outcome {
    require_file(&a.data)?;
    require_parent(&a.out)?;
    if let Some(l) = &a.log {
        require_parent(l)?;
    }
    let kind: NetKind = a.net.parse()?;
    let base = file.train.clone().unwrap_or_default();
    let optimizer = match a.optimizer.as_deref() {
        None => base.optimizer,
        Some("sgd") => Optimizer::Sgd,
        Some("adam") => Optimizer::Adam,
        Some(other) => {
            return Err(Failure::Usage(format!(
                "unknown optimizer {other:?}, expected sgd or adam"
            )))
        }
    };
    let cfg = TrainConfig {
        epochs: pick(a.epochs, None, base.epochs),
        batch_size: pick(a.batch_size, None, base.batch_size),
        learning_rate: pick(a.learning_rate, None, base.learning_rate),
        optimizer,
        rng_seed: pick(a.seed, file.seed, base.rng_seed),
        validation_fraction: base.validation_fraction,
    };
    cfg.validate()?;
    let arithmetic = parse_arithmetic(&pick(a.arithmetic, file.arithmetic.clone(), "real32".into()))?;
    let data = load_dataset(&a.data)?;

    let init = training::init_network::<f32>(&NetworkDims::default_for(kind), cfg.rng_seed)?;
    let out = training::train(&init, &data, &cfg)?;
    let net = training::binarize(&out.network);
    with_scalar!(arithmetic, T => weights_file::save(&a.out, &net.cast::<T>()).map_err(Failure::from))?;
    if let Some(path) = &a.log {
        let mut w = sink(Some(path))?;
        #[derive(Serialize)]
        struct Echo<'a> {
            net: NetKind,
            data: &'a Path,
            arithmetic: String,
            train: &'a TrainConfig,
        }
        w.write_all(
            header(
                "train",
                &Echo {
                    net: kind,
                    data: &a.data,
                    arithmetic: arithmetic.to_string(),
                    train: &cfg,
                },
            )?
            .as_bytes(),
        )?;
        training::write_log_csv(&mut w, &out.log)?;
        w.flush()?;
    }
    let last = out.log.last().map(|e| e.val_acc).unwrap_or(0.0);
    eprintln!(
        "trained {kind} for {} epochs (best epoch {}, final val_acc {last:.4}); wrote {}",
        cfg.epochs,
        out.best_epoch,
        a.out.display()
    );
    Ok(())
}

fn infer(a: InferArgs, file: &FileConfig) -> Outcome {
    require_file(&a.weights)?;
    require_file(&a.data)?;
    if let Some(o) = &a.out {
        require_parent(o)?;
    }
    let kind: ScheduleKind = pick(a.schedule, file.schedule.clone(), "sequential".into()).parse()?;
    let profile = resolve_profile(a.profile.as_ref(), file)?;
    let wf = load_weights(&a.weights)?;
    let arithmetic = match a.arithmetic.or(file.arithmetic.clone()) {
        Some(s) => parse_arithmetic(&s)?,
        None => wf.arithmetic,
    };
    let data = load_dataset(&a.data)?;

    #[derive(Serialize)]
    struct Echo<'a> {
        weights: &'a Path,
        data: &'a Path,
        schedule: ScheduleKind,
        arithmetic: String,
        profile: &'a str,
    }
    let head = header(
        "infer",
        &Echo {
            weights: &a.weights,
            data: &a.data,
            schedule: kind,
            arithmetic: arithmetic.to_string(),
            profile: &profile.name,
        },
    )?;
    let (decisions, cycles) =
        with_scalar!(arithmetic, T => run_schedule::<T>(&wf.network.cast::<T>(), &data, kind, &profile))?;
    let mut w = sink(a.out.as_deref())?;
    w.write_all(head.as_bytes())?;
    writeln!(w, "index,decision,label")?;
    for (i, d) in decisions.iter().enumerate() {
        writeln!(w, "{i},{d},{}", data.label(i))?;
    }
    w.flush()?;
    let errors = channel::count_errors(&decisions, data.labels())?;
    eprintln!(
        "{errors} errors in {} frames (BER {:e}); {cycles} cycles per inference under {kind}",
        data.len(),
        errors as f64 / data.len() as f64
    );
    Ok(())
}

fn run_schedule<T: Scalar>(
    net: &Network<T>,
    data: &channel::Dataset,
    kind: ScheduleKind,
    profile: &ResourceProfile,
) -> Result<(Vec<u8>, u64), Failure> {
    let mut out = Vec::with_capacity(data.len());
    let mut cycles = schedules::trace_for(net, kind, profile)?.cycles();
    for i in 0..data.len() {
        let (inf, trace) = schedules::run(kind, net, &data.tensor::<T>(i), profile)?;
        cycles = trace.cycles();
        out.push(inf.decision as u8);
    }
    Ok((out, cycles))
}

fn sweep(a: SweepArgs, file: &FileConfig) -> Outcome {
    if let Some(w) = &a.weights {
        require_file(w)?;
    }
    if let Some(o) = &a.out {
        require_parent(o)?;
    }
    let seed = pick(a.seed, file.seed, 1);
    let symbols = pick(a.symbols, file.symbols, 100_000);
    let mut entries = channel::default_sweep(seed);
    if let Some(base) = &file.channel {
        for e in entries.iter_mut().filter(|e| e.isi_id == 1) {
            e.config = ChannelConfig {
                snr_db: e.config.snr_db,
                rng_seed: seed,
                ..base.clone()
            };
        }
    }
    let weights = a.weights.as_deref().map(load_weights).transpose()?;
    let arithmetic = match (a.arithmetic.or(file.arithmetic.clone()), &weights) {
        (Some(s), _) => parse_arithmetic(&s)?,
        (None, Some(wf)) => wf.arithmetic,
        (None, None) => Arithmetic::Real32,
    };

    #[derive(Serialize)]
    struct Echo<'a> {
        detector: String,
        seed: u64,
        symbols: usize,
        arithmetic: String,
        channels: Vec<&'a ChannelConfig>,
    }
    let head = header(
        "ber-sweep",
        &Echo {
            detector: a
                .weights
                .as_ref()
                .map_or_else(|| "threshold".to_string(), |p| p.display().to_string()),
            seed,
            symbols,
            arithmetic: arithmetic.to_string(),
            channels: entries.iter().map(|e| &e.config).collect(),
        },
    )?;
    let points = match &weights {
        Some(wf) => with_scalar!(arithmetic, T => sweep_with(&wf.network.cast::<T>(), &entries, symbols)),
        None => sweep_with(&ThresholdDetector, &entries, symbols),
    }?;
    let mut w = sink(a.out.as_deref())?;
    w.write_all(head.as_bytes())?;
    write_sweep_csv(&mut w, &points)?;
    w.flush()?;
    Ok(())
}

fn sweep_with<D: Detector + ?Sized>(
    det: &D,
    entries: &[SweepEntry],
    symbols: usize,
) -> Result<Vec<channel::SweepPoint>, Failure> {
    Ok(ber_sweep(det, entries, symbols)?)
}

fn cost_report(a: CostArgs, file: &FileConfig) -> Outcome {
    if let Some(o) = &a.out {
        require_parent(o)?;
    }
    let (dims, file_arith) = match a.net.as_str() {
        "cnn-default" | "cnn" => (NetworkDims::cnn_default(), None),
        "bcnn-default" | "bcnn" => (NetworkDims::bcnn_default(), None),
        path => {
            let p = Path::new(path);
            require_file(p)?;
            let wf = load_weights(p)?;
            (wf.network.dims(), Some(wf.arithmetic))
        }
    };
    let arithmetic = match a.arithmetic.or(file.arithmetic.clone()) {
        Some(s) => parse_arithmetic(&s)?,
        None => file_arith.unwrap_or(Arithmetic::Real32),
    };
    let mut profile = resolve_profile(a.profile.as_ref(), file)?;
    if a.unconstrained {
        profile = profile.unconstrained();
    }
    let schedule = pick(a.schedule, file.schedule.clone(), "all".into());
    let kinds: Vec<ScheduleKind> = if schedule.eq_ignore_ascii_case("all") {
        ScheduleKind::ALL.to_vec()
    } else {
        vec![schedule.parse()?]
    };
    let reports = kinds
        .iter()
        .map(|&k| estimate(&dims, arithmetic, k, &profile))
        .collect::<Result<Vec<_>, _>>()?;

    #[derive(Serialize)]
    struct Echo<'a> {
        net: &'a str,
        arithmetic: String,
        profile: &'a ResourceProfile,
    }
    let mut w = sink(a.out.as_deref())?;
    w.write_all(
        header(
            "cost-report",
            &Echo {
                net: &a.net,
                arithmetic: arithmetic.to_string(),
                profile: &profile,
            },
        )?
        .as_bytes(),
    )?;
    write_reports_csv(&mut w, &reports)?;
    w.flush()?;
    Ok(())
}

fn measurement(label: &str, s: &str) -> Result<PlatformMeasurement, Failure> {
    let bad = || Failure::Usage(format!("--{label} expects `latency_s,power_w`, got {s:?}"));
    let (l, p) = s.split_once(',').ok_or_else(bad)?;
    let l: f64 = l.trim().parse().map_err(|_| bad())?;
    let p: f64 = p.trim().parse().map_err(|_| bad())?;
    Ok(PlatformMeasurement::new(label, l, p)?)
}

fn efficiency(a: EfficiencyArgs) -> Outcome {
    let base = measurement("base", &a.base)?;
    let opt = measurement("opt", &a.opt)?;
    match efficiency_index(&base, &opt) {
        Some(e) => {
            println!("{e:.2}");
            Ok(())
        }
        None => Err(Failure::Invalid(
            "efficiency index is undefined unless latency drops and power rises".into(),
        )),
    }
}
