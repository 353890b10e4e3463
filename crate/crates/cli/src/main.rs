//! `surprise`: thin command line wrapper over the library crates.
//!
//! Every run verb accepts `--manifest`; values in the file override the
//! corresponding flags, and flags fill whatever the file leaves out.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use surprise_core::extractor::{read_trigger_log, Source};
use surprise_core::harness::{self, Method, Reference, RunManifest, CSV_HEADER};
use surprise_core::latent_io::{read_labels, write_labels, LatentSequence};
use surprise_core::metrics::latent_energy;
use surprise_core::motion::Variant;
use surprise_core::scenario::{generate, ScenarioConfig};
use surprise_core::world_model::Predictor;
use surprise_core::Error;

#[derive(Parser)]
#[command(
    name = "surprise",
    version,
    about = "Latent surprise triggers: generate, pretrain, replay, sweep, metrics, serve"
)]
struct Cli {
    /// Seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic world: sequence.lseq, labels.tsv and scenario.toml.
    Generate(GenerateArgs),
    /// Fit a predictor offline on a sequence and write a checkpoint.
    Pretrain(PretrainArgs),
    /// Score one stream and extract triggers at one operating point.
    Replay(RunArgs),
    /// Sweep alpha over every method; writes sweep.csv and frontier.svg.
    Sweep(RunArgs),
    /// Score an existing trigger log against a sequence and labels.
    Metrics(MetricsArgs),
    /// Start the review service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Maneuvers on a quiet background with events between them.
    MotionCoupled,
    /// Background drift only.
    Quiet,
    /// Maneuvers only, for pretraining.
    Pretraining,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "motion-coupled")]
    preset: Preset,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Maneuver/event cycles of the motion-coupled preset.
    #[arg(long, default_value_t = 5)]
    cycles: usize,
    /// Frames of the quiet preset.
    #[arg(long, default_value_t = 3000)]
    frames: usize,
    /// Length of the pretraining preset.
    #[arg(long, default_value_t = 120.0)]
    duration_s: f64,
    /// Scenario TOML; replaces the preset entirely.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "world")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Naive,
    Compensated,
}

#[derive(Args)]
struct PretrainArgs {
    #[arg(long)]
    sequence: PathBuf,
    #[arg(long, value_enum, default_value = "compensated")]
    variant: VariantArg,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Takes the [model] table and seed from a run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "predictor.ckpt")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Compensated,
    Naive,
    DirectDiff,
    Uniform,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    sequence: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Period of the uniform method.
    #[arg(long, default_value_t = 12.0)]
    period_s: f64,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated sweep grid.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    triggers: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    addr: Option<String>,
}

fn variant(v: VariantArg) -> Variant {
    match v {
        VariantArg::Naive => Variant::Naive,
        VariantArg::Compensated => Variant::Compensated,
    }
}

fn method(m: MethodArg, period_s: f64) -> Method {
    match m {
        MethodArg::Compensated => Method::Compensated,
        MethodArg::Naive => Method::Naive,
        MethodArg::DirectDiff => Method::DirectDiff,
        MethodArg::Uniform => Method::Uniform { period_s },
    }
}

/// Leaf-wise overlay of `top` onto `base`.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn manifest(seed: u64, args: &RunArgs) -> Result<RunManifest, Error> {
    let mut m = RunManifest::new(
        args.sequence.clone().unwrap_or_default(),
        args.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        method(args.method.unwrap_or(MethodArg::Compensated), args.period_s),
    );
    m.seed = seed;
    m.inputs.labels = args.labels.clone();
    m.inputs.checkpoint = args.checkpoint.clone();
    if let Some(a) = args.alpha {
        m.extractor.alpha = a;
    }
    if let Some(a) = &args.alphas {
        m.alphas = a.clone();
    }
    let Some(path) = &args.manifest else {
        m.validate()?;
        return Ok(m);
    };
    let mut table = toml::Table::try_from(&m).map_err(|e| Error::InvalidInput(format!("manifest: {e}")))?;
    let file: toml::Table = toml::from_str(&fs::read_to_string(path)?)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    merge(&mut table, file);
    RunManifest::from_toml(&toml::to_string(&table).expect("table serializes"))
}

fn require_sequence(m: &RunManifest) -> Result<(), Error> {
    if m.inputs.sequence.as_os_str().is_empty() {
        return Err(Error::InvalidInput(
            "no sequence: pass --sequence or set inputs.sequence".into(),
        ));
    }
    Ok(())
}

fn cmd_generate(seed: u64, a: &GenerateArgs) -> Result<(), Error> {
    let cfg = match &a.config {
        Some(p) => ScenarioConfig::read_file(p)?,
        None => match a.preset {
            Preset::MotionCoupled => ScenarioConfig::motion_coupled(a.dim, seed, a.cycles),
            Preset::Quiet => ScenarioConfig::quiet(a.dim, a.frames, seed),
            Preset::Pretraining => ScenarioConfig::pretraining(a.dim, seed, a.duration_s),
        },
    };
    let world = generate(&cfg)?;
    fs::create_dir_all(&a.out)?;
    world.sequence.write_file(a.out.join("sequence.lseq"))?;
    write_labels(&world.labels, fs::File::create(a.out.join("labels.tsv"))?)?;
    fs::write(a.out.join("scenario.toml"), cfg.to_toml())?;
    println!(
        "{}: {} frames, {} events, {} maneuvers",
        a.out.display(),
        world.sequence.len(),
        world.event_times.len(),
        world.maneuver_windows.len()
    );
    Ok(())
}

fn cmd_pretrain(seed: u64, a: &PretrainArgs) -> Result<(), Error> {
    let (model, seed) = match &a.manifest {
        Some(p) => {
            let m = RunManifest::read_file(p)?;
            (m.model, m.seed)
        }
        None => (harness::ModelSettings::desk(), seed),
    };
    let seq = LatentSequence::read_file(&a.sequence, None)?;
    let mut p = Predictor::new(model.config(seq.dim(), variant(a.variant), seed))?;
    for (epoch, loss) in p.pretrain(&seq, a.epochs, a.lr)?.iter().enumerate() {
        println!("epoch {epoch}: mean surprise {loss:.6}");
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    p.write_checkpoint(fs::File::create(&a.out)?)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_replay(seed: u64, a: &RunArgs) -> Result<(), Error> {
    let m = manifest(seed, a)?;
    require_sequence(&m)?;
    let out = harness::run_replay(&m)?;
    println!("{CSV_HEADER}\n{}", out.row.to_csv());
    Ok(())
}

fn cmd_sweep(seed: u64, a: &RunArgs) -> Result<(), Error> {
    let m = manifest(seed, a)?;
    require_sequence(&m)?;
    let out = harness::alpha_sweep(&m)?;
    println!("{CSV_HEADER}");
    for r in &out.rows {
        println!("{}", r.to_csv());
    }
    println!("wrote {}", m.output_dir.join("sweep.csv").display());
    Ok(())
}

fn cmd_metrics(seed: u64, a: &MetricsArgs) -> Result<(), Error> {
    let m = manifest(seed, &a.run)?;
    require_sequence(&m)?;
    let seq = LatentSequence::read_file(&m.inputs.sequence, None)?;
    let triggers = read_trigger_log(fs::File::open(&a.triggers)?)?;
    let reference = match &m.inputs.labels {
        Some(p) => Some(Reference::from_labels(&read_labels(fs::File::open(p)?)?)),
        None => None,
    };
    let method = match triggers.first().map(|t| t.source) {
        Some(Source::Naive) => Method::Naive,
        Some(Source::DirectDiff) => Method::DirectDiff,
        Some(Source::Uniform) => Method::Uniform {
            period_s: uniform_period(&triggers).unwrap_or(seq.duration_s()),
        },
        _ => Method::Compensated,
    };
    let eval = m.eval();
    let energy = latent_energy(&seq, eval.ler.context)?;
    let alpha = (!method.is_uniform()).then_some(eval.extractor.alpha);
    let row = harness::evaluate(
        method,
        alpha,
        &triggers,
        seq.duration_s(),
        seq.fps(),
        &energy,
        reference.as_ref(),
        &eval,
    )?;
    println!("{CSV_HEADER}\n{}", row.to_csv());
    Ok(())
}

/// Spacing of a periodic log, taken from its first two triggers.
fn uniform_period(triggers: &[surprise_core::extractor::TriggerEvent]) -> Option<f64> {
    match triggers {
        [a, b, ..] => Some(b.time_s - a.time_s),
        _ => None,
    }
}

fn cmd_serve(a: &ServeArgs) -> Result<(), String> {
    let mut cfg = surprise_review::ServeConfig::read_file(&a.config).map_err(|e| e.to_string())?;
    let file_sets_addr = fs::read_to_string(&a.config)
        .ok()
        .and_then(|t| t.parse::<toml::Table>().ok())
        .is_some_and(|t| t.contains_key("addr"));
    if let (Some(addr), false) = (&a.addr, file_sets_addr) {
        cfg.addr = addr.clone();
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(surprise_review::serve(cfg)).map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli.seed, a),
        Command::Pretrain(a) => cmd_pretrain(cli.seed, a),
        Command::Replay(a) => cmd_replay(cli.seed, a),
        Command::Sweep(a) => cmd_sweep(cli.seed, a),
        Command::Metrics(a) => cmd_metrics(cli.seed, a),
        Command::Serve(_) => unreachable!("handled in main"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Command::Serve(a) = &cli.command {
        return match cmd_serve(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
