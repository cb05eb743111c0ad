use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use advaudio::attack::Variant;
use advaudio::config::{parse_pairs, RunConfig};
use advaudio::Error;

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "ADVAUDIO_OUT";

#[derive(Debug, Parser)]
#[command(name = "advaudio", version, about = "Robust, imperceptible audio adversarial examples against a toy ASR")]
struct Cli {
    /// Key-value config file (`section.key = value` per line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a setting, e.g. `--set attack.learning_rate=0.004`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory (default: config `output_dir`, then $ADVAUDIO_OUT, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the victim recognizer.
    TrainVictim(TrainArgs),
    /// Attack one or more clips.
    Attack(AttackArgs),
    /// Evaluate attacks in simulated rooms, or run a sweep/pool experiment.
    SimulateEval(EvalArgs),
    /// Generate room impulse responses.
    RirGen(RirArgs),
    /// Write the masking analysis of a clip.
    MaskAnalyze(MaskArgs),
    /// Summarize evaluation records.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory with `transcripts.tsv`; the synthetic corpus is used when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct AttackArgs {
    /// Input WAV files.
    #[arg(long = "input", num_args = 1.., required_unless_present = "manifest")]
    inputs: Vec<PathBuf>,
    /// Text file listing one WAV path per line.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    variant: Option<VariantArg>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Base,
    Robust,
    Psychoacoustic,
    Combined,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Base => Variant::Base,
            VariantArg::Robust => Variant::Robust,
            VariantArg::Psychoacoustic => Variant::Psychoacoustic,
            VariantArg::Combined => Variant::Combined,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Sweep,
    Pools,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of attack outputs to evaluate.
    #[arg(long, required_unless_present = "experiment")]
    results: Option<PathBuf>,
    /// Run an attack-and-evaluate experiment over a corpus instead.
    #[arg(long, conflicts_with = "results")]
    experiment: Option<Experiment>,
    /// Corpus for experiments; synthetic clips when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    clips: Option<usize>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    transforms: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RoomModeArg {
    OneRoom,
    Various,
}

#[derive(Debug, Args)]
struct RirArgs {
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, value_enum, default_value_t = RoomModeArg::Various)]
    rooms: RoomModeArg,
}

#[derive(Debug, Args)]
struct MaskArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory searched recursively for evaluation records.
    #[arg(long)]
    results: PathBuf,
}

fn resolve_config(cli: &Cli) -> advaudio::Result<RunConfig> {
    let mut pairs = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    let file_sets_output = pairs.iter().any(|(k, _)| k == "output_dir");
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{o}'")))?;
        pairs.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    let mut cfg = RunConfig::default().with_overrides(&pairs)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    } else if !file_sets_output && !cli.overrides.iter().any(|o| o.trim_start().starts_with("output_dir")) {
        if let Some(root) = std::env::var_os(OUTPUT_ENV) {
            cfg.output_dir = PathBuf::from(root);
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> advaudio::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    let mut cfg = resolve_config(&cli)?;
    match cli.command {
        Command::TrainVictim(a) => {
            if let Some(e) = a.epochs {
                cfg.train.epochs = e;
            }
            if a.dataset.is_some() {
                cfg.dataset = a.dataset;
            }
            cfg.validate()?;
            commands::train_victim(&cfg)
        }
        Command::Attack(a) => {
            if let Some(t) = a.target {
                cfg.target = t;
            }
            if let Some(v) = a.variant {
                cfg.attack.variant = v.into();
            }
            if a.model.is_some() {
                cfg.model = a.model;
            }
            if let Some(n) = a.iterations {
                cfg.attack.min_iterations = n;
            }
            cfg.validate()?;
            let mut inputs = a.inputs;
            if let Some(m) = a.manifest {
                inputs.extend(read_manifest(&m)?);
            }
            commands::attack(&cfg, &inputs)
        }
        Command::SimulateEval(a) => {
            if a.model.is_some() {
                cfg.model = a.model;
            }
            if let Some(n) = a.transforms {
                cfg.eval.n_transforms = n;
            }
            if a.dataset.is_some() {
                cfg.dataset = a.dataset;
            }
            cfg.validate()?;
            match (a.results, a.experiment) {
                (Some(dir), _) => commands::simulate_eval(&cfg, &dir),
                (None, Some(Experiment::Sweep)) => commands::experiment_sweep(&cfg, a.clips),
                (None, Some(Experiment::Pools)) => commands::experiment_pools(&cfg, a.clips),
                (None, None) => Err(Error::Config("need --results or --experiment".into())),
            }
        }
        Command::RirGen(a) => {
            cfg.validate()?;
            let mode = match a.rooms {
                RoomModeArg::OneRoom => advaudio::rir::RoomMode::OneRoom,
                RoomModeArg::Various => advaudio::rir::RoomMode::VariousRooms,
            };
            commands::rir_gen(&cfg, a.count, mode)
        }
        Command::MaskAnalyze(a) => {
            cfg.validate()?;
            commands::mask_analyze(&cfg, &a.input)
        }
        Command::Report(a) => commands::report(&cfg, &a.results),
    }
}

fn read_manifest(path: &Path) -> advaudio::Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 is left to clap for usage errors.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 3,
        Error::Io(_) | Error::Wav(_) | Error::Checkpoint(_) | Error::Dataset(_) => 4,
        Error::NoRecords(_) => 5,
        _ => 1,
    }
}
