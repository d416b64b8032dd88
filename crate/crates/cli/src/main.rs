use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skyphase::commands::{evaluate, keyrate, plot, simulate, train};
use skyphase::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "skyphase", version, about = "Satellite downlink phase-correction toolkit")]
struct Cli {
    /// Worker threads for simulation and training; 1 gives a single-threaded run.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a campaign of turbulent channel samples.
    Simulate(SimulateArgs),
    /// Train the phase-correction network on a dataset.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset's test split.
    Evaluate(EvaluateArgs),
    /// Scan the secret key rate over the modulation variance.
    Keyrate(KeyrateArgs),
    /// Render CSV output as an SVG plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    shot_noise: bool,
    #[arg(long)]
    cn2_scale: Option<f64>,
    /// Output directory; falls back to `paths.data_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint path; `loss.csv` is written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    init_seed: Option<u64>,
    /// Encoder widths, e.g. `8,16,32`.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KeyrateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    mean_t: f64,
    #[arg(long)]
    mean_sqrt_t: Option<f64>,
    #[arg(long)]
    mean_xi_det: Option<f64>,
    #[arg(long, conflicts_with = "untrusted")]
    trusted: bool,
    #[arg(long)]
    untrusted: bool,
    #[arg(long, default_value_t = 0.0)]
    vmod_min: f64,
    #[arg(long, default_value_t = 10.0)]
    vmod_max: f64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// One of keyrate, gamma_pdf, loss.
    #[arg(long)]
    kind: String,
}

fn required(value: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    value
        .or_else(|| fallback.clone())
        .ok_or_else(|| CliError::config(format!("missing `--{flag}` and no matching `paths` entry in the config")))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot configure {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate(a) => {
            let mut config = RunConfig::load_or_default(a.config.as_deref())?;
            simulate::apply(
                &mut config,
                &simulate::SimulateOverrides {
                    count: a.count,
                    seed: a.seed,
                    layers: a.layers,
                    shot_noise: a.shot_noise,
                    cn2_scale: a.cn2_scale,
                },
            );
            let out = required(a.out, &config.paths.data_dir, "out")?;
            simulate::cmd_simulate(&config, &out).map(|_| ())
        }
        Command::Train(a) => {
            let config = RunConfig::load_or_default(a.config.as_deref())?;
            let mut t = config.training.clone();
            t.epochs = a.epochs.unwrap_or(t.epochs);
            t.batch_size = a.batch.unwrap_or(t.batch_size);
            t.learning_rate = a.lr.unwrap_or(t.learning_rate);
            t.seed = a.seed.unwrap_or(t.seed);
            t.init_seed = a.init_seed.unwrap_or(t.init_seed);
            if let Some(w) = a.widths {
                t.widths = w.as_slice().try_into().map_err(|_| {
                    CliError::config(format!("--widths takes three comma-separated values (got {})", w.len()))
                })?;
            }
            let data = required(a.data, &config.paths.data_dir, "data")?;
            let out = required(a.out, &config.paths.checkpoint, "out")?;
            train::cmd_train(&t, &data, &out).map(|_| ())
        }
        Command::Evaluate(a) => {
            let config = RunConfig::load_or_default(a.config.as_deref())?;
            let data = required(a.data, &config.paths.data_dir, "data")?;
            let ckpt = required(a.checkpoint, &config.paths.checkpoint, "checkpoint")?;
            let out = required(a.out, &config.paths.report_dir, "out")?;
            evaluate::cmd_evaluate(&data, &ckpt, &out, &config.detector).map(|_| ())
        }
        Command::Keyrate(a) => {
            let config = RunConfig::load_or_default(a.config.as_deref())?;
            let args = keyrate::KeyrateArgs {
                gamma: a.gamma,
                mean_t: a.mean_t,
                mean_sqrt_t: a.mean_sqrt_t,
                mean_xi_det: a.mean_xi_det,
                trusted: if a.trusted || a.untrusted { a.trusted } else { config.detector.trusted },
                vmod_min: a.vmod_min,
                vmod_max: a.vmod_max,
                steps: a.steps,
            };
            keyrate::cmd_keyrate(&args, &config.detector, a.out.as_deref()).map(|_| ())
        }
        Command::Plot(a) => {
            let inputs: Vec<&std::path::Path> = a.input.iter().map(PathBuf::as_path).collect();
            plot::cmd_plot(&inputs, &a.out, &a.kind)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
