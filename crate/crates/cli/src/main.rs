use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use dpc_cli::commands::{
    cmd_ablate, cmd_bench, cmd_eval, cmd_gen_data, cmd_trace_rf, cmd_trace_rf_grid, cmd_train, BenchArgs,
    CloudSource, EvalArgs, GenDataArgs, TraceGridArgs, TraceRfArgs,
};
use dpc_cli::config::RunConfig;
use dpc_cli::error::{CliError, CliResult};
use dpc_core::dpc::Mode;
use dpc_core::pointcloud::{SceneKind, SceneOptions};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "dpc",
    version,
    about = "Dilated point convolutions: data, training, evaluation and analysis"
)]
struct Cli {
    /// JSON run config; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// One thread and sequential sweeps, for bit-reproducible runs.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Print the effective config as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic scenes and a manifest.
    GenData(GenDataCli),
    /// Train a network per the config.
    Train {
        /// Checkpoint to resume from; overrides `paths.resume`.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on labeled clouds.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Cloud file or directory; `paths.data` when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
    /// Trace the receptive field of one point and export it as PLY.
    TraceRf(TraceRfCli),
    /// Train and evaluate the configured depth, k and dilation grid.
    Ablate,
    /// Time forward passes.
    Bench(BenchCli),
}

#[derive(Debug, Args)]
struct GenDataCli {
    #[arg(long, value_parser = parse_kind, default_value = "rooms")]
    kind: SceneKind,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Points per scene; the kind's default when absent.
    #[arg(long)]
    points: Option<usize>,
    /// Room scenes only: 2, 3 or 4.
    #[arg(long)]
    room_classes: Option<usize>,
}

#[derive(Debug, Args)]
struct TraceRfCli {
    /// Trained network; the config's untrained network when absent.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Cloud file; a generated scene when absent.
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind, default_value = "rooms")]
    scene: SceneKind,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value_t = 0)]
    target: usize,
    /// Layers to trace; all when absent.
    #[arg(long)]
    depth: Option<usize>,
    /// Also compute the gradient-based receptive field.
    #[arg(long)]
    empirical: bool,
    /// Trace the fixed grid of depths and (k, d) rows instead.
    #[arg(long)]
    grid: bool,
}

#[derive(Debug, Args)]
struct BenchCli {
    #[arg(long, default_value_t = 4092)]
    points: usize,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 7)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 5)]
    trials: usize,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: dpc_core::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<SceneKind, String> {
    s.parse().map_err(|e: dpc_core::Error| e.to_string())
}

fn print_json(value: &impl Serialize) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn scene_options(kind: SceneKind, points: Option<usize>, room_classes: Option<usize>) -> SceneOptions {
    let defaults = SceneOptions::for_kind(kind);
    SceneOptions {
        points: points.unwrap_or(defaults.points),
        room_classes: room_classes.unwrap_or(defaults.room_classes),
        ..defaults
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = RunConfig::load_or_default(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.print_config {
        return print_json(&config);
    }
    let threads = if cli.deterministic { Some(1) } else { cli.threads };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }
    let out = cli.out.as_deref();
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no command given; see --help".into()));
    };
    match command {
        Command::GenData(a) => {
            let manifest = cmd_gen_data(&GenDataArgs {
                kind: a.kind,
                seed: config.seed,
                count: a.count,
                out_dir: out.unwrap_or(&config.paths.data).to_path_buf(),
                options: scene_options(a.kind, a.points, a.room_classes),
            })?;
            print_json(&manifest)
        }
        Command::Train { resume } => {
            if resume.is_some() {
                config.paths.resume = resume;
            }
            let outcome = cmd_train(&config, out)?;
            if let Some(last) = outcome.history.epochs.last() {
                eprintln!(
                    "epoch {} loss {:.4} oAcc {:.4} mIoU {:.4}",
                    last.epoch, last.loss, last.oacc, last.miou
                );
            }
            println!("{}", outcome.checkpoint.display());
            Ok(())
        }
        Command::Eval {
            checkpoint,
            data,
            mode,
        } => {
            let report = cmd_eval(&EvalArgs {
                checkpoint,
                data: data.unwrap_or_else(|| config.paths.data.clone()),
                mode,
                out: out.map(Path::to_path_buf),
            })?;
            print_json(&report)
        }
        Command::TraceRf(a) => {
            let source = match a.cloud {
                Some(path) => CloudSource::File(path),
                None => CloudSource::Scene {
                    kind: a.scene,
                    seed: config.seed,
                    options: scene_options(a.scene, a.points, None),
                },
            };
            let dir = out.unwrap_or(&config.paths.reports).to_path_buf();
            if a.grid {
                let report = cmd_trace_rf_grid(&TraceGridArgs {
                    cloud: source,
                    target: a.target,
                    out_dir: dir,
                })?;
                print_json(&report)
            } else {
                let report = cmd_trace_rf(&TraceRfArgs {
                    checkpoint: a.checkpoint,
                    config,
                    cloud: source,
                    target: a.target,
                    depth: a.depth,
                    empirical: a.empirical,
                    out_ply: dir.join(format!("rf_{}.ply", a.target)),
                })?;
                print_json(&report)
            }
        }
        Command::Ablate => {
            let report = cmd_ablate(&config, out, cli.deterministic)?;
            print!("{}", dpc_cli::commands::ablate::format_table(&report));
            Ok(())
        }
        Command::Bench(a) => {
            let report = cmd_bench(
                &BenchArgs {
                    points: a.points,
                    k: a.k,
                    d: a.d,
                    layers: a.layers,
                    width: a.width,
                    trials: a.trials,
                    seed: config.seed,
                },
                out,
            )?;
            print_json(&report)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
