use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dmcca_cli::commands::{self, RowSelection, TrainArgs};
use dmcca_cli::config::{ActivationSetting, ExperimentConfig, Method};
use dmcca_cli::experiments::{run_sweep, run_table1};
use dmcca_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "dmcca", version, about = "Deep multiset CCA experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Replaces the configured seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use T=100000, D=1024 instead of the desk-scale dimensions.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dmcca,
    Supervised,
    Mcca,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Linear,
    Tanh,
}

#[derive(Clone, Copy, ValueEnum)]
enum RowsArg {
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// dMCCA over the K × M × seed grid on synthetic data.
    SynthSweep,
    /// Supervised, dMCCA, linear MCCA, least-squares and random baselines.
    Table1,
    /// Write one synthetic dataset as a tensor container.
    SynthGen,
    /// Train on a tensor container and save a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, value_enum)]
        activation: Option<ActivationArg>,
        /// Output width (ignored for supervised, which matches the source).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Embed a container's rows with a checkpoint.
    Transform {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        rows: RowsArg,
    },
    /// Affinity and clustering metrics of an embeddings container.
    Eval {
        #[arg(long)]
        embeddings: PathBuf,
    },
    /// Corrupted three-view digit dataset.
    NmnistGen {
        /// IDX image file; built-in glyphs when omitted.
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

fn resolve(common: &Common) -> CliResult<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seeds = vec![seed];
    }
    if common.paper_scale {
        config.use_paper_scale();
    }
    Ok(config)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Pool(e.to_string()))?;
    }
    let config = resolve(&cli.common)?;
    let out = &cli.common.out;
    let seed = config.seeds.first().copied().unwrap_or(0);
    match cli.command {
        Command::SynthSweep => {
            let rows = run_sweep(&config, out)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} grid points written to {} ({failed} failed)", rows.len(), out.display());
        }
        Command::Table1 => {
            let (rows, _) = run_table1(&config, out)?;
            for r in rows {
                println!(
                    "{:<14} {:<7} R_a {:.3} ± {:.3}  R_s {:.3} ± {:.3}",
                    r.method, r.activation, r.r_a_mean, r.r_a_std, r.r_s_mean, r.r_s_std
                );
            }
        }
        Command::SynthGen => println!("{}", commands::synth_gen(&config, seed, out)?.display()),
        Command::Train { data, method, activation, k, batch_size } => {
            let args = TrainArgs {
                data,
                method: match method {
                    Some(MethodArg::Dmcca) => Method::Dmcca,
                    Some(MethodArg::Supervised) => Method::Supervised,
                    Some(MethodArg::Mcca) => Method::Mcca,
                    None => config.method,
                },
                activation: match activation {
                    Some(ActivationArg::Linear) => ActivationSetting::Linear,
                    Some(ActivationArg::Tanh) => ActivationSetting::Tanh,
                    None => config.arch.activation,
                },
                k: k.unwrap_or(config.k_components),
                batch_size: batch_size.unwrap_or(config.train.batch_size),
                seed,
            };
            let report = commands::train(&config, &args, out)?;
            println!("trained {} epochs ({}), checkpoint in {}", report.history.len(), report.stop_reason, out.display());
        }
        Command::Transform { data, checkpoint, rows } => {
            let rows = match rows {
                RowsArg::Test => RowSelection::Test,
                RowsArg::All => RowSelection::All,
            };
            println!("{}", commands::transform(&data, &checkpoint, rows, out)?.display());
        }
        Command::Eval { embeddings } => {
            let report = commands::eval(&config, &embeddings, seed, out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::NmnistGen { images, labels } => {
            let path = commands::nmnist_gen(&config, images.as_deref(), labels.as_deref(), seed, out)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
