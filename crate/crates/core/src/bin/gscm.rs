use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gscm::config::{OutputFormat, RunConfig};
use gscm::{export, metrics, pipeline, tensor_file, GscmError};

#[derive(Parser)]
#[command(name = "gscm", version, about = "Multi-user massive MIMO channel simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write cluster tables, metrics and the channel tensor.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        /// Worker threads (0 = machine default).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the share table without synthesizing channels.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute correlation metrics from a binary tensor file.
    Metrics {
        /// Binary channel tensor written by `run`.
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, GscmError> {
    let mut config = RunConfig::from_file(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<(), GscmError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
            format,
            workers,
        } => {
            let mut config = load(&config, seed)?;
            if let Some(w) = workers {
                config.workers = w;
            }
            let dir = out_dir.unwrap_or_else(|| config.output.dir.clone());
            let out = pipeline::run(&config)?;
            for path in pipeline::write_outputs(&out, &dir, format.unwrap_or(config.output.format))? {
                println!("{}", path.display());
            }
        }
        Command::Plan { config, seed } => {
            let config = load(&config, seed)?;
            let (_, shares) = pipeline::plan(&config)?;
            export::write_share_table(&shares, std::io::stdout().lock())?;
        }
        Command::Metrics { tensor, out_dir } => {
            let tensor = tensor_file::read_binary_file(&tensor)?;
            let report = metrics::correlation_metrics(&tensor);
            match out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let path = dir.join("metrics_correlation.tsv");
                    export::write_correlations(&report, std::fs::File::create(&path)?)?;
                    println!("{}", path.display());
                }
                None => export::write_correlations(&report, std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
