use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcnn::activations::ActivationKind;
use mcnn::cli::{resolve_workers, run_counting, run_experiment, run_gradcheck, run_inception_demo, ExperimentConfig};
use mcnn::error::{Error, Result};

#[derive(Parser)]
#[command(name = "mcnn", version, about = "Multi-function CNN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, evaluate, and rank the candidates described by a TOML config.
    Experiment {
        config: PathBuf,
        /// Worker threads (overrides MCNN_WORKERS and the config).
        #[arg(long)]
        workers: Option<usize>,
        /// CSV output path (overrides the config).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Markdown output path (overrides the config).
        #[arg(long)]
        markdown: Option<PathBuf>,
    },
    /// Print family sizes for j AL functions over m units and k FC functions over n units.
    Count {
        #[arg(long)]
        j: u32,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
    },
    /// Build an Inception-A block, assign path functions, and gradient-check it.
    InceptionDemo {
        #[arg(long, default_value_t = 0.125)]
        scale: f64,
        /// Comma-separated function pool, e.g. REL,SIG,TAN.
        #[arg(long, default_value = "REL,SIG,TAN", value_delimiter = ',')]
        pool: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Extra path layout file, one path per line.
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Finite-difference check of network and inception block gradients.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Experiment {
            config,
            workers,
            csv,
            markdown,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let workers = resolve_workers(workers, cfg.workers)?;
            let out = run_experiment(&cfg, workers)?;
            match csv.or(cfg.output.csv.clone()) {
                Some(path) => std::fs::write(path, &out.csv)?,
                None => print!("{}", out.csv),
            }
            match markdown.or(cfg.output.markdown.clone()) {
                Some(path) => std::fs::write(path, &out.markdown)?,
                None => print!("\n{}", out.markdown),
            }
            Ok(true)
        }
        Command::Count { j, k, m, n } => {
            print!("{}", run_counting(j, k, m, n)?);
            Ok(true)
        }
        Command::InceptionDemo {
            scale,
            pool,
            seed,
            paths,
        } => {
            let pool = pool
                .iter()
                .map(|p| p.trim().parse::<ActivationKind>())
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let layout = paths.map(std::fs::read_to_string).transpose()?;
            print!("{}", run_inception_demo(scale, &pool, seed, layout.as_deref())?);
            Ok(true)
        }
        Command::Gradcheck { instances, seed } => {
            let (report, ok) = run_gradcheck(instances, seed)?;
            print!("{report}");
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
