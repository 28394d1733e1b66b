use std::path::PathBuf;
use std::process::ExitCode;

use batchsel::experiment::{run, write_outputs, ExperimentConfig};
use batchsel::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "batchsel",
    version,
    about = "Model selection experiments for batch policy optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Also write per-trial selection reports to report.json.
        #[arg(long)]
        audit: bool,
    },
}

fn exit_code(err: &Error) -> ExitCode {
    match err {
        Error::Config { .. } => ExitCode::from(2),
        e if e.is_numerical() => ExitCode::from(3),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        seed,
        threads,
        audit,
    } = cli.command;

    let result = (|| {
        let mut cfg = ExperimentConfig::load(&config)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            if t == 0 {
                return Err(Error::Config {
                    field: "--threads".into(),
                    message: "must be positive".into(),
                });
            }
            pool = pool.num_threads(t);
        }
        let pool = pool.build().map_err(|e| Error::Input(e.to_string()))?;
        let output = pool.install(|| run(&cfg))?;
        write_outputs(&out, &output, audit)
    })();

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
