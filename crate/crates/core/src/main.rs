use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rydweak::config::{load_config, schema};
use rydweak::runner::{apply_overrides, run, ErrorReport, Overrides, OUTPUT_DIR_ENV};
use rydweak::Error;

#[derive(Parser)]
#[command(
    name = "rydweak",
    version,
    about = "Rydberg-atom weak-measurement microwave sensor simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Simulate {
        config: PathBuf,
        /// Output directory (overrides the environment and the config).
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config file and print it with defaults filled in.
    Validate { config: PathBuf },
    /// Print the JSON schema of an experiment block (or `config` for the whole file).
    Schema { experiment: String },
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            config,
            output_dir,
            seed,
            threads,
        } => {
            if let Some(n) = threads {
                if n == 0 {
                    return Err(Error::InvalidArgument("--threads must be >= 1".into()));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            }
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, &Overrides { output_dir, seed });
            let manifest = run(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
        Command::Schema { experiment } => {
            println!("{}", serde_json::to_string_pretty(&schema(&experiment)?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = ErrorReport::from(&e);
            eprintln!(
                "{}",
                serde_json::to_string(&report).unwrap_or_else(|_| e.to_string())
            );
            ExitCode::from(e.code() as u8)
        }
    }
}
