use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semimono::runner::{self, RunOptions};

#[derive(Parser)]
#[command(name = "semimono", version, about = "Run truncation, Malliavin and moment experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a config file or a bundled config by name.
    Run {
        config: String,
        /// Output directory (default: the config's outputs.directory).
        #[arg(long, env = runner::OUT_ENV)]
        out: Option<PathBuf>,
        /// Overrides mc.seed0.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; does not change results.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List bundled configs and experiment kinds.
    List,
    /// Print coefficients and constants of a built-in model.
    Describe { model: String },
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run { config, out, seed, threads } => {
            let outcome = runner::run_path(&config, &RunOptions { out_dir: out, seed, threads });
            if let Some(m) = &outcome.manifest {
                for e in &m.experiments {
                    println!("{:<13} {:<7} {}", e.name, format!("{:?}", e.status).to_lowercase(), e.message);
                }
            }
            if let Some(dir) = &outcome.out_dir {
                println!("artifacts: {}", dir.display());
            }
            if let Some(err) = &outcome.error {
                eprintln!("error: {err}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Cmd::List => {
            print!("{}", runner::list_experiments());
            ExitCode::SUCCESS
        }
        Cmd::Describe { model } => match runner::describe(&model) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(runner::EXIT_CONFIG as u8)
            }
        },
    }
}
