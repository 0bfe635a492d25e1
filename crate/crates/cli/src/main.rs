use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fockwise_cli::{fit_file, simulate, SimulateOptions};

/// Few-photon linear-optics simulator.
#[derive(Parser)]
#[command(name = "fockwise", version, about)]
struct Cli {
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Simulate {
        config: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config `output_dir`, then $FOCKWISE_OUT_DIR, then `.`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a scalar config field, e.g. `hom_scan.eta=0.6`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Fit the dip model to a scan CSV (`tau_s`, `counts`, optional `sigma`).
    Fit {
        csv: PathBuf,
        /// JSON result path (default: `<stem>_fit.json` next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Simulate { config, seed, out, set } => simulate(
            &config,
            &SimulateOptions {
                seed,
                out_dir: out,
                overrides: set,
            },
        ),
        Command::Fit { csv, out } => fit_file(&csv, out.as_deref()),
    };
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fockwise: {e}");
            e.into()
        }
    }
}
