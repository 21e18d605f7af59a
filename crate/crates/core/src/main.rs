use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ccr_invest::report::{self, CliError, FigureKind};

#[derive(Parser)]
#[command(name = "ccr-invest", version, about = "Optimal investment under counterparty default risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the value multiplier and optimal policy; write the per-node CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `output_path` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the reference tables and compare cell by cell.
    Tables {
        #[arg(long)]
        json: bool,
    },
    /// Emit value-function curves against the Merton benchmark as CSV.
    Figures {
        #[arg(long, value_enum)]
        which: FigureKind,
        #[arg(long)]
        out: PathBuf,
        /// CRRA exponent of the curves.
        #[arg(long, default_value_t = report::FIGURE_P)]
        p: f64,
    },
    /// Monte Carlo estimate of the expected terminal utility, as JSON.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, out } => {
            let (sol, out) = report::cmd_solve(&config, out.as_deref())?;
            eprintln!(
                "solved {} nodes in {} Howard iterations (residual {:e}); wrote {}",
                sol.len(),
                sol.iterations,
                sol.residual,
                out.display()
            );
        }
        Command::Tables { json } => {
            let (_, text) = report::cmd_tables(json)?;
            print!("{text}");
        }
        Command::Figures { which, out, p } => {
            let curves = report::cmd_figures(which, p, &out)?;
            eprintln!("wrote {} curves to {}", curves.len(), out.display());
        }
        Command::Simulate { config, paths, seed, out } => {
            let rep = report::cmd_simulate(&config, paths, seed)?;
            let json = report::sim_report_json(&rep);
            match out {
                Some(path) => std::fs::write(&path, json)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
                None => {
                    let _ = std::io::stdout().write_all(json.as_bytes());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
