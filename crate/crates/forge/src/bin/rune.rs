use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rune", about = "Build Runefiles into .rune container bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a Runefile into a .rune bundle
    Build {
        /// Path to the Runefile
        runefile: PathBuf,
        /// Output bundle path (defaults to <runefile-dir>/<stem>.rune)
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print a machine-readable report to stdout
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Build { runefile, output, json } => {
            match rune_forge::build(&runefile, output.as_deref()) {
                Ok(report) => {
                    for warning in &report.warnings {
                        eprintln!("warning: {warning}");
                    }
                    if json {
                        println!("{}", report.to_json());
                    } else {
                        println!("{}", report.summary());
                    }
                    ExitCode::SUCCESS
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(err.exit_code() as u8)
                }
            }
        }
    }
}
