use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use rune_core::bench::{run_sweep, to_csv, render_table, Mode};

/// Measure containerization overhead of the sine pipeline: native execution
/// vs the containerized path under each boundary codec.
#[derive(Parser)]
#[command(name = "rune-bench")]
struct Cli {
    /// Comma-separated iteration counts
    #[arg(long, default_value = "1000,10000,100000,1000000", value_delimiter = ',')]
    iterations: Vec<u64>,
    /// Timed repeats per configuration (median is reported)
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// CSV output path
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let records = match run_sweep(&cli.iterations, &Mode::ALL, cli.repeats) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    print!("{}", render_table(&records));
    let csv = match to_csv(&records) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = std::fs::write(&cli.out, csv) {
        eprintln!("error: cannot write {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    println!("wrote {}", cli.out.display());
    ExitCode::SUCCESS
}
