use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hammer::client::{
    cast, health_query, invoke, render_targets_table, targets_ls, StageId, DEFAULT_TIMEOUT,
};
use hammer::registry::{parse_registry, TargetEntry};

/// Hammer: deploy and drive Runes on registered devices.
#[derive(Parser)]
#[command(name = "hmr")]
struct Cli {
    /// Target registry file, one `locator type name` per line
    #[arg(long, default_value = "targets.txt", global = true)]
    registry: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover and deploy to targets
    Targets {
        #[command(subcommand)]
        command: TargetsCommand,
    },
    /// Query a device's health report
    Health {
        /// Target locator from the registry
        #[arg(short, long)]
        target: String,
    },
    /// Trigger one inference on a deployed Rune
    Invoke {
        /// Target locator from the registry
        #[arg(short, long)]
        target: String,
        /// Provider seed for the run
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum TargetsCommand {
    /// List registered targets and probe their availability
    Ls,
    /// Deploy a .rune bundle to a target
    Cast {
        /// Target locator from the registry
        #[arg(short, long)]
        target: String,
        /// Expected provider fqdn; the cast aborts if the device differs
        #[arg(long)]
        provider: Option<String>,
        /// Path to the .rune bundle
        rune: PathBuf,
    },
}

fn load_registry(path: &PathBuf) -> Result<Vec<TargetEntry>, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read registry {}: {e}", path.display()))?;
    parse_registry(&text).map_err(|e| format!("registry {}: {e}", path.display()))
}

fn find_target(entries: &[TargetEntry], locator: &str) -> Result<TargetEntry, String> {
    entries
        .iter()
        .find(|e| e.locator == locator)
        .cloned()
        .ok_or_else(|| format!("target `{locator}` is not in the registry"))
}

fn run(cli: Cli) -> Result<(), String> {
    let entries = load_registry(&cli.registry)?;
    match cli.command {
        Command::Targets { command: TargetsCommand::Ls } => {
            let targets = targets_ls(&entries, DEFAULT_TIMEOUT);
            print!("{}", render_targets_table(&targets));
            Ok(())
        }
        Command::Targets { command: TargetsCommand::Cast { target, provider, rune } } => {
            let entry = find_target(&entries, &target)?;
            println!("Deploying {} to target {}", rune.display(), entry.locator);
            let mut last: Option<(StageId, u8)> = None;
            let session = cast(
                &entry,
                &rune,
                provider.as_deref(),
                DEFAULT_TIMEOUT,
                &mut |stage, pct, detail| {
                    // Print each stage's final percentage once.
                    if last != Some((stage, pct)) && pct == 100 {
                        println!("{}: {pct}%", stage.label());
                        last = Some((stage, pct));
                    }
                    if stage == StageId::VerifyProvider {
                        if let Some(fqdn) = detail {
                            println!("Provider with fqdn={fqdn} found");
                        }
                    }
                },
            );
            match session.outcome {
                Ok(()) => {
                    println!("Rune deployed to {}", entry.locator);
                    Ok(())
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Health { target } => {
            let entry = find_target(&entries, &target)?;
            let health = health_query(&entry, DEFAULT_TIMEOUT).map_err(|e| e.to_string())?;
            let state = match health.state {
                0 => "LOADED",
                1 => "MANIFESTED",
                2 => "READY",
                3 => "FAULTED",
                _ => "UNKNOWN",
            };
            println!("state: {state}");
            println!("invocations: {}", health.invocations);
            println!("total_exec_nanos: {}", health.total_exec_nanos);
            println!("boot_time_nanos: {}", health.boot_time_nanos);
            if let Some(err) = health.last_error {
                println!("last_error: {err}");
            }
            Ok(())
        }
        Command::Invoke { target, seed } => {
            let entry = find_target(&entries, &target)?;
            let tensor = invoke(&entry, seed, DEFAULT_TIMEOUT).map_err(|e| e.to_string())?;
            if tensor.dtype() != rune_core::tensor::DType::F32 {
                return Err(format!("unexpected result dtype {:?}", tensor.dtype()));
            }
            let values = tensor.as_f32();
            let rendered: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            println!("{}", rendered.join(" "));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
