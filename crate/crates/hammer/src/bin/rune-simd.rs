use std::net::TcpListener;
use std::process::ExitCode;

use clap::Parser;

use hammer::daemon::{parse_capability_spec, DeviceServer};
use rune_core::runicos::DeviceProfile;

/// Device simulator daemon: hosts one Rune behind RunicOS and serves the
/// Hammer wire protocol over TCP.
#[derive(Parser)]
#[command(name = "rune-simd")]
struct Cli {
    /// Address to listen on, e.g. 127.0.0.1:7701 (port 0 picks a free port)
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
    /// Device name reported in discovery
    #[arg(long, default_value = "Portenta H7")]
    name: String,
    /// Provider fqdn reported during cast
    #[arg(long, default_value = "sim:mbed")]
    fqdn: String,
    /// Capabilities, e.g. rand:seed=0 audio:const=0.5 audio:file=/path.f32
    #[arg(long = "capability", default_values_t = ["rand:seed=0".to_string(), "audio:seed=0".to_string()])]
    capabilities: Vec<String>,
    /// Memory budget in bytes
    #[arg(long, default_value_t = 1 << 20)]
    memory: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut capabilities = Vec::new();
    for spec in &cli.capabilities {
        match parse_capability_spec(spec) {
            Ok(pair) => capabilities.push(pair),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
    }
    let profile = match DeviceProfile::new(cli.name.clone(), capabilities, cli.memory) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let listener = match TcpListener::bind(&cli.listen) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", cli.listen);
            return ExitCode::from(1);
        }
    };
    let addr = listener.local_addr().expect("bound listener has an address");
    println!("listening on {addr}");
    let server = DeviceServer::new(cli.name, cli.fqdn, profile);
    server.serve_tcp(listener);
    ExitCode::SUCCESS
}
