use std::path::PathBuf;
use std::process::ExitCode;

use alchemist_core::bench::parse_buffer_size;
use alchemist_core::protocol::DEFAULT_BUFFER_BYTES;
use alchemist_core::server::{Gateway, GatewayConfig};
use clap::Parser;

/// Runs a matrix gateway: a driver on START_PORT and NUM_WORKERS workers on
/// the ports that follow it.
#[derive(Debug, Parser)]
#[command(name = "alchemistd", version)]
struct Args {
    /// Port of the driver; worker k listens on START_PORT + 1 + k.
    #[arg(short = 'p', long = "port", value_name = "START_PORT")]
    port: u16,

    #[arg(short = 'n', long = "workers", value_name = "NUM_WORKERS")]
    workers: usize,

    /// Write the startup banner and one line per received command here
    /// instead of printing the banner to stdout.
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,

    /// Largest buffer a session may negotiate, e.g. 100MB or 1048576.
    #[arg(long, value_name = "BYTES", value_parser = parse_size, default_value_t = DEFAULT_BUFFER_BYTES)]
    max_buffer: usize,

    /// Write `host:port` of the driver to this file once listening.
    #[arg(long, value_name = "PATH")]
    address_file: Option<PathBuf>,

    /// Address to bind and advertise.
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

fn parse_size(s: &str) -> Result<usize, String> {
    parse_buffer_size(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let mut config = GatewayConfig::new(args.workers, args.port);
    config.host = args.host;
    config.max_buffer_bytes = args.max_buffer;
    config.log_path = args.log;
    config.address_file = args.address_file;
    let print_banner = config.log_path.is_none();
    match Gateway::start(config) {
        Ok(gateway) => {
            if print_banner {
                for line in gateway.banner() {
                    println!("{line}");
                }
            }
            gateway.wait();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("alchemistd: {e}");
            ExitCode::FAILURE
        }
    }
}
