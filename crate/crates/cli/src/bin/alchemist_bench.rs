use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use alchemist_core::bench::{
    parse_buffer_size, parse_pair_list, run_bench, summarize, write_csv, write_summary_csv, BenchConfig, BASELINE,
};
use alchemist_core::client::parse_address;
use clap::Parser;

/// Times matrix sends across distribution pairs and buffer sizes.
#[derive(Debug, Parser)]
#[command(name = "alchemist-bench", version)]
struct Args {
    #[arg(long, default_value_t = 2000)]
    rows: usize,

    #[arg(long, default_value_t = 1000)]
    cols: usize,

    #[arg(long, default_value_t = 4)]
    workers: usize,

    /// Comma-separated pairs such as VC:STAR,STAR:VC,MC:MR.
    #[arg(long, default_value = "VC:STAR,STAR:VC,MC:MR")]
    pairs: String,

    /// Comma-separated buffer sizes; K, M and G suffixes are binary.
    #[arg(long, default_value = "1MB,10MB,100MB")]
    buffers: String,

    #[arg(long, default_value_t = 10)]
    reps: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write per-repetition records here instead of stdout.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Write the relative summary table here.
    #[arg(long, value_name = "PATH")]
    summary: Option<PathBuf>,

    /// Seconds to wait between repetitions of a cell.
    #[arg(long, default_value_t = 0.0)]
    interval: f64,

    /// Use a running gateway instead of starting one in-process.
    #[arg(long, value_name = "HOST:PORT")]
    connect: Option<String>,

    /// Send the matrix as this many contiguous row partitions.
    #[arg(long, default_value_t = 1)]
    partitions: usize,
}

fn run(args: Args) -> alchemist_core::Result<()> {
    let mut config = BenchConfig::new(args.rows, args.cols, args.workers);
    config.pairs = parse_pair_list(&args.pairs)?;
    config.buffer_sizes = args.buffers.split(',').map(parse_buffer_size).collect::<alchemist_core::Result<_>>()?;
    config.repetitions = args.reps;
    config.seed = args.seed;
    config.partitions = args.partitions;
    if !(args.interval.is_finite() && args.interval >= 0.0) {
        return Err(alchemist_core::Error::InvalidArgument(format!("interval {} is not a duration", args.interval)));
    }
    config.interval = Duration::from_secs_f64(args.interval);
    config.connect = args.connect.as_deref().map(parse_address).transpose()?;

    let report = run_bench(&config, |r| {
        log::info!("{} {} rep {}: {:.4}s", r.pair, r.buffer_bytes, r.rep, r.seconds);
    })?;
    for f in &report.failures {
        eprintln!("cell {} with {} buffer bytes failed: {}", f.pair, f.buffer_bytes, f.error);
    }
    match &args.csv {
        Some(path) => write_csv(File::create(path)?, &report.records)?,
        None => write_csv(io::stdout().lock(), &report.records)?,
    }
    match summarize(&report.records, BASELINE) {
        Ok(cells) => match &args.summary {
            Some(path) => write_summary_csv(File::create(path)?, &cells)?,
            None => {
                let mut err = io::stderr().lock();
                writeln!(err, "relative to the mean of {} with {} buffer bytes:", BASELINE.0, BASELINE.1)?;
                write_summary_csv(err, &cells)?;
            }
        },
        Err(e) => eprintln!("no summary: {e}"),
    }
    if report.records.is_empty() {
        return Err(alchemist_core::Error::InvalidArgument("every cell failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alchemist-bench: {e}");
            ExitCode::FAILURE
        }
    }
}
