//! Transfer-time benchmark.
//!
//! Each cell of the sweep is one `(pair, buffer size)` combination. A cell
//! opens a fresh session per repetition, times one send of the same seeded
//! random matrix, and records the planned message, fragment and byte counts
//! next to the measured wall time. Session setup and teardown are outside
//! the timed region.

mod summary;

pub use summary::{quantile, summarize, write_summary_csv, CellSummary, BASELINE};

use std::io::{Read, Write};
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::client::{Client, RowPartitionedSource};
use crate::error::{Error, Result};
use crate::layout::{even_partitioning, plan_transfer, DistPair, Layout, ProcessGrid, TransferPlan};
use crate::protocol::DEFAULT_BUFFER_BYTES;
use crate::server::{Gateway, GatewayConfig};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub m: usize,
    pub n: usize,
    pub pairs: Vec<DistPair>,
    pub buffer_sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub workers: usize,
    /// Pause between repetitions of a cell.
    pub interval: Duration,
    /// Row partitions of the source; 1 sends the matrix as a whole.
    pub partitions: usize,
    /// Existing gateway to use instead of an in-process one.
    pub connect: Option<(String, u16)>,
}

impl BenchConfig {
    pub fn new(m: usize, n: usize, workers: usize) -> Self {
        Self {
            m,
            n,
            pairs: vec![DistPair::VC_STAR, DistPair::STAR_VC, DistPair::MC_MR],
            buffer_sizes: vec![1 << 20, 10 << 20, 100 << 20],
            repetitions: 10,
            seed: 0,
            workers,
            interval: Duration::ZERO,
            partitions: 1,
            connect: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("need at least one worker".into()));
        }
        if self.partitions == 0 || self.partitions > self.m.max(1) {
            return Err(Error::InvalidArgument(format!("{} partitions for {} rows", self.partitions, self.m)));
        }
        if self.pairs.is_empty() || self.buffer_sizes.is_empty() {
            return Err(Error::InvalidArgument("need at least one pair and one buffer size".into()));
        }
        Ok(())
    }

    /// The seeded source matrix shared by every cell.
    pub fn matrix(&self) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Array2::from_shape_fn((self.m, self.n), |_| rng.random_range(-1.0..1.0))
    }

    pub fn plan(&self, pair: DistPair, buffer_bytes: usize) -> Result<TransferPlan> {
        let grid = ProcessGrid::make(self.workers, None)?;
        let parts = even_partitioning(self.m, self.partitions);
        plan_transfer(&parts, &Layout::new(grid, pair), self.m, self.n, 8, buffer_bytes)
    }
}

/// One timed repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    #[serde(with = "pair_text")]
    pub pair: DistPair,
    pub buffer_bytes: u64,
    pub rep: u32,
    pub seconds: f64,
    pub messages: u64,
    pub fragments: u64,
    pub bytes: u64,
}

mod pair_text {
    use super::DistPair;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &DistPair, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(p)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DistPair, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// A cell that could not be completed.
#[derive(Debug)]
pub struct CellFailure {
    pub pair: DistPair,
    pub buffer_bytes: usize,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub failures: Vec<CellFailure>,
}

/// Runs every cell of `config`, calling `on_record` as records arrive.
pub fn run_bench(config: &BenchConfig, mut on_record: impl FnMut(&BenchRecord)) -> Result<BenchReport> {
    config.validate()?;
    let _local;
    let (host, port) = match &config.connect {
        Some((h, p)) => (h.clone(), *p),
        None => {
            let mut gc = GatewayConfig::new(config.workers, 0);
            gc.max_buffer_bytes = config.buffer_sizes.iter().copied().max().unwrap_or(0).max(DEFAULT_BUFFER_BYTES);
            let g = Gateway::start_any(gc)?;
            let addr = (g.host().to_owned(), g.port());
            _local = g;
            addr
        }
    };
    let a = config.matrix();
    let parts = (config.partitions > 1).then(|| RowPartitionedSource::from_dense(&a, config.partitions));

    let mut report = BenchReport::default();
    for &pair in &config.pairs {
        for &buffer in &config.buffer_sizes {
            let mut cell = || -> Result<Vec<BenchRecord>> {
                let plan = config.plan(pair, buffer)?;
                let mut out = Vec::with_capacity(config.repetitions);
                for rep in 0..config.repetitions {
                    if rep > 0 && !config.interval.is_zero() {
                        thread::sleep(config.interval);
                    }
                    let mut c = Client::connect_with_buffer(&host, port, buffer)?;
                    if c.buffer_bytes() != buffer {
                        return Err(Error::InvalidBuffer(format!(
                            "gateway confirmed {} bytes instead of {buffer}",
                            c.buffer_bytes()
                        )));
                    }
                    c.request_workers(config.workers)?;
                    let start = Instant::now();
                    match &parts {
                        Some(p) => c.send_partitioned(p, pair)?,
                        None => c.send_matrix(&a, pair)?,
                    };
                    let seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
                    c.close()?;
                    let record = BenchRecord {
                        pair,
                        buffer_bytes: buffer as u64,
                        rep: rep as u32,
                        seconds,
                        messages: plan.total_messages,
                        fragments: plan.total_fragments,
                        bytes: plan.total_bytes,
                    };
                    on_record(&record);
                    out.push(record);
                }
                Ok(out)
            };
            match cell() {
                Ok(records) => report.records.extend(records),
                Err(error) => {
                    log::warn!("cell {pair} / {buffer} bytes failed: {error}");
                    report.failures.push(CellFailure { pair, buffer_bytes: buffer, error });
                }
            }
        }
    }
    Ok(report)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Decode(format!("csv: {other:?}")),
    }
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: Write>(w: W, records: &[BenchRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<BenchRecord>> {
    csv::Reader::from_reader(r).deserialize().map(|r| r.map_err(csv_error)).collect()
}

/// Parses `4096`, `64K`, `1MB`, `10MiB`, `1G`. Suffixes are binary.
pub fn parse_buffer_size(s: &str) -> Result<usize> {
    let t = s.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (digits, unit) = t.split_at(split);
    let value: usize = digits.parse().map_err(|_| Error::InvalidArgument(format!("bad buffer size {s:?}")))?;
    let shift = match unit.trim().to_ascii_uppercase().as_str() {
        "" | "B" => 0,
        "K" | "KB" | "KIB" => 10,
        "M" | "MB" | "MIB" => 20,
        "G" | "GB" | "GIB" => 30,
        _ => return Err(Error::InvalidArgument(format!("bad buffer size unit in {s:?}"))),
    };
    value.checked_mul(1 << shift).ok_or_else(|| Error::InvalidArgument(format!("buffer size {s:?} overflows")))
}

/// Parses a comma-separated list of pairs such as `VC:STAR,MC:MR`. Bracketed
/// pairs may use a comma inside the brackets: `[VC,STAR],[MC,MR]`.
pub fn parse_pair_list(s: &str) -> Result<Vec<DistPair>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(DistPair::from_str(&s[start..i])?);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(DistPair::from_str(&s[start..])?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_sizes() {
        assert_eq!(parse_buffer_size("4096").unwrap(), 4096);
        assert_eq!(parse_buffer_size("64K").unwrap(), 64 << 10);
        assert_eq!(parse_buffer_size("1MB").unwrap(), 1 << 20);
        assert_eq!(parse_buffer_size("100MiB").unwrap(), 100 << 20);
        assert_eq!(parse_buffer_size("2g").unwrap(), 2 << 30);
        assert!(parse_buffer_size("MB").is_err());
        assert!(parse_buffer_size("3TB").is_err());
    }

    #[test]
    fn pair_lists() {
        let want = vec![DistPair::VC_STAR, DistPair::MC_MR];
        assert_eq!(parse_pair_list("VC:STAR,MC:MR").unwrap(), want);
        assert_eq!(parse_pair_list("[VC,STAR],[MC,MR]").unwrap(), want);
        assert!(parse_pair_list("VC:MC").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let records = vec![
            BenchRecord {
                pair: DistPair::VC_STAR,
                buffer_bytes: 1 << 20,
                rep: 0,
                seconds: 0.1 + 0.2,
                messages: 17,
                fragments: 2000,
                bytes: 16_000_000,
            },
            BenchRecord {
                pair: DistPair::STAR_VR,
                buffer_bytes: 100 << 20,
                rep: 9,
                seconds: 1e-7,
                messages: 4,
                fragments: 2_000_000,
                bytes: 16_000_000,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("pair,buffer_bytes,rep,seconds,messages,fragments,bytes\n"));
        assert!(text.contains("\"[VC,STAR]\""));
        assert_eq!(read_csv(&buf[..]).unwrap(), records);
    }

    #[test]
    fn config_validation() {
        let mut c = BenchConfig::new(10, 10, 2);
        c.validate().unwrap();
        c.repetitions = 0;
        assert!(c.validate().is_err());
        let mut c = BenchConfig::new(10, 10, 2);
        c.partitions = 11;
        assert!(c.validate().is_err());
    }

    #[test]
    fn cell_count_and_plan_fields() {
        let mut c = BenchConfig::new(40, 30, 4);
        c.buffer_sizes = vec![4096, 16 << 10, 1 << 20];
        c.repetitions = 2;
        let mut seen = 0;
        let report = run_bench(&c, |_| seen += 1).unwrap();
        assert!(report.failures.is_empty());
        assert_eq!(report.records.len(), 3 * 3 * 2);
        assert_eq!(seen, report.records.len());
        for r in &report.records {
            let plan = c.plan(r.pair, r.buffer_bytes as usize).unwrap();
            assert_eq!((r.messages, r.fragments, r.bytes), (plan.total_messages, plan.total_fragments, plan.total_bytes));
            assert!(r.seconds > 0.0);
        }
    }

    #[test]
    fn failing_cell_does_not_abort_run() {
        let mut c = BenchConfig::new(20, 20, 2);
        // below the handshake minimum, so that cell fails
        c.buffer_sizes = vec![1000, 8192];
        c.pairs = vec![DistPair::VC_STAR];
        c.repetitions = 1;
        let report = run_bench(&c, |_| {}).unwrap();
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].buffer_bytes, 1000);
        assert_eq!(report.records.len(), 1);
    }
}
