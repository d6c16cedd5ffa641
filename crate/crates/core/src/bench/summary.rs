use std::io::Write;

use crate::error::{Error, Result};
use crate::layout::DistPair;

use super::BenchRecord;

/// Reference cell for relative times.
pub const BASELINE: (DistPair, usize) = (DistPair::VC_STAR, 100 << 20);

/// Box-plot statistics of one cell. Times are relative to the baseline
/// cell's mean; `median_vs_baseline_median` divides by its median instead.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub pair: DistPair,
    pub buffer_bytes: u64,
    pub reps: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub median_vs_baseline_median: f64,
    pub messages: u64,
    pub fragments: u64,
    pub bytes: u64,
}

/// Quantile `q` of ascending `sorted`, interpolating linearly between
/// order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn cell_times(records: &[BenchRecord], pair: DistPair, buffer: u64) -> Vec<f64> {
    let mut t: Vec<f64> =
        records.iter().filter(|r| r.pair == pair && r.buffer_bytes == buffer).map(|r| r.seconds).collect();
    t.sort_by(f64::total_cmp);
    t
}

/// Summarizes each cell, in order of first appearance.
pub fn summarize(records: &[BenchRecord], baseline: (DistPair, usize)) -> Result<Vec<CellSummary>> {
    let base = cell_times(records, baseline.0, baseline.1 as u64);
    if base.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "baseline cell {} with {} buffer bytes has no records",
            baseline.0, baseline.1
        )));
    }
    let base_mean = base.iter().sum::<f64>() / base.len() as f64;
    let base_median = quantile(&base, 0.5);

    let mut cells: Vec<(DistPair, u64)> = Vec::new();
    for r in records {
        if !cells.contains(&(r.pair, r.buffer_bytes)) {
            cells.push((r.pair, r.buffer_bytes));
        }
    }
    Ok(cells
        .into_iter()
        .map(|(pair, buffer)| {
            let t = cell_times(records, pair, buffer);
            let first = records.iter().find(|r| r.pair == pair && r.buffer_bytes == buffer).expect("cell has records");
            CellSummary {
                pair,
                buffer_bytes: buffer,
                reps: t.len(),
                min: t[0] / base_mean,
                q1: quantile(&t, 0.25) / base_mean,
                median: quantile(&t, 0.5) / base_mean,
                q3: quantile(&t, 0.75) / base_mean,
                max: t[t.len() - 1] / base_mean,
                median_vs_baseline_median: quantile(&t, 0.5) / base_median,
                messages: first.messages,
                fragments: first.fragments,
                bytes: first.bytes,
            }
        })
        .collect())
}

pub fn write_summary_csv<W: Write>(w: W, cells: &[CellSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header = [
        "pair",
        "buffer_bytes",
        "reps",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "median_vs_baseline_median",
        "messages",
        "fragments",
        "bytes",
    ];
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    out.write_record(header).map_err(io)?;
    for c in cells {
        out.write_record([
            c.pair.to_string(),
            c.buffer_bytes.to_string(),
            c.reps.to_string(),
            format!("{:.4}", c.min),
            format!("{:.4}", c.q1),
            format!("{:.4}", c.median),
            format!("{:.4}", c.q3),
            format!("{:.4}", c.max),
            format!("{:.4}", c.median_vs_baseline_median),
            c.messages.to_string(),
            c.fragments.to_string(),
            c.bytes.to_string(),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pair: DistPair, buffer: u64, rep: u32, seconds: f64) -> BenchRecord {
        BenchRecord { pair, buffer_bytes: buffer, rep, seconds, messages: 1, fragments: 2, bytes: 3 }
    }

    /// Quartile by hand: sort, then interpolate between neighbours.
    fn by_hand(mut xs: Vec<f64>, q: f64) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = (xs.len() - 1) as f64 * q;
        let i = h as usize;
        if i + 1 < xs.len() {
            xs[i] * (1.0 - (h - i as f64)) + xs[i + 1] * (h - i as f64)
        } else {
            xs[i]
        }
    }

    #[test]
    fn quartiles_match_hand_computation() {
        let xs = vec![5.0, 1.0, 4.0, 2.0, 3.0, 9.0, 7.0];
        let mut s = xs.clone();
        s.sort_by(f64::total_cmp);
        for q in [0.0, 0.25, 0.5, 0.75, 1.0] {
            assert!((quantile(&s, q) - by_hand(xs.clone(), q)).abs() < 1e-15);
        }
        assert_eq!(quantile(&s, 0.5), 4.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
    }

    #[test]
    fn baseline_is_normalized() {
        let mut records = Vec::new();
        for (i, t) in [2.0, 2.0, 2.0, 2.0].iter().enumerate() {
            records.push(rec(DistPair::VC_STAR, 100 << 20, i as u32, *t));
        }
        for (i, t) in [1.0, 3.0, 5.0, 7.0, 9.0].iter().enumerate() {
            records.push(rec(DistPair::MC_MR, 1 << 20, i as u32, *t));
        }
        let cells = summarize(&records, BASELINE).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].median, 1.0);
        assert_eq!(cells[0].median_vs_baseline_median, 1.0);
        let c = &cells[1];
        assert_eq!((c.min, c.q1, c.median, c.q3, c.max), (0.5, 1.5, 2.5, 3.5, 4.5));
        assert!(cells.iter().all(|c| c.min > 0.0));
    }

    #[test]
    fn mean_and_median_baselines_differ_on_skewed_baseline() {
        let records: Vec<_> =
            [1.0, 1.0, 4.0].iter().enumerate().map(|(i, t)| rec(DistPair::VC_STAR, 100 << 20, i as u32, *t)).collect();
        let cells = summarize(&records, BASELINE).unwrap();
        assert_eq!(cells[0].median, 0.5);
        assert_eq!(cells[0].median_vs_baseline_median, 1.0);
    }

    #[test]
    fn missing_baseline_is_an_error() {
        let records = vec![rec(DistPair::MC_MR, 1 << 20, 0, 1.0)];
        assert!(summarize(&records, BASELINE).is_err());
    }

    #[test]
    fn summary_csv_has_header() {
        let records = vec![rec(DistPair::VC_STAR, 100 << 20, 0, 1.0)];
        let cells = summarize(&records, BASELINE).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &cells).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("pair,buffer_bytes,reps,min,q1,median"));
        assert!(text.contains("\"[VC,STAR]\",104857600,1,1.0000"));
    }
}
