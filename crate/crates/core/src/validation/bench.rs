//! Wall-clock and peak-memory measurement for segmentation runs.
//!
//! One benchmark configuration = one (fiber count, worker count) pair. The
//! CLI runs each configuration in a fresh child process so its peak
//! resident memory is isolated; the child generates the query set, times
//! [`segment`] alone (no file I/O inside the timed region), reads its own
//! peak RSS, and prints one CSV row.

use std::time::Instant;

use crate::classifier::{segment, CascadeConfig, CascadeStats, WorkerCount};
use crate::error::Result;
use crate::geometry::ResampledFiber;
use crate::io::Atlas;

pub const BENCH_CSV_HEADER: &str =
    "fibers,workers,seconds,peak_bytes,discard_t1,discard_t2,discard_t3,discard_t4,accepted";

/// One measured segmentation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchSample {
    pub fibers: usize,
    pub workers: usize,
    pub seconds: f64,
    pub peak_bytes: u64,
    pub stats: CascadeStats,
}

impl BenchSample {
    /// Row matching [`BENCH_CSV_HEADER`]: stage outcomes as fractions of
    /// all pairs, the two full-metric rejection buckets combined.
    pub fn csv_row(&self) -> String {
        let total = self.stats.pairs_total.max(1) as f64;
        let frac = |n: u64| n as f64 / total;
        format!(
            "{},{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.fibers,
            self.workers,
            self.seconds,
            self.peak_bytes,
            frac(self.stats.discarded_test1),
            frac(self.stats.discarded_test2),
            frac(self.stats.discarded_test3),
            frac(self.stats.discarded_test4_dme + self.stats.discarded_test4_tn),
            frac(self.stats.accepted),
        )
    }
}

/// Parses a row produced by [`BenchSample::csv_row`] back into
/// (fibers, workers, seconds, peak_bytes).
pub fn parse_csv_row(row: &str) -> Option<(usize, usize, f64, u64)> {
    let mut it = row.split(',');
    let fibers = it.next()?.parse().ok()?;
    let workers = it.next()?.parse().ok()?;
    let seconds = it.next()?.parse().ok()?;
    let peak = it.next()?.parse().ok()?;
    Some((fibers, workers, seconds, peak))
}

/// Peak resident set size of this process, in bytes, from the platform
/// accounting: `VmHWM` when /proc carries it, `getrusage` max RSS
/// otherwise (some container runtimes omit VmHWM).
pub fn peak_rss_bytes() -> Option<u64> {
    if let Ok(status) = std::fs::read_to_string("/proc/self/status") {
        for line in status.lines() {
            if let Some(rest) = line.strip_prefix("VmHWM:") {
                if let Ok(kb) = rest.trim().trim_end_matches("kB").trim().parse::<u64>() {
                    return Some(kb * 1024);
                }
            }
        }
    }
    let mut usage = std::mem::MaybeUninit::<libc::rusage>::zeroed();
    // SAFETY: getrusage fills the struct we own; RUSAGE_SELF is always valid.
    let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, usage.as_mut_ptr()) };
    if rc == 0 {
        // SAFETY: rc == 0 guarantees initialization.
        let usage = unsafe { usage.assume_init() };
        // ru_maxrss is kilobytes on Linux.
        Some(usage.ru_maxrss as u64 * 1024)
    } else {
        None
    }
}

/// Times one segmentation run and packages it with this process's peak
/// RSS. Generation and loading happen before the clock starts.
pub fn run_segment_sample(
    fibers: &[ResampledFiber],
    atlas: &Atlas,
    workers: WorkerCount,
) -> Result<BenchSample> {
    let config = CascadeConfig {
        workers,
        ..CascadeConfig::default()
    };
    let start = Instant::now();
    let (_, stats) = segment(fibers, atlas, &config)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(BenchSample {
        fibers: fibers.len(),
        workers: workers.resolve(),
        seconds,
        peak_bytes: peak_rss_bytes().unwrap_or(0),
        stats,
    })
}
