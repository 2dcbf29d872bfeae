//! The `fibseg` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error (bad flags or arguments), 2 data or
//! validation error. Diagnostics go to stderr; results go to files or
//! stdout.

use std::ffi::OsString;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::classifier::{segment, CascadeConfig, CascadeStats, WorkerCount};
use crate::error::{Error, Result};
use crate::geometry::{resample_to, Fiber};
use crate::io::{
    format_sig6, load_atlas, read_assignments, read_fiber_file, write_assignments,
    write_fiber_file, write_segmented_bundles, Assignment, Atlas,
};
use crate::validation::bench::{run_segment_sample, BENCH_CSV_HEADER};
use crate::validation::synthetic::{
    generate_query_set, generate_synthetic, write_synthetic, SyntheticSpec,
};
use crate::validation::{compare_assignments, oracle_classify, OracleMode};

/// Fraction of distractor fibers in benchmark query sets.
const BENCH_DISTRACTOR_FRACTION: f64 = 0.2;

#[derive(Parser)]
#[command(
    name = "fibseg",
    version,
    about = "Atlas-based white-matter fiber bundle segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SegmentMode {
    /// Four-stage discard cascade (production path).
    Cascade,
    /// Brute-force reference with the endpoint orientation rule.
    OracleEndpoint,
    /// Brute-force reference minimizing over both orientations.
    OracleExact,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ValidateMode {
    /// Compare the cascade against the endpoint-orientation oracle.
    Endpoint,
    /// Report how the exact two-orientation metric differs.
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Label every subject fiber with its closest atlas bundle.
    Segment {
        /// Subject fiber file.
        #[arg(long)]
        subject: PathBuf,
        /// Atlas directory (holds bundles.txt).
        #[arg(long)]
        atlas: PathBuf,
        /// Output directory for assignments.csv, bundles/, stats.txt.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads: a count or `auto`.
        #[arg(long, default_value = "auto")]
        threads: WorkerCount,
        #[arg(long, value_enum, default_value = "cascade")]
        mode: SegmentMode,
        /// Four stage-3 point indices, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        test3_indices: Option<Vec<usize>>,
    },
    /// Resample every fiber of a file to equidistant points.
    Resample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// Generate a synthetic atlas + subject with ground truth.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        bundles: usize,
        /// Centroids per bundle.
        #[arg(long)]
        centroids: usize,
        /// Member fibers per bundle.
        #[arg(long)]
        fibers: usize,
        #[arg(long)]
        distractors: usize,
        /// Per-point Gaussian noise, mm.
        #[arg(long)]
        sigma: f64,
        /// Minimum prototype separation, mm (must exceed 2x threshold).
        #[arg(long)]
        separation: f64,
        /// Bundle acceptance threshold, mm.
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Check the cascade against a brute-force oracle.
    Validate {
        #[arg(long)]
        subject: PathBuf,
        #[arg(long)]
        atlas: PathBuf,
        #[arg(long, value_enum, default_value = "endpoint")]
        mode: ValidateMode,
        #[arg(long, default_value = "auto")]
        threads: WorkerCount,
    },
    /// Time and measure segmentation over dataset sizes and worker counts.
    Bench {
        #[arg(long)]
        atlas: PathBuf,
        /// Fiber counts, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sizes: Vec<usize>,
        /// Worker counts, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1")]
        threads: Vec<NonZeroUsize>,
        /// Output CSV path.
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Summarize an assignment CSV per bundle.
    Stats {
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        atlas: PathBuf,
    },
    /// One benchmark configuration in this process (used by `bench`).
    #[command(hide = true)]
    BenchOne {
        #[arg(long)]
        atlas: PathBuf,
        #[arg(long)]
        fibers: usize,
        #[arg(long)]
        workers: NonZeroUsize,
        #[arg(long)]
        seed: u64,
    },
}

/// Parses `argv` and runs the selected subcommand, returning the process
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e @ Error::InvalidArgument(_)) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Segment {
            subject,
            atlas,
            out,
            threads,
            mode,
            test3_indices,
        } => cmd_segment(&subject, &atlas, &out, threads, mode, test3_indices),
        Command::Resample { input, out, points } => cmd_resample(&input, &out, points),
        Command::GenSynthetic {
            out,
            bundles,
            centroids,
            fibers,
            distractors,
            sigma,
            separation,
            threshold,
            seed,
        } => {
            let spec = SyntheticSpec {
                bundle_count: bundles,
                centroids_per_bundle: centroids,
                fibers_per_bundle: fibers,
                distractor_count: distractors,
                sigma,
                separation,
                threshold,
                seed,
            };
            cmd_gen_synthetic(&spec, &out)
        }
        Command::Validate {
            subject,
            atlas,
            mode,
            threads,
        } => cmd_validate(&subject, &atlas, mode, threads),
        Command::Bench {
            atlas,
            sizes,
            threads,
            csv,
            seed,
        } => cmd_bench(&atlas, &sizes, &threads, &csv, seed),
        Command::Stats { assignments, atlas } => cmd_stats(&assignments, &atlas),
        Command::BenchOne {
            atlas,
            fibers,
            workers,
            seed,
        } => cmd_bench_one(&atlas, fibers, workers, seed),
    }
}

fn cascade_config(threads: WorkerCount, test3_indices: Option<Vec<usize>>) -> Result<CascadeConfig> {
    let mut config = CascadeConfig {
        workers: threads,
        ..CascadeConfig::default()
    };
    if let Some(indices) = test3_indices {
        let indices: [usize; 4] = indices.try_into().map_err(|v: Vec<usize>| {
            Error::InvalidArgument(format!("--test3-indices needs 4 values, got {}", v.len()))
        })?;
        config.test3_indices = indices;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_segment(
    subject: &Path,
    atlas_dir: &Path,
    out: &Path,
    threads: WorkerCount,
    mode: SegmentMode,
    test3_indices: Option<Vec<usize>>,
) -> Result<i32> {
    let config = cascade_config(threads, test3_indices)?;
    let dataset = read_fiber_file(subject)?;
    let atlas = load_atlas(atlas_dir)?;
    let fibers = dataset.resampled();

    let (assignments, stats) = match mode {
        SegmentMode::Cascade => {
            let (a, s) = segment(&fibers, &atlas, &config)?;
            (a, Some(s))
        }
        SegmentMode::OracleEndpoint => (
            oracle_classify(&fibers, &atlas, OracleMode::EndpointOrientation, threads)?,
            None,
        ),
        SegmentMode::OracleExact => (
            oracle_classify(&fibers, &atlas, OracleMode::Exact, threads)?,
            None,
        ),
    };

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_assignments(&assignments, &atlas, out.join("assignments.csv"))?;
    write_segmented_bundles(&dataset, &assignments, &atlas, out.join("bundles"))?;

    let mut report = stats_report(&assignments, &atlas);
    if let Some(stats) = &stats {
        report.push('\n');
        report.push_str(&cascade_stats_text(stats));
    }
    let stats_path = out.join("stats.txt");
    std::fs::write(&stats_path, report).map_err(|e| Error::io(&stats_path, e))?;

    let assigned = assignments.iter().filter(|a| a.matched.is_some()).count();
    eprintln!(
        "segmented {} fibers against {} bundles ({} centroids): {} assigned, {} unassigned",
        fibers.len(),
        atlas.bundles.len(),
        atlas.total_centroids(),
        assigned,
        fibers.len() - assigned
    );
    Ok(0)
}

fn cmd_resample(input: &Path, out: &Path, points: usize) -> Result<i32> {
    let dataset = read_fiber_file(input)?;
    let resampled: Result<Vec<Fiber>> = dataset
        .fibers
        .iter()
        .map(|f| Fiber::new(resample_to(f, points)?))
        .collect();
    write_fiber_file(&resampled?, out)?;
    eprintln!(
        "resampled {} fibers to {points} points: {}",
        dataset.len(),
        out.display()
    );
    Ok(0)
}

fn cmd_gen_synthetic(spec: &SyntheticSpec, out: &Path) -> Result<i32> {
    let data = generate_synthetic(spec)?;
    write_synthetic(&data, out)?;
    eprintln!(
        "wrote {} bundles ({} centroids), {} subject fibers to {}",
        data.atlas.bundles.len(),
        data.atlas.total_centroids(),
        data.fibers.len(),
        out.display()
    );
    Ok(0)
}

fn cmd_validate(
    subject: &Path,
    atlas_dir: &Path,
    mode: ValidateMode,
    threads: WorkerCount,
) -> Result<i32> {
    let dataset = read_fiber_file(subject)?;
    let atlas = load_atlas(atlas_dir)?;
    let fibers = dataset.resampled();

    let config = CascadeConfig {
        workers: threads,
        ..CascadeConfig::default()
    };
    let (cascade, _) = segment(&fibers, &atlas, &config)?;
    let endpoint = oracle_classify(&fibers, &atlas, OracleMode::EndpointOrientation, threads)?;
    let endpoint_report = compare_assignments(&cascade, &endpoint)?;

    match mode {
        ValidateMode::Endpoint => {
            println!("cascade vs endpoint-orientation oracle");
            println!("{endpoint_report}");
        }
        ValidateMode::Exact => {
            let exact = oracle_classify(&fibers, &atlas, OracleMode::Exact, threads)?;
            let exact_report = compare_assignments(&cascade, &exact)?;
            println!("cascade vs exact oracle");
            println!("{exact_report}");
        }
    }

    if endpoint_report.identical() {
        Ok(0)
    } else {
        eprintln!(
            "error: cascade diverged from the endpoint-orientation oracle ({} mismatches, max score diff {:e})",
            endpoint_report.mismatches(),
            endpoint_report.max_score_difference
        );
        Ok(2)
    }
}

fn cmd_bench(
    atlas_dir: &Path,
    sizes: &[usize],
    threads: &[NonZeroUsize],
    csv: &Path,
    seed: u64,
) -> Result<i32> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("--sizes must not be empty".into()));
    }
    load_atlas(atlas_dir)?; // validate before spawning children

    let exe = std::env::current_exe().map_err(|e| Error::io("fibseg", e))?;
    let mut rows = Vec::new();
    for &size in sizes {
        for &workers in threads {
            let output = std::process::Command::new(&exe)
                .arg("bench-one")
                .arg("--atlas")
                .arg(atlas_dir)
                .arg("--fibers")
                .arg(size.to_string())
                .arg("--workers")
                .arg(workers.to_string())
                .arg("--seed")
                .arg(seed.to_string())
                .stderr(std::process::Stdio::inherit())
                .output()
                .map_err(|e| Error::io(&exe, e))?;
            if !output.status.success() {
                return Err(Error::InvalidArgument(format!(
                    "bench child for {size} fibers x {workers} workers failed with {}",
                    output.status
                )));
            }
            let row = String::from_utf8_lossy(&output.stdout).trim().to_string();
            eprintln!("bench: {row}");
            rows.push(row);
        }
    }

    let mut text = String::from(BENCH_CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    std::fs::write(csv, text).map_err(|e| Error::io(csv, e))?;
    eprintln!("wrote {}", csv.display());
    Ok(0)
}

fn cmd_bench_one(
    atlas_dir: &Path,
    fibers: usize,
    workers: NonZeroUsize,
    seed: u64,
) -> Result<i32> {
    let atlas = load_atlas(atlas_dir)?;
    let sigma = atlas.min_threshold() / 8.0;
    let query = generate_query_set(&atlas, fibers, BENCH_DISTRACTOR_FRACTION, sigma, seed);
    let sample = run_segment_sample(&query, &atlas, WorkerCount::Fixed(workers))?;
    println!("{}", sample.csv_row());
    Ok(0)
}

fn cmd_stats(assignments_path: &Path, atlas_dir: &Path) -> Result<i32> {
    let assignments = read_assignments(assignments_path)?;
    let atlas = load_atlas(atlas_dir)?;
    for a in &assignments {
        if let Some(m) = a.matched {
            if m.bundle_index >= atlas.bundles.len() {
                return Err(Error::AssignmentParse {
                    path: assignments_path.to_path_buf(),
                    line: a.fiber_index + 2,
                    message: format!(
                        "bundle index {} outside the atlas ({} bundles)",
                        m.bundle_index,
                        atlas.bundles.len()
                    ),
                });
            }
        }
    }
    print!("{}", stats_report(&assignments, &atlas));
    Ok(0)
}

/// Per-bundle fiber counts and score distribution, plus the unassigned
/// tally. Counts over all bundles plus unassigned sum to the dataset size.
pub fn stats_report(assignments: &[Assignment], atlas: &Atlas) -> String {
    let mut per_bundle: Vec<Vec<f64>> = vec![Vec::new(); atlas.bundles.len()];
    let mut unassigned = 0usize;
    for a in assignments {
        match a.matched {
            Some(m) if m.bundle_index < atlas.bundles.len() => {
                per_bundle[m.bundle_index].push(m.distance)
            }
            Some(_) => unassigned += 1, // out-of-atlas index; callers validate first
            None => unassigned += 1,
        }
    }

    let mut out = String::from("bundle name count min median max\n");
    for (i, (bundle, distances)) in atlas.bundles.iter().zip(&mut per_bundle).enumerate() {
        if distances.is_empty() {
            out.push_str(&format!("{i} {} 0 - - -\n", bundle.name));
            continue;
        }
        distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = distances.len();
        let median = if n % 2 == 1 {
            distances[n / 2]
        } else {
            (distances[n / 2 - 1] + distances[n / 2]) / 2.0
        };
        out.push_str(&format!(
            "{i} {} {n} {} {} {}\n",
            bundle.name,
            format_sig6(distances[0]),
            format_sig6(median),
            format_sig6(distances[n - 1]),
        ));
    }
    out.push_str(&format!("unassigned {unassigned}\n"));
    out.push_str(&format!("total {}\n", assignments.len()));
    out
}

fn cascade_stats_text(stats: &CascadeStats) -> String {
    let total = stats.pairs_total.max(1) as f64;
    let line = |label: &str, n: u64| format!("{label} {n} ({:.4})\n", n as f64 / total);
    let mut out = String::from("cascade stage outcomes\n");
    out.push_str(&format!("pairs_total {}\n", stats.pairs_total));
    out.push_str(&line("discarded_test1", stats.discarded_test1));
    out.push_str(&line("discarded_test2", stats.discarded_test2));
    out.push_str(&line("discarded_test3", stats.discarded_test3));
    out.push_str(&line("discarded_test4_dme", stats.discarded_test4_dme));
    out.push_str(&line("discarded_test4_tn", stats.discarded_test4_tn));
    out.push_str(&line("accepted", stats.accepted));
    out
}
