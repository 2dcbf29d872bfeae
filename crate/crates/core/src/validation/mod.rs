//! Reference classifiers, result comparison, synthetic data, benchmarks.
//!
//! The oracles classify with no discard stages at all: every (fiber,
//! centroid) pair gets a full score. They anchor two properties:
//!
//! * the cascade must equal the endpoint-orientation oracle exactly — the
//!   cascade only skips work that provably cannot change the outcome under
//!   that oracle's semantics;
//! * the exact oracle (minimum over both orientations) quantifies how far
//!   the endpoint orientation rule can drift from the two-sided metric.

pub mod bench;
pub mod synthetic;

use rayon::prelude::*;

use crate::classifier::{endpoint_orientation, WorkerCount};
use crate::error::{Error, Result};
use crate::geometry::{
    length_penalty_value, max_euclidean_distance, max_pointwise_distance, ResampledFiber,
};
use crate::io::{Assignment, Atlas, BundleMatch};

/// Which reference semantics an oracle run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Orientation fixed by the endpoint rule, score from that single
    /// orientation. The cascade's reference semantics.
    EndpointOrientation,
    /// Score minimized over both orientations.
    Exact,
}

/// Full normalized score of one pair under the chosen mode, with no
/// threshold screening.
pub fn oracle_pair_score(fiber: &ResampledFiber, centroid: &ResampledFiber, mode: OracleMode) -> f64 {
    let max = match mode {
        OracleMode::Exact => max_euclidean_distance(fiber, centroid),
        OracleMode::EndpointOrientation => {
            let (orientation, _) = endpoint_orientation(fiber, centroid);
            max_pointwise_distance(fiber, centroid, orientation)
        }
    };
    max + length_penalty_value(fiber.length(), centroid.length())
}

fn oracle_classify_one(fiber: &ResampledFiber, atlas: &Atlas, mode: OracleMode) -> Option<BundleMatch> {
    let mut best: Option<BundleMatch> = None;
    for (bundle_index, bundle) in atlas.bundles.iter().enumerate() {
        for centroid in &bundle.centroids {
            let score = oracle_pair_score(fiber, centroid, mode);
            if score <= bundle.threshold && best.is_none_or(|b| score < b.distance) {
                best = Some(BundleMatch {
                    bundle_index,
                    distance: score,
                });
            }
        }
    }
    best
}

/// Brute-force classification of every fiber: full score for every pair,
/// accept at or under the bundle threshold, keep the minimum with the same
/// tie-break as the cascade (lowest bundle, then lowest centroid index).
pub fn oracle_classify(
    fibers: &[ResampledFiber],
    atlas: &Atlas,
    mode: OracleMode,
    workers: WorkerCount,
) -> Result<Vec<Assignment>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.resolve())
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    let assignments = pool.install(|| {
        fibers
            .par_iter()
            .enumerate()
            .map(|(fiber_index, fiber)| Assignment {
                fiber_index,
                matched: oracle_classify_one(fiber, atlas, mode),
            })
            .collect()
    });
    Ok(assignments)
}

/// Element-wise comparison of two assignment sequences.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiscrepancyReport {
    pub total: usize,
    /// Same outcome: both unassigned, or both assigned to the same bundle.
    pub matching: usize,
    /// Both assigned, different bundles.
    pub label_mismatches: usize,
    /// Assigned on one side, unassigned on the other.
    pub assignment_state_mismatches: usize,
    /// Largest |score difference| over pairs assigned to the same bundle.
    pub max_score_difference: f64,
}

impl DiscrepancyReport {
    pub fn mismatches(&self) -> usize {
        self.label_mismatches + self.assignment_state_mismatches
    }

    /// True when the sequences are identical in labels and scores.
    pub fn identical(&self) -> bool {
        self.mismatches() == 0 && self.max_score_difference == 0.0
    }
}

impl std::fmt::Display for DiscrepancyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "total fibers:                   {}", self.total)?;
        writeln!(f, "matching assignments:           {}", self.matching)?;
        writeln!(f, "label mismatches:               {}", self.label_mismatches)?;
        writeln!(
            f,
            "assigned/unassigned mismatches: {}",
            self.assignment_state_mismatches
        )?;
        write!(
            f,
            "max score difference (matches): {:e}",
            self.max_score_difference
        )
    }
}

/// Compares two assignment sequences of equal length.
pub fn compare_assignments(a: &[Assignment], b: &[Assignment]) -> Result<DiscrepancyReport> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut report = DiscrepancyReport {
        total: a.len(),
        ..Default::default()
    };
    for (x, y) in a.iter().zip(b) {
        match (x.matched, y.matched) {
            (None, None) => report.matching += 1,
            (Some(mx), Some(my)) if mx.bundle_index == my.bundle_index => {
                report.matching += 1;
                let diff = (mx.distance - my.distance).abs();
                if diff > report.max_score_difference {
                    report.max_score_difference = diff;
                }
            }
            (Some(_), Some(_)) => report.label_mismatches += 1,
            _ => report.assignment_state_mismatches += 1,
        }
    }
    Ok(report)
}
