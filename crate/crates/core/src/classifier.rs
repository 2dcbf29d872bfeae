//! Parallel atlas segmentation with a progressive discard cascade.
//!
//! Each (fiber, centroid) pair is screened against the bundle threshold in
//! four stages of increasing cost:
//!
//! 1. center point only — index 10 pairs with itself under both
//!    orientations, so one distance above the threshold proves the full
//!    metric is above it too;
//! 2. the two endpoints, evaluated in both orientations — besides
//!    discarding, this fixes the orientation (direct or inverse) used by
//!    everything downstream, halving the remaining work;
//! 3. four intermediate points in the chosen orientation, stopping at the
//!    first distance above the threshold;
//! 4. all 21 pairwise distances with a running maximum and early exit,
//!    then the length penalty — computed only for pairs whose maximum
//!    already fits under the threshold.
//!
//! A fiber is assigned to the accepted (bundle, centroid) pair with the
//! smallest normalized distance; ties go to the lowest bundle index, then
//! the lowest centroid index. Subject fibers are classified independently
//! of one another, so the outer loop is parallel: workers own disjoint
//! slices of the result vector and per-worker stage tallies are merged
//! deterministically afterwards. Auxiliary memory stays proportional to
//! subject plus atlas size.

use std::num::NonZeroUsize;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    point_distance, Orientation, ResampledFiber, CENTER_INDEX, LAST_INDEX, RESAMPLE_POINTS,
};
use crate::io::{Assignment, Atlas, BundleMatch};

/// Default intermediate point indices for stage 3: spread evenly across the
/// fiber and symmetric under reversal, so the probed point set does not
/// depend on the inferred orientation.
pub const DEFAULT_TEST3_INDICES: [usize; 4] = [3, 7, 13, 17];

/// Number of worker threads for [`segment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerCount {
    /// One thread per available CPU.
    Auto,
    Fixed(NonZeroUsize),
}

impl WorkerCount {
    pub fn resolve(self) -> usize {
        match self {
            WorkerCount::Auto => std::thread::available_parallelism()
                .map(NonZeroUsize::get)
                .unwrap_or(1),
            WorkerCount::Fixed(n) => n.get(),
        }
    }
}

impl FromStr for WorkerCount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(WorkerCount::Auto);
        }
        let n: usize = s
            .parse()
            .map_err(|_| format!("thread count must be a positive integer or `auto`, got {s:?}"))?;
        NonZeroUsize::new(n)
            .map(WorkerCount::Fixed)
            .ok_or_else(|| "thread count must be at least 1".to_string())
    }
}

/// Cascade tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CascadeConfig {
    /// Stage-3 point indices. Must be strictly increasing, inside `1..=19`,
    /// avoid the stage-1/2 indices {0, 10, 20}, and be symmetric as a set
    /// under `i -> 20 - i`.
    pub test3_indices: [usize; 4],
    pub workers: WorkerCount,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            test3_indices: DEFAULT_TEST3_INDICES,
            workers: WorkerCount::Auto,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        let idx = &self.test3_indices;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for &i in idx {
            if i == 0 || i == CENTER_INDEX || i >= LAST_INDEX {
                return bad(format!(
                    "stage-3 index {i} collides with stage 1/2 points or lies outside 1..=19"
                ));
            }
        }
        if !idx.windows(2).all(|w| w[0] < w[1]) {
            return bad(format!("stage-3 indices {idx:?} must be strictly increasing"));
        }
        if !idx.iter().all(|&i| idx.contains(&(LAST_INDEX - i))) {
            return bad(format!(
                "stage-3 indices {idx:?} must be symmetric under i -> 20 - i"
            ));
        }
        Ok(())
    }
}

/// Per-stage outcome counters. Every (fiber, centroid) pair lands in
/// exactly one outcome bucket, so the six outcome counters sum to
/// `pairs_total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CascadeStats {
    pub pairs_total: u64,
    pub discarded_test1: u64,
    pub discarded_test2: u64,
    pub discarded_test3: u64,
    /// Stage 4 rejections where the max pointwise distance already exceeds
    /// the threshold.
    pub discarded_test4_dme: u64,
    /// Stage 4 rejections where only the added length penalty pushes the
    /// score over the threshold.
    pub discarded_test4_tn: u64,
    pub accepted: u64,
}

impl CascadeStats {
    pub fn merge(&mut self, other: &CascadeStats) {
        self.pairs_total += other.pairs_total;
        self.discarded_test1 += other.discarded_test1;
        self.discarded_test2 += other.discarded_test2;
        self.discarded_test3 += other.discarded_test3;
        self.discarded_test4_dme += other.discarded_test4_dme;
        self.discarded_test4_tn += other.discarded_test4_tn;
        self.accepted += other.accepted;
    }

    /// Sum of the six outcome buckets; equals `pairs_total` by construction.
    pub fn outcome_total(&self) -> u64 {
        self.discarded_test1
            + self.discarded_test2
            + self.discarded_test3
            + self.discarded_test4_dme
            + self.discarded_test4_tn
            + self.accepted
    }

    /// Fraction of pairs rejected before the full-metric stage.
    pub fn pruned_before_test4(&self) -> f64 {
        if self.pairs_total == 0 {
            return 0.0;
        }
        (self.discarded_test1 + self.discarded_test2 + self.discarded_test3) as f64
            / self.pairs_total as f64
    }
}

/// Stage 1: keep the pair only if the center points are within the
/// threshold. Index 10 pairs with itself under both orientations, so a
/// discard here is sound for the full metric.
#[inline]
pub fn test_center(a: &ResampledFiber, c: &ResampledFiber, threshold: f64) -> bool {
    point_distance(a.points()[CENTER_INDEX], c.points()[CENTER_INDEX]) <= threshold
}

/// Endpoint orientation rule: the orientation whose worse endpoint distance
/// is smaller, ties resolved to direct. Returns that orientation and its
/// endpoint maximum.
#[inline]
pub fn endpoint_orientation(a: &ResampledFiber, c: &ResampledFiber) -> (Orientation, f64) {
    let ap = a.points();
    let cp = c.points();
    let m_dir = point_distance(ap[0], cp[0]).max(point_distance(ap[LAST_INDEX], cp[LAST_INDEX]));
    let m_inv = point_distance(ap[0], cp[LAST_INDEX]).max(point_distance(ap[LAST_INDEX], cp[0]));
    if m_dir <= m_inv {
        (Orientation::Direct, m_dir)
    } else {
        (Orientation::Inverse, m_inv)
    }
}

/// Stage 2: discard when both orientations have an endpoint pair beyond the
/// threshold; otherwise keep and report the inferred orientation.
#[inline]
pub fn test_endpoints(
    a: &ResampledFiber,
    c: &ResampledFiber,
    threshold: f64,
) -> Option<Orientation> {
    let (orientation, m) = endpoint_orientation(a, c);
    (m <= threshold).then_some(orientation)
}

/// Stage 3: probe the configured intermediate points in the inferred
/// orientation, discarding at the first distance above the threshold.
#[inline]
pub fn test_four_points(
    a: &ResampledFiber,
    c: &ResampledFiber,
    orientation: Orientation,
    threshold: f64,
    indices: &[usize; 4],
) -> bool {
    let ap = a.points();
    let cp = c.points();
    indices
        .iter()
        .all(|&i| point_distance(ap[i], cp[orientation.paired_index(i)]) <= threshold)
}

pub(crate) enum FullOutcome {
    /// The running maximum crossed the threshold.
    DiscardMax,
    /// The maximum fit, but adding the length penalty did not.
    DiscardPenalty,
    Accept(f64),
}

pub(crate) fn test_full_outcome(
    a: &ResampledFiber,
    c: &ResampledFiber,
    orientation: Orientation,
    threshold: f64,
) -> FullOutcome {
    let ap = a.points();
    let cp = c.points();
    let mut max = 0.0f64;
    for i in 0..RESAMPLE_POINTS {
        let d = point_distance(ap[i], cp[orientation.paired_index(i)]);
        if d > max {
            max = d;
            if max > threshold {
                return FullOutcome::DiscardMax;
            }
        }
    }
    let score = max + crate::geometry::length_penalty_value(a.length(), c.length());
    if score > threshold {
        FullOutcome::DiscardPenalty
    } else {
        FullOutcome::Accept(score)
    }
}

/// Stage 4: evaluate all 21 pairwise distances in the inferred orientation
/// with a running maximum and early exit, then add the length penalty.
/// Returns the normalized distance when it fits under the threshold.
pub fn test_full(
    a: &ResampledFiber,
    c: &ResampledFiber,
    orientation: Orientation,
    threshold: f64,
) -> Option<f64> {
    match test_full_outcome(a, c, orientation, threshold) {
        FullOutcome::Accept(score) => Some(score),
        _ => None,
    }
}

/// Runs the cascade for one fiber against every centroid of every bundle
/// and returns the closest accepted bundle, if any, with per-stage tallies.
pub fn classify_fiber(
    fiber: &ResampledFiber,
    atlas: &Atlas,
    config: &CascadeConfig,
) -> (Option<BundleMatch>, CascadeStats) {
    let mut stats = CascadeStats::default();
    let mut best: Option<BundleMatch> = None;

    for (bundle_index, bundle) in atlas.bundles.iter().enumerate() {
        let threshold = bundle.threshold;
        for centroid in &bundle.centroids {
            stats.pairs_total += 1;
            if !test_center(fiber, centroid, threshold) {
                stats.discarded_test1 += 1;
                continue;
            }
            let Some(orientation) = test_endpoints(fiber, centroid, threshold) else {
                stats.discarded_test2 += 1;
                continue;
            };
            if !test_four_points(fiber, centroid, orientation, threshold, &config.test3_indices) {
                stats.discarded_test3 += 1;
                continue;
            }
            match test_full_outcome(fiber, centroid, orientation, threshold) {
                FullOutcome::DiscardMax => stats.discarded_test4_dme += 1,
                FullOutcome::DiscardPenalty => stats.discarded_test4_tn += 1,
                FullOutcome::Accept(score) => {
                    stats.accepted += 1;
                    // Strict `<` keeps the first of equal scores: lowest
                    // bundle index, then lowest centroid index.
                    if best.is_none_or(|b| score < b.distance) {
                        best = Some(BundleMatch {
                            bundle_index,
                            distance: score,
                        });
                    }
                }
            }
        }
    }
    (best, stats)
}

/// Fibers per parallel work unit. Fixed so that results and stats do not
/// depend on the worker count.
const CHUNK: usize = 512;

/// Classifies every fiber of the dataset against the atlas in parallel.
///
/// Assignments come back in input order and are identical for any worker
/// count. Auxiliary memory is O(fibers + centroids).
pub fn segment(
    fibers: &[ResampledFiber],
    atlas: &Atlas,
    config: &CascadeConfig,
) -> Result<(Vec<Assignment>, CascadeStats)> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.resolve())
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;

    let per_chunk: Vec<(Vec<Option<BundleMatch>>, CascadeStats)> = pool.install(|| {
        fibers
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut stats = CascadeStats::default();
                let matches = chunk
                    .iter()
                    .map(|fiber| {
                        let (m, s) = classify_fiber(fiber, atlas, config);
                        stats.merge(&s);
                        m
                    })
                    .collect();
                (matches, stats)
            })
            .collect()
    });

    let mut assignments = Vec::with_capacity(fibers.len());
    let mut stats = CascadeStats::default();
    for (matches, chunk_stats) in per_chunk {
        stats.merge(&chunk_stats);
        for matched in matches {
            assignments.push(Assignment {
                fiber_index: assignments.len(),
                matched,
            });
        }
    }
    Ok((assignments, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{max_euclidean_distance, max_pointwise_distance, Point3};
    use crate::io::AtlasBundle;
    use proptest::prelude::*;

    fn p(x: f32, y: f32, z: f32) -> Point3 {
        Point3::new(x, y, z)
    }

    fn from_xs(xs: impl IntoIterator<Item = f32>) -> ResampledFiber {
        let pts: Vec<Point3> = xs.into_iter().map(|x| p(x, 0.0, 0.0)).collect();
        ResampledFiber::from_points(pts.try_into().unwrap()).unwrap()
    }

    fn straight_21(origin: f32, step: f32) -> ResampledFiber {
        from_xs((0..21).map(|i| origin + i as f32 * step))
    }

    fn translated(f: &ResampledFiber, dx: f32, dy: f32, dz: f32) -> ResampledFiber {
        let points = f.points().map(|q| p(q.x + dx, q.y + dy, q.z + dz));
        ResampledFiber::from_points(points).unwrap()
    }

    fn one_bundle(threshold: f64, centroids: Vec<ResampledFiber>) -> Atlas {
        Atlas {
            bundles: vec![AtlasBundle {
                name: "b0".into(),
                threshold,
                centroids,
            }],
        }
    }

    #[test]
    fn center_test_cases() {
        let a = straight_21(0.0, 1.0);
        assert!(test_center(&a, &a, 5.0));
        // A translation beyond the threshold moves the center beyond it.
        let far = translated(&a, 6.0, 0.0, 0.0);
        assert!(!test_center(&a, &far, 5.0));
        // Center within the threshold but an endpoint far outside: stage 1
        // only sees the center.
        let mut pts = *a.points();
        pts[0].y += 50.0;
        let bent = ResampledFiber::from_points(pts).unwrap();
        assert!(test_center(&a, &bent, 5.0));
    }

    #[test]
    fn endpoint_test_cases() {
        let a = straight_21(0.0, 1.0);
        assert_eq!(test_endpoints(&a, &a, 5.0), Some(Orientation::Direct));
        assert_eq!(
            test_endpoints(&a, &a.reversed(), 5.0),
            Some(Orientation::Inverse)
        );
        let far = translated(&a, 0.0, 30.0, 0.0);
        assert_eq!(test_endpoints(&a, &far, 5.0), None);
    }

    #[test]
    fn endpoint_tie_resolves_to_direct() {
        // A palindromic centroid has coincident endpoints, so both
        // orientations produce identical endpoint maxima.
        let xs: Vec<f32> = (0..=10).chain((0..10).rev()).map(|i| i as f32).collect();
        let pts: Vec<Point3> = xs.iter().map(|&x| p(x, 0.0, 0.0)).collect();
        let palindrome = ResampledFiber::from_points(pts.try_into().unwrap()).unwrap();
        let probe = straight_21(0.5, 1.0);
        let (orientation, m) = endpoint_orientation(&probe, &palindrome);
        assert_eq!(orientation, Orientation::Direct);
        let ends_direct = point_distance(probe.points()[0], palindrome.points()[0])
            .max(point_distance(probe.points()[20], palindrome.points()[20]));
        assert_eq!(m, ends_direct);
    }

    #[test]
    fn four_point_test_cases() {
        let a = straight_21(0.0, 1.0);
        let idx = DEFAULT_TEST3_INDICES;
        assert!(test_four_points(&a, &a, Orientation::Direct, 5.0, &idx));
        assert!(test_four_points(
            &a,
            &a.reversed(),
            Orientation::Inverse,
            5.0,
            &idx
        ));
        // One probed point displaced beyond the threshold.
        let mut pts = *a.points();
        pts[7].y += 6.0;
        let c = ResampledFiber::from_points(pts).unwrap();
        assert!(!test_four_points(&a, &c, Orientation::Direct, 5.0, &idx));
    }

    #[test]
    fn full_test_cases() {
        let a = straight_21(0.0, 1.0);
        assert_eq!(test_full(&a, &a, Orientation::Direct, 5.0), Some(0.0));
        // Translation keeps lengths equal: zero penalty, score = offset.
        let c = translated(&a, 3.0, 0.0, 0.0);
        assert_eq!(test_full(&a, &c, Orientation::Direct, 5.0), Some(3.0));
        assert_eq!(test_full(&a, &c, Orientation::Direct, 2.0), None);
    }

    #[test]
    fn full_test_penalty_discard() {
        // Subject: x = 0..20. Centroid: same center, spacing 0.9, so the
        // max pointwise distance is ~1.0 (endpoints) and lengths are 20 vs
        // 18: penalty = (2/20 + 1)^2 - 1 = 0.21.
        let a = straight_21(0.0, 1.0);
        let c = straight_21(1.0, 0.9);
        let m = max_pointwise_distance(&a, &c, Orientation::Direct);
        assert!((m - 1.0).abs() < 1e-5);

        // threshold 1.05: the max fits, max + penalty = ~1.21 does not.
        match test_full_outcome(&a, &c, Orientation::Direct, 1.05) {
            FullOutcome::DiscardPenalty => {}
            FullOutcome::DiscardMax => panic!("max should fit under 1.05"),
            FullOutcome::Accept(s) => panic!("unexpected accept {s}"),
        }
        // threshold 1.3 accepts with the penalty included.
        let score = test_full(&a, &c, Orientation::Direct, 1.3).unwrap();
        assert!((score - 1.21).abs() < 1e-4, "score {score}");
    }

    #[test]
    fn config_validation() {
        let with_indices = |test3_indices: [usize; 4]| CascadeConfig {
            test3_indices,
            ..CascadeConfig::default()
        };
        assert!(CascadeConfig::default().validate().is_ok());
        assert!(with_indices([0, 7, 13, 17]).validate().is_err()); // touches stage-2 point
        assert!(with_indices([3, 10, 13, 17]).validate().is_err()); // touches center
        assert!(with_indices([7, 3, 13, 17]).validate().is_err()); // not increasing
        assert!(with_indices([3, 7, 13, 18]).validate().is_err()); // not symmetric
        assert!(with_indices([2, 7, 13, 18]).validate().is_ok()); // symmetric, valid
    }

    #[test]
    fn classify_picks_own_centroid() {
        let c0 = straight_21(0.0, 1.0);
        let c1 = straight_21(100.0, 1.0);
        let atlas = Atlas {
            bundles: vec![
                AtlasBundle {
                    name: "a".into(),
                    threshold: 8.0,
                    centroids: vec![c0.clone()],
                },
                AtlasBundle {
                    name: "b".into(),
                    threshold: 8.0,
                    centroids: vec![c1],
                },
            ],
        };
        let (m, stats) = classify_fiber(&c0, &atlas, &CascadeConfig::default());
        let m = m.unwrap();
        assert_eq!(m.bundle_index, 0);
        assert_eq!(m.distance, 0.0);
        assert_eq!(stats.pairs_total, 2);
        assert_eq!(stats.outcome_total(), 2);
    }

    #[test]
    fn classify_minimum_rule() {
        // Two accepting bundles with scores 4.0 and 2.5: the smaller wins
        // regardless of bundle order.
        let a = straight_21(0.0, 1.0);
        let atlas = Atlas {
            bundles: vec![
                AtlasBundle {
                    name: "far".into(),
                    threshold: 10.0,
                    centroids: vec![translated(&a, 0.0, 4.0, 0.0)],
                },
                AtlasBundle {
                    name: "near".into(),
                    threshold: 10.0,
                    centroids: vec![translated(&a, 0.0, 2.5, 0.0)],
                },
            ],
        };
        let (m, _) = classify_fiber(&a, &atlas, &CascadeConfig::default());
        let m = m.unwrap();
        assert_eq!(m.bundle_index, 1);
        assert_eq!(m.distance, 2.5);
    }

    #[test]
    fn classify_tie_breaks_to_lowest_indices() {
        let a = straight_21(0.0, 1.0);
        let same = translated(&a, 0.0, 1.0, 0.0);
        let atlas = Atlas {
            bundles: vec![
                AtlasBundle {
                    name: "first".into(),
                    threshold: 10.0,
                    centroids: vec![same.clone()],
                },
                AtlasBundle {
                    name: "second".into(),
                    threshold: 10.0,
                    centroids: vec![same],
                },
            ],
        };
        let (m, _) = classify_fiber(&a, &atlas, &CascadeConfig::default());
        assert_eq!(m.unwrap().bundle_index, 0);
    }

    #[test]
    fn classify_unassigned_when_everything_rejects() {
        let a = straight_21(0.0, 1.0);
        let atlas = one_bundle(3.0, vec![straight_21(500.0, 1.0)]);
        let (m, stats) = classify_fiber(&a, &atlas, &CascadeConfig::default());
        assert!(m.is_none());
        assert_eq!(stats.discarded_test1, 1);
    }

    #[test]
    fn segment_orders_and_counts() {
        let centroid = straight_21(0.0, 1.0);
        let atlas = one_bundle(5.0, vec![centroid.clone()]);
        let fibers = vec![
            translated(&centroid, 0.0, 1.0, 0.0),
            translated(&centroid, 0.0, 100.0, 0.0),
            centroid.clone(),
        ];
        let (assignments, stats) = segment(&fibers, &atlas, &CascadeConfig::default()).unwrap();
        assert_eq!(assignments.len(), 3);
        assert_eq!(assignments[0].fiber_index, 0);
        assert_eq!(assignments[0].matched.unwrap().distance, 1.0);
        assert!(assignments[1].matched.is_none());
        assert_eq!(assignments[2].matched.unwrap().distance, 0.0);
        assert_eq!(stats.pairs_total, 3);
        assert_eq!(stats.outcome_total(), stats.pairs_total);
    }

    #[test]
    fn segment_deterministic_across_worker_counts() {
        let base = straight_21(0.0, 1.0);
        let atlas = one_bundle(
            6.0,
            (0..7)
                .map(|i| translated(&base, i as f32 * 0.3, 0.5, 0.0))
                .collect(),
        );
        let fibers: Vec<ResampledFiber> = (0..700)
            .map(|i| {
                let f = translated(&base, (i % 13) as f32 * 0.25, (i % 7) as f32 * 0.5, 0.0);
                if i % 2 == 0 {
                    f.reversed()
                } else {
                    f
                }
            })
            .collect();

        let run = |workers: usize| {
            let cfg = CascadeConfig {
                workers: WorkerCount::Fixed(NonZeroUsize::new(workers).unwrap()),
                ..CascadeConfig::default()
            };
            segment(&fibers, &atlas, &cfg).unwrap()
        };
        let (a1, s1) = run(1);
        let (a8, s8) = run(8);
        assert_eq!(a1, a8);
        assert_eq!(s1, s8);
    }

    // --- stage soundness and cascade/oracle equivalence on random data ---

    prop_compose! {
        fn arb_fiber()(ox in -20f32..20.0, oy in -20f32..20.0, step in 0.4f32..2.0,
                       bend in 0.0f32..4.0, flip in proptest::bool::ANY)
                      -> ResampledFiber {
            let pts: Vec<Point3> = (0..21).map(|i| {
                let i = i as f32;
                p(ox + i * step, oy + (i * 0.5).sin() * bend, (i * 0.23).cos() * bend)
            }).collect();
            let f = ResampledFiber::from_points(pts.try_into().unwrap()).unwrap();
            if flip { f.reversed() } else { f }
        }
    }

    proptest! {
        #[test]
        fn prop_stage12_discards_are_sound(a in arb_fiber(), c in arb_fiber(),
                                           thr in 0.5f64..40.0) {
            let dme = max_euclidean_distance(&a, &c);
            if !test_center(&a, &c, thr) {
                prop_assert!(dme > thr);
            }
            if test_endpoints(&a, &c, thr).is_none() {
                prop_assert!(dme > thr);
            }
        }

        #[test]
        fn prop_stage34_discards_are_sound(a in arb_fiber(), c in arb_fiber(),
                                           thr in 0.5f64..40.0) {
            let (orientation, _) = endpoint_orientation(&a, &c);
            let single = max_pointwise_distance(&a, &c, orientation);
            let score = single
                + crate::geometry::length_penalty_value(a.length(), c.length());
            if !test_four_points(&a, &c, orientation, thr, &DEFAULT_TEST3_INDICES) {
                prop_assert!(single > thr);
            }
            match test_full_outcome(&a, &c, orientation, thr) {
                FullOutcome::DiscardMax => prop_assert!(single > thr),
                FullOutcome::DiscardPenalty => {
                    prop_assert!(single <= thr && score > thr);
                }
                FullOutcome::Accept(s) => {
                    prop_assert!(s <= thr);
                    prop_assert_eq!(s, score);
                }
            }
        }

        #[test]
        fn prop_threshold_monotonicity(a in arb_fiber(),
                                       cs in proptest::collection::vec(arb_fiber(), 1..5),
                                       thr in 1.0f64..20.0) {
            let atlas = one_bundle(thr, cs.clone());
            let wider = one_bundle(thr * 2.0, cs);
            let cfg = CascadeConfig::default();
            let (m, _) = classify_fiber(&a, &atlas, &cfg);
            let (m2, _) = classify_fiber(&a, &wider, &cfg);
            if m.is_some() {
                prop_assert!(m2.is_some());
            }
            if let Some(m) = m {
                prop_assert!(m.distance <= thr);
            }
        }
    }
}
