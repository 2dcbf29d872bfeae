//! Seeded synthetic atlas and subject generator with ground truth.
//!
//! Bundle prototypes are circular arcs with random plane, curvature, and
//! length, placed so that any two prototypes are at least `separation`
//! apart. Centroids are resampled copies of a prototype with small
//! control-point jitter; member fibers perturb a random centroid's 21
//! points with per-point Gaussian noise and flip orientation with
//! probability 1/2; distractors are arcs placed at least `separation` away
//! from every prototype. With `separation > 2 * threshold` (enforced),
//! members can only be accepted by their own bundle and distractors by
//! none.
//!
//! All randomness comes from ChaCha8 seeded with the caller's 64-bit seed,
//! so outputs are reproducible byte for byte.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{resample, Fiber, Point3, ResampledFiber, RESAMPLE_POINTS};
use crate::io::{write_atlas, write_fiber_file, Atlas, AtlasBundle};

/// Parameters of one synthetic workload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub bundle_count: usize,
    pub centroids_per_bundle: usize,
    pub fibers_per_bundle: usize,
    pub distractor_count: usize,
    /// Per-point Gaussian noise applied to subject fibers, millimeters.
    pub sigma: f64,
    /// Minimum distance between bundle prototypes (and from distractors to
    /// every prototype), millimeters. Must exceed twice the threshold.
    pub separation: f64,
    /// Acceptance threshold shared by every generated bundle, millimeters.
    pub threshold: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.bundle_count == 0 || self.centroids_per_bundle == 0 {
            return bad("need at least one bundle with one centroid".into());
        }
        if self.bundle_count * self.fibers_per_bundle + self.distractor_count == 0 {
            return bad("subject would be empty: no member fibers and no distractors".into());
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !self.threshold.is_finite() || self.threshold <= 0.0 {
            return bad(format!(
                "threshold must be finite and > 0, got {}",
                self.threshold
            ));
        }
        if !self.separation.is_finite() || self.separation <= 2.0 * self.threshold {
            return bad(format!(
                "separation {} must exceed twice the threshold {} to keep bundles separable",
                self.separation, self.threshold
            ));
        }
        Ok(())
    }
}

/// Which population a subject fiber was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundTruth {
    Bundle(usize),
    Distractor,
}

/// A generated workload: atlas, subject fibers, and the generating label of
/// every fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub atlas: Atlas,
    pub fibers: Vec<ResampledFiber>,
    pub truth: Vec<GroundTruth>,
}

// Arc lengths drawn from this range; any arc point lies within half the
// maximum length of the arc midpoint.
const ARC_LENGTH_RANGE: std::ops::Range<f64> = 40.0..100.0;
const ARC_REACH: f64 = 50.0;
const CONTROL_POINTS: usize = 41;
const PLACEMENT_ATTEMPTS_PER_SITE: usize = 4000;

type Vec3 = [f64; 3];

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Two orthonormal vectors spanning a random plane.
fn random_plane(rng: &mut ChaCha8Rng) -> (Vec3, Vec3) {
    let u = random_unit(rng);
    loop {
        let w = random_unit(rng);
        let dot = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
        let v = [w[0] - dot * u[0], w[1] - dot * u[1], w[2] - dot * u[2]];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 {
            return (u, [v[0] / n, v[1] / n, v[2] / n]);
        }
    }
}

fn dist3(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Rejection-samples `count` sites pairwise at least `cell` apart inside a
/// cube sized for the request. `keep_away` adds existing sites that the new
/// ones must also avoid.
fn place_sites(
    count: usize,
    cell: f64,
    keep_away: &[Vec3],
    rng: &mut ChaCha8Rng,
    attempts_per_site: usize,
) -> Result<Vec<Vec3>> {
    let total = count + keep_away.len();
    let side = (total as f64).cbrt().ceil() * cell * 1.5 + cell;
    let mut sites: Vec<Vec3> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..attempts_per_site {
            let candidate: Vec3 = [
                rng.random_range(0.0..side),
                rng.random_range(0.0..side),
                rng.random_range(0.0..side),
            ];
            let clear = keep_away
                .iter()
                .chain(sites.iter())
                .all(|s| dist3(*s, candidate) >= cell);
            if clear {
                sites.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Infeasible(format!(
                "could not place site {} of {count} with spacing {cell:.1} mm after {attempts_per_site} attempts",
                sites.len() + 1
            )));
        }
    }
    Ok(sites)
}

/// A smooth arc through `mid` with random plane and curvature, returned as
/// raw control points.
fn arc_control_points(mid: Vec3, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let length = rng.random_range(ARC_LENGTH_RANGE);
    let angle = rng.random_range(0.6..2.0);
    let radius = length / angle;
    let (u, v) = random_plane(rng);
    let center = [
        mid[0] - radius * u[0],
        mid[1] - radius * u[1],
        mid[2] - radius * u[2],
    ];
    (0..CONTROL_POINTS)
        .map(|k| {
            let theta = angle * (k as f64 / (CONTROL_POINTS - 1) as f64 - 0.5);
            let (s, c) = theta.sin_cos();
            Point3::new(
                (center[0] + radius * (c * u[0] + s * v[0])) as f32,
                (center[1] + radius * (c * u[1] + s * v[1])) as f32,
                (center[2] + radius * (c * u[2] + s * v[2])) as f32,
            )
        })
        .collect()
}

fn perturb_points(
    points: &[Point3; RESAMPLE_POINTS],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> [Point3; RESAMPLE_POINTS] {
    points.map(|p| {
        if sigma == 0.0 {
            p
        } else {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let dz: f64 = rng.sample(StandardNormal);
            Point3::new(
                (p.x as f64 + sigma * dx) as f32,
                (p.y as f64 + sigma * dy) as f32,
                (p.z as f64 + sigma * dz) as f32,
            )
        }
    })
}

fn subject_fiber(
    source: &ResampledFiber,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> ResampledFiber {
    let perturbed = perturb_points(source.points(), sigma, rng);
    let fiber = ResampledFiber::from_points(perturbed).expect("finite noise");
    if rng.random_bool(0.5) {
        fiber.reversed()
    } else {
        fiber
    }
}

/// Generates an atlas, subject dataset, and ground-truth labels.
/// Deterministic for a fixed spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cell = spec.separation + 2.0 * ARC_REACH;

    let proto_sites = place_sites(
        spec.bundle_count,
        cell,
        &[],
        &mut rng,
        PLACEMENT_ATTEMPTS_PER_SITE,
    )?;
    let centroid_jitter = spec.sigma * 0.5;

    let mut prototypes = Vec::with_capacity(spec.bundle_count);
    let mut bundles = Vec::with_capacity(spec.bundle_count);
    for (b, &site) in proto_sites.iter().enumerate() {
        let control = arc_control_points(site, &mut rng);
        let centroids: Vec<ResampledFiber> = (0..spec.centroids_per_bundle)
            .map(|_| {
                let jittered: Vec<Point3> = control
                    .iter()
                    .map(|p| {
                        if centroid_jitter == 0.0 {
                            *p
                        } else {
                            let dx: f64 = rng.sample(StandardNormal);
                            let dy: f64 = rng.sample(StandardNormal);
                            let dz: f64 = rng.sample(StandardNormal);
                            Point3::new(
                                (p.x as f64 + centroid_jitter * dx) as f32,
                                (p.y as f64 + centroid_jitter * dy) as f32,
                                (p.z as f64 + centroid_jitter * dz) as f32,
                            )
                        }
                    })
                    .collect();
                resample(&Fiber::new(jittered).expect("arcs are valid fibers"))
            })
            .collect();
        prototypes.push(control);
        bundles.push(AtlasBundle {
            name: format!("bundle_{b:03}"),
            threshold: spec.threshold,
            centroids,
        });
    }
    let atlas = Atlas { bundles };

    let mut labeled: Vec<(ResampledFiber, GroundTruth)> =
        Vec::with_capacity(spec.bundle_count * spec.fibers_per_bundle + spec.distractor_count);
    for (b, bundle) in atlas.bundles.iter().enumerate() {
        for _ in 0..spec.fibers_per_bundle {
            let centroid = &bundle.centroids[rng.random_range(0..bundle.centroids.len())];
            labeled.push((
                subject_fiber(centroid, spec.sigma, &mut rng),
                GroundTruth::Bundle(b),
            ));
        }
    }
    if spec.distractor_count > 0 {
        let distractor_sites = place_sites(
            spec.distractor_count,
            cell,
            &proto_sites,
            &mut rng,
            PLACEMENT_ATTEMPTS_PER_SITE,
        )?;
        for site in distractor_sites {
            let arc = resample(&Fiber::new(arc_control_points(site, &mut rng)).unwrap());
            labeled.push((
                subject_fiber(&arc, spec.sigma, &mut rng),
                GroundTruth::Distractor,
            ));
        }
    }
    labeled.shuffle(&mut rng);

    let (fibers, truth) = labeled.into_iter().unzip();
    Ok(SyntheticData {
        atlas,
        fibers,
        truth,
    })
}

/// Generates subject fibers for an existing atlas: perturbed copies of its
/// centroids plus far-away distractor arcs. Used by the benchmark harness.
pub fn generate_query_set(
    atlas: &Atlas,
    fiber_count: usize,
    distractor_fraction: f64,
    sigma: f64,
    seed: u64,
) -> Vec<ResampledFiber> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distractors = (fiber_count as f64 * distractor_fraction).round() as usize;
    let members = fiber_count - distractors.min(fiber_count);

    let all_centroids: Vec<&ResampledFiber> = atlas
        .bundles
        .iter()
        .flat_map(|b| b.centroids.iter())
        .collect();

    // Bounding box of the atlas; distractors park beyond its +x face, far
    // enough that no bundle threshold can reach them.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for c in &all_centroids {
        for p in c.points() {
            lo[0] = lo[0].min(p.x as f64);
            lo[1] = lo[1].min(p.y as f64);
            lo[2] = lo[2].min(p.z as f64);
            hi[0] = hi[0].max(p.x as f64);
            hi[1] = hi[1].max(p.y as f64);
            hi[2] = hi[2].max(p.z as f64);
        }
    }
    let gap = 2.0 * atlas.max_threshold() + 8.0 * sigma + 10.0;

    let mut fibers = Vec::with_capacity(fiber_count);
    for _ in 0..members {
        let centroid = all_centroids[rng.random_range(0..all_centroids.len())];
        fibers.push(subject_fiber(centroid, sigma, &mut rng));
    }
    for _ in 0..fiber_count - members {
        let mid = [
            hi[0] + gap + ARC_REACH + rng.random_range(0.0..4.0 * ARC_REACH),
            rng.random_range(lo[1]..=hi[1].max(lo[1] + 1.0)),
            rng.random_range(lo[2]..=hi[2].max(lo[2] + 1.0)),
        ];
        let arc = resample(&Fiber::new(arc_control_points(mid, &mut rng)).unwrap());
        fibers.push(subject_fiber(&arc, sigma, &mut rng));
    }
    fibers.shuffle(&mut rng);
    fibers
}

pub const GROUND_TRUTH_CSV_HEADER: &str = "fiber_index,true_bundle_index,true_bundle_name";

/// Writes a generated workload to disk: `atlas/` directory, `subject.fib`,
/// and `ground_truth.csv`.
pub fn write_synthetic(data: &SyntheticData, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atlas(&data.atlas, dir.join("atlas"))?;

    let fibers: Vec<Fiber> = data
        .fibers
        .iter()
        .map(|f| Fiber::new(f.points().to_vec()).expect("generated fibers are valid"))
        .collect();
    write_fiber_file(&fibers, dir.join("subject.fib"))?;

    let mut csv = String::from(GROUND_TRUTH_CSV_HEADER);
    csv.push('\n');
    for (i, t) in data.truth.iter().enumerate() {
        match t {
            GroundTruth::Bundle(b) => {
                csv.push_str(&format!("{i},{b},{}\n", data.atlas.bundles[*b].name))
            }
            GroundTruth::Distractor => csv.push_str(&format!("{i},-1,\n")),
        }
    }
    let path = dir.join("ground_truth.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))
}

/// Parses a `ground_truth.csv` produced by [`write_synthetic`].
pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruth>> {
    let path = path.as_ref();
    let err = |line: usize, message: String| Error::AssignmentParse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == GROUND_TRUTH_CSV_HEADER => {}
        other => return Err(err(1, format!("unexpected header {other:?}"))),
    }
    let mut out = Vec::new();
    for (idx, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(err(idx + 1, format!("expected 3 fields, got {}", fields.len())));
        }
        let bundle: i64 = fields[1]
            .parse()
            .map_err(|_| err(idx + 1, format!("bad bundle index {:?}", fields[1])))?;
        out.push(if bundle < 0 {
            GroundTruth::Distractor
        } else {
            GroundTruth::Bundle(bundle as usize)
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{segment, CascadeConfig};
    use crate::geometry::point_distance;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            bundle_count: 4,
            centroids_per_bundle: 3,
            fibers_per_bundle: 25,
            distractor_count: 20,
            sigma: 0.5,
            separation: 30.0,
            threshold: 8.0,
            seed: 42,
        }
    }

    #[test]
    fn spec_validation() {
        assert!(small_spec().validate().is_ok());
        let mut s = small_spec();
        s.separation = 16.0; // == 2 * threshold, not strictly greater
        assert!(s.validate().is_err());
        s = small_spec();
        s.bundle_count = 0;
        assert!(s.validate().is_err());
        s = small_spec();
        s.sigma = -1.0;
        assert!(s.validate().is_err());
        s = small_spec();
        s.fibers_per_bundle = 0;
        s.distractor_count = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_synthetic(&small_spec()).unwrap();
        let b = generate_synthetic(&small_spec()).unwrap();
        assert_eq!(a, b);

        let mut other = small_spec();
        other.seed = 43;
        let c = generate_synthetic(&other).unwrap();
        assert_ne!(a.fibers, c.fibers);
    }

    #[test]
    fn generated_shapes_and_counts() {
        let spec = small_spec();
        let data = generate_synthetic(&spec).unwrap();
        assert_eq!(data.atlas.bundles.len(), spec.bundle_count);
        assert_eq!(data.atlas.total_centroids(), 12);
        assert_eq!(data.fibers.len(), 4 * 25 + 20);
        assert_eq!(data.truth.len(), data.fibers.len());
        let distractors = data
            .truth
            .iter()
            .filter(|t| **t == GroundTruth::Distractor)
            .count();
        assert_eq!(distractors, spec.distractor_count);
    }

    #[test]
    fn prototypes_respect_separation() {
        let data = generate_synthetic(&small_spec()).unwrap();
        let bundles = &data.atlas.bundles;
        for i in 0..bundles.len() {
            for j in i + 1..bundles.len() {
                let mut min = f64::INFINITY;
                for a in &bundles[i].centroids {
                    for b in &bundles[j].centroids {
                        for pa in a.points() {
                            for pb in b.points() {
                                min = min.min(point_distance(*pa, *pb));
                            }
                        }
                    }
                }
                // Centroid jitter can nibble at the margin, never cross it.
                assert!(
                    min >= small_spec().separation - 4.0 * small_spec().sigma,
                    "bundles {i},{j} are {min} mm apart"
                );
            }
        }
    }

    #[test]
    fn zero_noise_members_equal_centroids_and_recover_truth() {
        let mut spec = small_spec();
        spec.sigma = 0.0;
        spec.distractor_count = 5;
        let data = generate_synthetic(&spec).unwrap();

        for (fiber, truth) in data.fibers.iter().zip(&data.truth) {
            let GroundTruth::Bundle(b) = truth else {
                continue;
            };
            let bundle = &data.atlas.bundles[*b];
            let hit = bundle.centroids.iter().any(|c| {
                c.points() == fiber.points() || c.reversed().points() == fiber.points()
            });
            assert!(hit, "member not equal to any centroid of its bundle");
        }

        let (assignments, stats) =
            segment(&data.fibers, &data.atlas, &CascadeConfig::default()).unwrap();
        for (a, t) in assignments.iter().zip(&data.truth) {
            match t {
                GroundTruth::Bundle(b) => {
                    let m = a.matched.expect("member must be assigned");
                    assert_eq!(m.bundle_index, *b);
                    assert_eq!(m.distance, 0.0);
                }
                GroundTruth::Distractor => assert!(a.matched.is_none()),
            }
        }
        assert_eq!(stats.outcome_total(), stats.pairs_total);
    }

    #[test]
    fn distractors_only_dataset_goes_unassigned() {
        let mut spec = small_spec();
        spec.fibers_per_bundle = 0;
        spec.distractor_count = 30;
        let data = generate_synthetic(&spec).unwrap();
        let (assignments, stats) =
            segment(&data.fibers, &data.atlas, &CascadeConfig::default()).unwrap();
        assert!(assignments.iter().all(|a| a.matched.is_none()));
        assert_eq!(stats.accepted, 0);
    }

    #[test]
    fn placement_errors_when_attempts_exhausted() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let result = place_sites(64, 50.0, &[], &mut rng, 1);
        assert!(matches!(result, Err(Error::Infeasible(_))));
    }

    #[test]
    fn query_set_members_and_distractors() {
        let data = generate_synthetic(&small_spec()).unwrap();
        let atlas = data.atlas;
        let fibers = generate_query_set(&atlas, 200, 0.25, 0.5, 9);
        assert_eq!(fibers.len(), 200);
        assert_eq!(generate_query_set(&atlas, 200, 0.25, 0.5, 9), fibers);

        let (assignments, _) = segment(&fibers, &atlas, &CascadeConfig::default()).unwrap();
        let assigned = assignments.iter().filter(|a| a.matched.is_some()).count();
        // 150 members, 50 distractors.
        assert_eq!(assigned, 150);
    }

    #[test]
    fn synthetic_roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate_synthetic(&small_spec()).unwrap();
        write_synthetic(&data, dir.path()).unwrap();

        let atlas = crate::io::load_atlas(dir.path().join("atlas")).unwrap();
        assert_eq!(atlas, data.atlas);
        let subject = crate::io::read_fiber_file(dir.path().join("subject.fib")).unwrap();
        assert_eq!(subject.len(), data.fibers.len());
        let resampled = subject.resampled();
        assert_eq!(resampled, data.fibers);
        let truth = read_ground_truth(dir.path().join("ground_truth.csv")).unwrap();
        assert_eq!(truth, data.truth);
    }
}
