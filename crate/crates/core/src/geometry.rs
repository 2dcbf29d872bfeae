//! Polyline geometry and the fiber distance metrics.
//!
//! Fibers are ordered 3D polylines in millimeters. Before any distance is
//! computed, a fiber is resampled to [`RESAMPLE_POINTS`] equidistant points
//! along its arc length. Two resampled fibers are then compared with the
//! maximum Euclidean distance: the largest distance between corresponding
//! points, taken in whichever of the two point orderings (direct or
//! reversed) gives the smaller value, since fibers carry no intrinsic
//! direction. A length-mismatch penalty is added on top to form the
//! normalized distance used for classification.
//!
//! Coordinates are stored as `f32` (the on-disk representation); every
//! accumulation and comparison runs in `f64` so that results do not depend
//! on summation order or vector width.

use crate::error::{Error, Result};

/// Number of points every fiber is resampled to before comparison.
pub const RESAMPLE_POINTS: usize = 21;

/// Index of the middle point of a resampled fiber.
pub const CENTER_INDEX: usize = RESAMPLE_POINTS / 2;

/// Index of the last point of a resampled fiber.
pub const LAST_INDEX: usize = RESAMPLE_POINTS - 1;

/// One 3D point, millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Point3 {
    pub fn new(x: f32, y: f32, z: f32) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// An ordered polyline of at least two points with positive total length.
#[derive(Debug, Clone, PartialEq)]
pub struct Fiber {
    points: Vec<Point3>,
}

impl Fiber {
    /// Validates and wraps a point sequence.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidFiber(format!(
                "{} points, need at least 2",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidFiber(format!(
                "non-finite coordinate at point {i}"
            )));
        }
        if polyline_length(&points) <= 0.0 {
            return Err(Error::InvalidFiber(
                "zero length (all points coincide)".into(),
            ));
        }
        Ok(Fiber { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least two points by construction
    }

    /// Total chord length in millimeters.
    pub fn length(&self) -> f64 {
        polyline_length(&self.points)
    }
}

/// A fiber resampled to exactly [`RESAMPLE_POINTS`] equidistant points.
///
/// The chord length is computed once at construction; it is the length used
/// by the length-mismatch penalty, so that every consumer of a resampled
/// fiber sees the identical value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledFiber {
    points: [Point3; RESAMPLE_POINTS],
    length: f64,
}

impl ResampledFiber {
    /// Wraps a 21-point array that is already equidistantly sampled.
    ///
    /// Point spacing is trusted, not re-checked: re-interpolating data that
    /// already has 21 points would perturb coordinates that callers (atlas
    /// loaders, generators) rely on bit-for-bit.
    pub fn from_points(points: [Point3; RESAMPLE_POINTS]) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidFiber(format!(
                "non-finite coordinate at point {i}"
            )));
        }
        let length = polyline_length(&points);
        Ok(ResampledFiber { points, length })
    }

    pub fn points(&self) -> &[Point3; RESAMPLE_POINTS] {
        &self.points
    }

    /// Chord length of the resampled polyline, millimeters.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// The same fiber with its point order reversed.
    pub fn reversed(&self) -> Self {
        let mut points = self.points;
        points.reverse();
        let length = polyline_length(&points);
        ResampledFiber { points, length }
    }
}

/// Which point ordering is used when pairing two resampled fibers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Pair `a[i]` with `b[i]`.
    Direct,
    /// Pair `a[i]` with `b[N-1-i]`.
    Inverse,
}

impl Orientation {
    /// Index into the second fiber that pairs with index `i` of the first.
    #[inline]
    pub fn paired_index(self, i: usize) -> usize {
        match self {
            Orientation::Direct => i,
            Orientation::Inverse => LAST_INDEX - i,
        }
    }
}

/// Euclidean distance between two points, computed in `f64`.
#[inline]
pub fn point_distance(p: Point3, q: Point3) -> f64 {
    let dx = p.x as f64 - q.x as f64;
    let dy = p.y as f64 - q.y as f64;
    let dz = p.z as f64 - q.z as f64;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Sum of segment chord lengths of a polyline, millimeters.
///
/// Segments are accumulated symmetrically from both ends, so a reversed
/// polyline reports the identical value bit for bit; equal-up-to-reversal
/// fibers therefore carry a length penalty of exactly zero.
pub fn polyline_length(points: &[Point3]) -> f64 {
    let segments = points.len().saturating_sub(1);
    let seg = |i: usize| point_distance(points[i], points[i + 1]);
    let mut sum = 0.0f64;
    for i in 0..segments / 2 {
        sum += seg(i) + seg(segments - 1 - i);
    }
    if segments % 2 == 1 {
        sum += seg(segments / 2);
    }
    sum
}

/// Resamples a fiber to `n` points equidistant in arc length.
///
/// The first and last output points are the input endpoints, bit for bit.
/// Interior points are linearly interpolated along the cumulative
/// chord-length parameterization at arc positions `k*L/(n-1)`.
pub fn resample_to(fiber: &Fiber, n: usize) -> Result<Vec<Point3>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "resample target {n} is below the 2-point minimum"
        )));
    }
    let pts = fiber.points();
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0f64);
    for w in pts.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + point_distance(w[0], w[1]));
    }
    let total = *cum.last().unwrap();
    debug_assert!(total > 0.0, "Fiber guarantees positive length");

    let mut out = Vec::with_capacity(n);
    out.push(pts[0]);
    let mut seg = 0usize;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while seg + 2 < pts.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cum[seg + 1] - cum[seg];
        let t = if seg_len > 0.0 {
            ((target - cum[seg]) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(lerp(pts[seg], pts[seg + 1], t));
    }
    out.push(*pts.last().unwrap());
    Ok(out)
}

/// Resamples a fiber to the standard [`RESAMPLE_POINTS`] points.
pub fn resample(fiber: &Fiber) -> ResampledFiber {
    let pts = resample_to(fiber, RESAMPLE_POINTS).expect("RESAMPLE_POINTS >= 2");
    let points: [Point3; RESAMPLE_POINTS] = pts.try_into().expect("exact length");
    ResampledFiber::from_points(points).expect("finite by construction")
}

#[inline]
fn lerp(p: Point3, q: Point3, t: f64) -> Point3 {
    let s = 1.0 - t;
    Point3 {
        x: (p.x as f64 * s + q.x as f64 * t) as f32,
        y: (p.y as f64 * s + q.y as f64 * t) as f32,
        z: (p.z as f64 * s + q.z as f64 * t) as f32,
    }
}

/// Largest pointwise distance between two resampled fibers under one
/// orientation.
pub fn max_pointwise_distance(
    a: &ResampledFiber,
    b: &ResampledFiber,
    orientation: Orientation,
) -> f64 {
    let ap = a.points();
    let bp = b.points();
    let mut max = 0.0f64;
    for i in 0..RESAMPLE_POINTS {
        let d = point_distance(ap[i], bp[orientation.paired_index(i)]);
        if d > max {
            max = d;
        }
    }
    max
}

/// Maximum Euclidean distance between two fibers: the max pointwise
/// distance, minimized over the two possible point orderings.
pub fn max_euclidean_distance(a: &ResampledFiber, b: &ResampledFiber) -> f64 {
    let direct = max_pointwise_distance(a, b, Orientation::Direct);
    let inverse = max_pointwise_distance(a, b, Orientation::Inverse);
    direct.min(inverse)
}

/// Length-mismatch penalty between two fiber lengths:
/// `(|la - lb| / max(la, lb) + 1)^2 - 1`.
///
/// Zero for equal lengths, grows with the relative mismatch, and depends
/// only on the length ratio. Errors when both lengths are zero (the ratio
/// is undefined); loaders reject zero-length fibers so this never occurs in
/// the classification pipeline.
pub fn length_penalty(l_a: f64, l_b: f64) -> Result<f64> {
    if l_a.is_nan() || l_b.is_nan() || l_a < 0.0 || l_b < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lengths must be non-negative, got {l_a} and {l_b}"
        )));
    }
    if l_a.max(l_b) <= 0.0 {
        return Err(Error::InvalidArgument(
            "length penalty is undefined when both lengths are zero".into(),
        ));
    }
    Ok(length_penalty_value(l_a, l_b))
}

/// The penalty formula without precondition checks. Callers guarantee
/// `max(l_a, l_b) > 0`.
#[inline]
pub(crate) fn length_penalty_value(l_a: f64, l_b: f64) -> f64 {
    let r = (l_a - l_b).abs() / l_a.max(l_b) + 1.0;
    r * r - 1.0
}

/// Complete classification metric: maximum Euclidean distance plus the
/// length-mismatch penalty of the two chord lengths.
pub fn normalized_distance(a: &ResampledFiber, b: &ResampledFiber) -> Result<f64> {
    Ok(max_euclidean_distance(a, b) + length_penalty(a.length(), b.length())?)
}
