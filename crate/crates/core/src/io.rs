//! Fiber file format, atlas manifest, and result serialization.
//!
//! # Fiber files (`.fib`)
//!
//! Little-endian binary layout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic bytes "FIBR"
//! 4       4     format version, u32 = 1
//! 8       4     fiber count, u32 > 0
//! 12      ...   per fiber:
//!                 point count, u32 >= 2
//!                 point count * 3 IEEE-754 f32 (x, y, z), millimeters
//! ```
//!
//! Round-trips are bit-exact: coordinates are stored and returned as the
//! same `f32` values. Non-finite coordinates, zero-length fibers, and
//! fibers with fewer than two points are rejected at parse time.
//!
//! # Atlas directories
//!
//! An atlas is a directory with a UTF-8 manifest `bundles.txt`: one line
//! per bundle, `<name> <threshold_mm> <relative_centroid_file>`, whitespace
//! separated, `#` starts a comment. Every referenced file must parse and
//! every centroid must hold exactly 21 points.
//!
//! # Assignment CSV
//!
//! Header `fiber_index,bundle_index,bundle_name,distance`; one row per
//! fiber in index order; distances carry 6 significant digits; unassigned
//! rows are `<i>,-1,,`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{AtlasErrorKind, Error, ParseErrorKind, Result};
use crate::geometry::{resample, Fiber, Point3, ResampledFiber, RESAMPLE_POINTS};

pub const FIBER_FILE_MAGIC: [u8; 4] = *b"FIBR";
pub const FIBER_FILE_VERSION: u32 = 1;
pub const ATLAS_MANIFEST: &str = "bundles.txt";
pub const ASSIGNMENT_CSV_HEADER: &str = "fiber_index,bundle_index,bundle_name,distance";

/// A loaded subject dataset: every fiber valid, file order preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberDataset {
    pub fibers: Vec<Fiber>,
    pub source: PathBuf,
}

impl FiberDataset {
    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }

    /// Fibers brought to the standard 21-point sampling. Fibers that
    /// already hold exactly 21 points pass through bit-for-bit; everything
    /// else is resampled.
    pub fn resampled(&self) -> Vec<ResampledFiber> {
        self.fibers
            .iter()
            .map(|f| {
                if f.len() == RESAMPLE_POINTS {
                    let points: [Point3; RESAMPLE_POINTS] =
                        f.points().try_into().expect("length checked");
                    ResampledFiber::from_points(points).expect("validated at parse")
                } else {
                    resample(f)
                }
            })
            .collect()
    }
}

/// One atlas bundle: a name, an acceptance threshold in millimeters, and
/// its centroid fibers.
#[derive(Debug, Clone, PartialEq)]
pub struct AtlasBundle {
    pub name: String,
    pub threshold: f64,
    pub centroids: Vec<ResampledFiber>,
}

/// An ordered set of bundles with unique names.
#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    pub bundles: Vec<AtlasBundle>,
}

impl Atlas {
    pub fn total_centroids(&self) -> usize {
        self.bundles.iter().map(|b| b.centroids.len()).sum()
    }

    pub fn max_threshold(&self) -> f64 {
        self.bundles.iter().fold(0.0, |m, b| m.max(b.threshold))
    }

    pub fn min_threshold(&self) -> f64 {
        self.bundles
            .iter()
            .fold(f64::INFINITY, |m, b| m.min(b.threshold))
    }
}

/// The bundle a fiber was assigned to, with its normalized distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleMatch {
    pub bundle_index: usize,
    pub distance: f64,
}

/// Classification result for one subject fiber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub fiber_index: usize,
    /// `None` when every bundle rejected the fiber.
    pub matched: Option<BundleMatch>,
}

// --- fiber file reading -----------------------------------------------------

struct FibReader<'p> {
    inner: BufReader<File>,
    path: &'p Path,
    offset: u64,
    file_len: u64,
}

impl<'p> FibReader<'p> {
    fn open(path: &'p Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        Ok(FibReader {
            inner: BufReader::new(file),
            path,
            offset: 0,
            file_len,
        })
    }

    fn parse_error(&self, offset: u64, kind: ParseErrorKind) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset,
            kind,
        }
    }

    /// Reads exactly `buf.len()` bytes; reports `Truncated` at the offset
    /// where the field started.
    fn read_exact(&mut self, buf: &mut [u8]) -> Result<u64> {
        let start = self.offset;
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                self.parse_error(start, ParseErrorKind::Truncated)
            } else {
                Error::io(self.path, e)
            }
        })?;
        self.offset += buf.len() as u64;
        Ok(start)
    }

    fn read_u32(&mut self) -> Result<(u32, u64)> {
        let mut buf = [0u8; 4];
        let start = self.read_exact(&mut buf)?;
        Ok((u32::from_le_bytes(buf), start))
    }
}

/// Reads a fiber file, validating every fiber.
pub fn read_fiber_file(path: impl AsRef<Path>) -> Result<FiberDataset> {
    let path = path.as_ref();
    let mut r = FibReader::open(path)?;

    let mut magic = [0u8; 4];
    let start = r.read_exact(&mut magic)?;
    if magic != FIBER_FILE_MAGIC {
        return Err(r.parse_error(start, ParseErrorKind::BadMagic));
    }
    let (version, start) = r.read_u32()?;
    if version != FIBER_FILE_VERSION {
        return Err(r.parse_error(start, ParseErrorKind::UnsupportedVersion(version)));
    }
    let (count, start) = r.read_u32()?;
    if count == 0 {
        return Err(r.parse_error(start, ParseErrorKind::EmptyDataset));
    }

    let mut fibers = Vec::with_capacity(count as usize);
    let mut coord_buf: Vec<u8> = Vec::new();
    for _ in 0..count {
        let (n_points, count_offset) = r.read_u32()?;
        if n_points < 2 {
            return Err(r.parse_error(count_offset, ParseErrorKind::PointCountTooSmall(n_points)));
        }
        let payload = n_points as u64 * 12;
        if r.offset + payload > r.file_len {
            return Err(r.parse_error(r.offset, ParseErrorKind::Truncated));
        }
        coord_buf.resize(payload as usize, 0);
        let block_offset = r.read_exact(&mut coord_buf)?;

        let mut points = Vec::with_capacity(n_points as usize);
        for (i, chunk) in coord_buf.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(r.parse_error(
                    block_offset + i as u64 * 4,
                    ParseErrorKind::NonFiniteCoordinate,
                ));
            }
            match i % 3 {
                0 => points.push(Point3::new(v, 0.0, 0.0)),
                1 => points.last_mut().unwrap().y = v,
                _ => points.last_mut().unwrap().z = v,
            }
        }
        let first = points[0];
        if points.iter().all(|p| *p == first) {
            return Err(r.parse_error(count_offset, ParseErrorKind::ZeroLengthFiber));
        }
        fibers.push(Fiber::new(points).expect("validated above"));
    }

    Ok(FiberDataset {
        fibers,
        source: path.to_path_buf(),
    })
}

// --- fiber file writing -----------------------------------------------------

fn write_fibers_to<'a, I>(path: &Path, fibers: I) -> Result<()>
where
    I: ExactSizeIterator<Item = &'a Fiber>,
{
    if fibers.len() == 0 {
        return Err(Error::InvalidArgument(
            "refusing to write an empty fiber file".into(),
        ));
    }
    if fibers.len() > u32::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "{} fibers exceed the u32 count field",
            fibers.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    w.write_all(&FIBER_FILE_MAGIC).map_err(io)?;
    w.write_all(&FIBER_FILE_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(fibers.len() as u32).to_le_bytes()).map_err(io)?;
    for fiber in fibers {
        w.write_all(&(fiber.len() as u32).to_le_bytes()).map_err(io)?;
        for p in fiber.points() {
            w.write_all(&p.x.to_le_bytes()).map_err(io)?;
            w.write_all(&p.y.to_le_bytes()).map_err(io)?;
            w.write_all(&p.z.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Writes fibers to a fiber file. Rejects empty input.
pub fn write_fiber_file(fibers: &[Fiber], path: impl AsRef<Path>) -> Result<()> {
    write_fibers_to(path.as_ref(), fibers.iter())
}

// --- atlas ------------------------------------------------------------------

/// Loads an atlas directory: manifest plus all referenced centroid files.
/// Bundles keep manifest order; bundle indices refer to that order.
pub fn load_atlas(dir: impl AsRef<Path>) -> Result<Atlas> {
    let dir = dir.as_ref();
    let atlas_err = |kind| Error::Atlas {
        dir: dir.to_path_buf(),
        kind,
    };

    let manifest = dir.join(ATLAS_MANIFEST);
    let text = match std::fs::read_to_string(&manifest) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(atlas_err(AtlasErrorKind::MissingManifest))
        }
        Err(e) => return Err(Error::io(&manifest, e)),
    };

    let mut bundles = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(atlas_err(AtlasErrorKind::ManifestLine {
                line,
                message: format!(
                    "expected `<name> <threshold_mm> <centroid_file>`, got {} fields",
                    fields.len()
                ),
            }));
        }
        let name = fields[0].to_string();
        if name.contains(',') || name.contains('"') {
            return Err(atlas_err(AtlasErrorKind::ManifestLine {
                line,
                message: format!("bundle name {name:?} must not contain `,` or `\"`"),
            }));
        }
        if !seen.insert(name.clone()) {
            return Err(atlas_err(AtlasErrorKind::DuplicateBundleName { line, name }));
        }
        let threshold: f64 = fields[1].parse().map_err(|_| {
            atlas_err(AtlasErrorKind::ManifestLine {
                line,
                message: format!("threshold {:?} is not a number", fields[1]),
            })
        })?;
        if !threshold.is_finite() || threshold <= 0.0 {
            return Err(atlas_err(AtlasErrorKind::InvalidThreshold {
                line,
                name,
                value: threshold,
            }));
        }

        let dataset = read_fiber_file(dir.join(fields[2]))?;
        let mut centroids = Vec::with_capacity(dataset.len());
        for (i, f) in dataset.fibers.iter().enumerate() {
            if f.len() != RESAMPLE_POINTS {
                return Err(atlas_err(AtlasErrorKind::WrongCentroidPointCount {
                    bundle: name,
                    fiber_index: i,
                    points: f.len(),
                }));
            }
            let points: [Point3; RESAMPLE_POINTS] = f.points().try_into().expect("len checked");
            centroids.push(ResampledFiber::from_points(points).expect("validated at parse"));
        }
        bundles.push(AtlasBundle {
            name,
            threshold,
            centroids,
        });
    }

    if bundles.is_empty() {
        return Err(atlas_err(AtlasErrorKind::EmptyManifest));
    }
    Ok(Atlas { bundles })
}

/// Writes an atlas directory: `bundles.txt` plus one centroid file per
/// bundle, named by bundle position. Inverse of [`load_atlas`].
pub fn write_atlas(atlas: &Atlas, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for (i, bundle) in atlas.bundles.iter().enumerate() {
        let file = format!("bundle_{i:03}.fib");
        let fibers: Vec<Fiber> = bundle
            .centroids
            .iter()
            .map(|c| Fiber::new(c.points().to_vec()).expect("centroids are valid fibers"))
            .collect();
        write_fiber_file(&fibers, dir.join(&file))?;
        manifest.push_str(&format!("{} {} {}\n", bundle.name, bundle.threshold, file));
    }
    let path = dir.join(ATLAS_MANIFEST);
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

// --- assignments ------------------------------------------------------------

/// Renders a value with 6 significant digits in plain decimal notation,
/// stable under print/parse/print round trips.
pub(crate) fn format_sig6(x: f64) -> String {
    fn decimals(x: f64) -> usize {
        if x == 0.0 {
            return 5;
        }
        let exp = x.abs().log10().floor() as i32;
        (5 - exp).max(0) as usize
    }
    let d1 = decimals(x);
    let s1 = format!("{:.*}", d1, x);
    // Rounding may bump the magnitude (e.g. 99999.95 -> "100000.0");
    // reformat from the committed value so the rendering is canonical.
    let y: f64 = s1.parse().expect("rendered a float");
    let d2 = decimals(y);
    if d2 == d1 {
        s1
    } else {
        format!("{:.*}", d2, y)
    }
}

/// Writes the assignment CSV. One row per fiber, file order = index order.
pub fn write_assignments(
    assignments: &[Assignment],
    atlas: &Atlas,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    writeln!(w, "{ASSIGNMENT_CSV_HEADER}").map_err(io)?;
    for a in assignments {
        match a.matched {
            Some(m) => {
                let name = atlas
                    .bundles
                    .get(m.bundle_index)
                    .map(|b| b.name.as_str())
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "assignment references bundle {} outside the atlas",
                            m.bundle_index
                        ))
                    })?;
                writeln!(
                    w,
                    "{},{},{},{}",
                    a.fiber_index,
                    m.bundle_index,
                    name,
                    format_sig6(m.distance)
                )
                .map_err(io)?;
            }
            None => writeln!(w, "{},-1,,", a.fiber_index).map_err(io)?,
        }
    }
    w.flush().map_err(io)
}

/// Parses an assignment CSV produced by [`write_assignments`].
pub fn read_assignments(path: impl AsRef<Path>) -> Result<Vec<Assignment>> {
    let path = path.as_ref();
    let err = |line: usize, message: String| Error::AssignmentParse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    match lines.next() {
        Some((_, h)) if h == ASSIGNMENT_CSV_HEADER => {}
        Some((_, h)) => return Err(err(1, format!("unexpected header {h:?}"))),
        None => return Err(err(1, "empty file".into())),
    }

    let mut out = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(err(line, format!("expected 4 fields, got {}", fields.len())));
        }
        let fiber_index: usize = fields[0]
            .parse()
            .map_err(|_| err(line, format!("bad fiber index {:?}", fields[0])))?;
        if fiber_index != out.len() {
            return Err(err(
                line,
                format!("fiber index {} out of order, expected {}", fiber_index, out.len()),
            ));
        }
        let bundle: i64 = fields[1]
            .parse()
            .map_err(|_| err(line, format!("bad bundle index {:?}", fields[1])))?;
        let matched = if bundle < 0 {
            if bundle != -1 {
                return Err(err(line, format!("bad bundle index {bundle}")));
            }
            None
        } else {
            let distance: f64 = fields[3]
                .parse()
                .map_err(|_| err(line, format!("bad distance {:?}", fields[3])))?;
            Some(BundleMatch {
                bundle_index: bundle as usize,
                distance,
            })
        };
        out.push(Assignment {
            fiber_index,
            matched,
        });
    }
    Ok(out)
}

// --- segmented bundle output --------------------------------------------------

fn safe_file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes one fiber file per bundle holding exactly the fibers assigned to
/// it (ascending fiber index), plus `summary.txt` with per-bundle counts.
/// Bundles with no fibers produce no file.
pub fn write_segmented_bundles(
    dataset: &FiberDataset,
    assignments: &[Assignment],
    atlas: &Atlas,
    out_dir: impl AsRef<Path>,
) -> Result<()> {
    let out_dir = out_dir.as_ref();
    if assignments.len() != dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "{} assignments for {} fibers",
            assignments.len(),
            dataset.len()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); atlas.bundles.len()];
    let mut unassigned = 0usize;
    for a in assignments {
        match a.matched {
            Some(m) => {
                if m.bundle_index >= atlas.bundles.len() {
                    return Err(Error::InvalidArgument(format!(
                        "assignment references bundle {} outside the atlas",
                        m.bundle_index
                    )));
                }
                members[m.bundle_index].push(a.fiber_index);
            }
            None => unassigned += 1,
        }
    }

    let mut taken = HashSet::new();
    let mut summary = String::new();
    for (i, bundle) in atlas.bundles.iter().enumerate() {
        let indices = &members[i];
        if !indices.is_empty() {
            let mut stem = safe_file_stem(&bundle.name);
            if !taken.insert(stem.clone()) {
                stem = format!("{stem}_{i}");
                taken.insert(stem.clone());
            }
            let path = out_dir.join(format!("{stem}.fib"));
            write_fibers_to(&path, indices.iter().map(|&k| &dataset.fibers[k]))?;
        }
        summary.push_str(&format!("{} {}\n", bundle.name, indices.len()));
    }
    summary.push('\n');
    summary.push_str(&format!("unassigned {unassigned}\n"));
    summary.push_str(&format!("total {}\n", dataset.len()));

    let path = out_dir.join("summary.txt");
    std::fs::write(&path, summary).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f32, y: f32, z: f32) -> Point3 {
        Point3::new(x, y, z)
    }

    fn two_point_fiber() -> Fiber {
        Fiber::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)]).unwrap()
    }

    fn straight_21(origin: f32) -> ResampledFiber {
        let points: Vec<Point3> = (0..21).map(|i| p(origin + i as f32, 0.0, 0.0)).collect();
        ResampledFiber::from_points(points.try_into().unwrap()).unwrap()
    }

    fn tiny_atlas() -> Atlas {
        Atlas {
            bundles: vec![
                AtlasBundle {
                    name: "alpha".into(),
                    threshold: 10.0,
                    centroids: vec![straight_21(0.0)],
                },
                AtlasBundle {
                    name: "beta".into(),
                    threshold: 12.5,
                    centroids: vec![straight_21(100.0), straight_21(140.0)],
                },
            ],
        }
    }

    #[test]
    fn single_fiber_roundtrip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.fib");
        write_fiber_file(&[two_point_fiber()], &path).unwrap();
        // 12 header bytes + 4-byte point count + 2 points * 12 bytes.
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 40);

        let ds = read_fiber_file(&path).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.fibers[0].length(), 1.0);
    }

    #[test]
    fn rejects_empty_write() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_fiber_file(&[], dir.path().join("empty.fib")),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn parse_kind(res: Result<FiberDataset>) -> (u64, ParseErrorKind) {
        match res {
            Err(Error::Parse { offset, kind, .. }) => (offset, kind),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    fn write_bytes(dir: &tempfile::TempDir, bytes: &[u8]) -> PathBuf {
        let path = dir.path().join("data.fib");
        std::fs::write(&path, bytes).unwrap();
        path
    }

    fn valid_bytes() -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(b"FIBR");
        v.extend_from_slice(&1u32.to_le_bytes());
        v.extend_from_slice(&1u32.to_le_bytes());
        v.extend_from_slice(&2u32.to_le_bytes());
        for c in [0.0f32, 0.0, 0.0, 1.0, 0.0, 0.0] {
            v.extend_from_slice(&c.to_le_bytes());
        }
        v
    }

    #[test]
    fn malformed_files_are_rejected_with_offsets() {
        let dir = tempfile::tempdir().unwrap();

        let mut bad_magic = valid_bytes();
        bad_magic[0..4].copy_from_slice(b"FIBX");
        let (off, kind) = parse_kind(read_fiber_file(write_bytes(&dir, &bad_magic)));
        assert_eq!((off, kind), (0, ParseErrorKind::BadMagic));

        let mut bad_version = valid_bytes();
        bad_version[4..8].copy_from_slice(&9u32.to_le_bytes());
        let (off, kind) = parse_kind(read_fiber_file(write_bytes(&dir, &bad_version)));
        assert_eq!((off, kind), (4, ParseErrorKind::UnsupportedVersion(9)));

        let mut zero_fibers = valid_bytes();
        zero_fibers[8..12].copy_from_slice(&0u32.to_le_bytes());
        let (off, kind) = parse_kind(read_fiber_file(write_bytes(&dir, &zero_fibers)));
        assert_eq!((off, kind), (8, ParseErrorKind::EmptyDataset));

        let mut one_point = valid_bytes();
        one_point[12..16].copy_from_slice(&1u32.to_le_bytes());
        let (off, kind) = parse_kind(read_fiber_file(write_bytes(&dir, &one_point)));
        assert_eq!((off, kind), (12, ParseErrorKind::PointCountTooSmall(1)));

        let truncated = &valid_bytes()[..30];
        let (off, kind) = parse_kind(read_fiber_file(write_bytes(&dir, truncated)));
        assert_eq!((off, kind), (16, ParseErrorKind::Truncated));

        let short_header = &valid_bytes()[..6];
        let (off, kind) = parse_kind(read_fiber_file(write_bytes(&dir, short_header)));
        assert_eq!((off, kind), (4, ParseErrorKind::Truncated));

        let mut nan = valid_bytes();
        nan[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        let (off, kind) = parse_kind(read_fiber_file(write_bytes(&dir, &nan)));
        assert_eq!((off, kind), (20, ParseErrorKind::NonFiniteCoordinate));

        let mut coincident = valid_bytes();
        for i in 0..6 {
            let o = 16 + i * 4;
            coincident[o..o + 4].copy_from_slice(&2.5f32.to_le_bytes());
        }
        let (off, kind) = parse_kind(read_fiber_file(write_bytes(&dir, &coincident)));
        assert_eq!((off, kind), (12, ParseErrorKind::ZeroLengthFiber));
    }

    proptest! {
        #[test]
        fn prop_fiber_file_roundtrip_bit_exact(
            fibers in proptest::collection::vec(
                (2usize..10, -1000f32..1000.0, 0.01f32..8.0).prop_map(|(n, base, step)| {
                    let pts: Vec<Point3> = (0..n).map(|i| {
                        p(base + i as f32 * step, base * 0.5 + (i as f32).sin(), i as f32 * 0.25)
                    }).collect();
                    Fiber::new(pts).unwrap()
                }),
                1..8,
            )
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.fib");
            write_fiber_file(&fibers, &path).unwrap();
            let back = read_fiber_file(&path).unwrap();
            prop_assert_eq!(&back.fibers, &fibers);

            let path2 = dir.path().join("rt2.fib");
            write_fiber_file(&back.fibers, &path2).unwrap();
            prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        }
    }

    #[test]
    fn atlas_roundtrip_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let atlas = tiny_atlas();
        write_atlas(&atlas, dir.path()).unwrap();
        let back = load_atlas(dir.path()).unwrap();
        assert_eq!(back, atlas);
        assert_eq!(back.bundles[0].name, "alpha");
        assert_eq!(back.bundles[1].threshold, 12.5);
        assert_eq!(back.total_centroids(), 3);
    }

    fn atlas_kind(res: Result<Atlas>) -> AtlasErrorKind {
        match res {
            Err(Error::Atlas { kind, .. }) => kind,
            other => panic!("expected atlas error, got {other:?}"),
        }
    }

    #[test]
    fn atlas_error_cases() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(atlas_kind(load_atlas(dir.path())), AtlasErrorKind::MissingManifest);

        std::fs::write(dir.path().join(ATLAS_MANIFEST), "# only a comment\n").unwrap();
        assert_eq!(atlas_kind(load_atlas(dir.path())), AtlasErrorKind::EmptyManifest);

        // Valid centroid file for the happy parts of the manifest.
        let c = straight_21(0.0);
        let fiber = Fiber::new(c.points().to_vec()).unwrap();
        write_fiber_file(std::slice::from_ref(&fiber), dir.path().join("c.fib")).unwrap();

        std::fs::write(dir.path().join(ATLAS_MANIFEST), "a 10.0 c.fib\na 9.0 c.fib\n").unwrap();
        assert!(matches!(
            atlas_kind(load_atlas(dir.path())),
            AtlasErrorKind::DuplicateBundleName { line: 2, .. }
        ));

        std::fs::write(dir.path().join(ATLAS_MANIFEST), "a -3.0 c.fib\n").unwrap();
        assert!(matches!(
            atlas_kind(load_atlas(dir.path())),
            AtlasErrorKind::InvalidThreshold { line: 1, .. }
        ));

        std::fs::write(dir.path().join(ATLAS_MANIFEST), "a 10.0\n").unwrap();
        assert!(matches!(
            atlas_kind(load_atlas(dir.path())),
            AtlasErrorKind::ManifestLine { line: 1, .. }
        ));

        // A 20-point centroid is rejected, naming the bundle.
        let short = Fiber::new((0..20).map(|i| p(i as f32, 0.0, 0.0)).collect()).unwrap();
        write_fiber_file(&[short], dir.path().join("short.fib")).unwrap();
        std::fs::write(dir.path().join(ATLAS_MANIFEST), "bad 10.0 short.fib\n").unwrap();
        match atlas_kind(load_atlas(dir.path())) {
            AtlasErrorKind::WrongCentroidPointCount { bundle, points, .. } => {
                assert_eq!(bundle, "bad");
                assert_eq!(points, 20);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_comments_and_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let c = straight_21(0.0);
        let fiber = Fiber::new(c.points().to_vec()).unwrap();
        write_fiber_file(std::slice::from_ref(&fiber), dir.path().join("c.fib")).unwrap();
        std::fs::write(
            dir.path().join(ATLAS_MANIFEST),
            "# header comment\n\nalpha 10.0 c.fib # trailing comment\n",
        )
        .unwrap();
        let atlas = load_atlas(dir.path()).unwrap();
        assert_eq!(atlas.bundles.len(), 1);
        assert_eq!(atlas.bundles[0].name, "alpha");
    }

    #[test]
    fn format_sig6_cases() {
        assert_eq!(format_sig6(0.0), "0.00000");
        assert_eq!(format_sig6(2.5), "2.50000");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(0.001234567), "0.00123457");
        // The nearest f64 to 99999.95 is just below it, so no rounding bump;
        // 99999.96 does bump into the next decade and gets re-canonicalized.
        assert_eq!(format_sig6(99999.95), "99999.9");
        assert_eq!(format_sig6(99999.96), "100000");
        // Stable under reparse.
        let pi = std::f64::consts::PI;
        for x in [0.0, 2.5, pi, 99999.95, 99999.96, 1e-4, 817.25] {
            let s = format_sig6(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(format_sig6(y), s, "unstable rendering for {x}");
        }
    }

    #[test]
    fn assignment_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let atlas = tiny_atlas();
        let assignments = vec![
            Assignment {
                fiber_index: 0,
                matched: Some(BundleMatch {
                    bundle_index: 1,
                    distance: 2.5,
                }),
            },
            Assignment {
                fiber_index: 1,
                matched: None,
            },
            Assignment {
                fiber_index: 2,
                matched: Some(BundleMatch {
                    bundle_index: 0,
                    distance: 0.0,
                }),
            },
        ];
        let path = dir.path().join("a.csv");
        write_assignments(&assignments, &atlas, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ASSIGNMENT_CSV_HEADER);
        assert_eq!(lines[1], "0,1,beta,2.50000");
        assert_eq!(lines[2], "1,-1,,");
        assert_eq!(lines[3], "2,0,alpha,0.00000");

        let back = read_assignments(&path).unwrap();
        assert_eq!(back, assignments);

        // Re-serialization is byte identical.
        let path2 = dir.path().join("b.csv");
        write_assignments(&back, &atlas, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn all_unassigned_rows() {
        let dir = tempfile::tempdir().unwrap();
        let atlas = tiny_atlas();
        let assignments: Vec<Assignment> = (0..3)
            .map(|i| Assignment {
                fiber_index: i,
                matched: None,
            })
            .collect();
        let path = dir.path().join("u.csv");
        write_assignments(&assignments, &atlas, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for (i, row) in text.lines().skip(1).enumerate() {
            assert_eq!(row, format!("{i},-1,,"));
        }
    }

    #[test]
    fn segmented_bundles_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let atlas = tiny_atlas();
        let fibers: Vec<Fiber> = (0..3)
            .map(|i| {
                Fiber::new(vec![p(i as f32, 0.0, 0.0), p(i as f32 + 1.0, 0.0, 0.0)]).unwrap()
            })
            .collect();
        let dataset = FiberDataset {
            fibers,
            source: PathBuf::from("mem"),
        };

        // All three fibers to bundle 0.
        let assignments: Vec<Assignment> = (0..3)
            .map(|i| Assignment {
                fiber_index: i,
                matched: Some(BundleMatch {
                    bundle_index: 0,
                    distance: 1.0,
                }),
            })
            .collect();
        let out = dir.path().join("seg");
        write_segmented_bundles(&dataset, &assignments, &atlas, &out).unwrap();
        let alpha = read_fiber_file(out.join("alpha.fib")).unwrap();
        assert_eq!(alpha.len(), 3);
        assert_eq!(alpha.fibers, dataset.fibers);
        assert!(!out.join("beta.fib").exists());
        let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
        assert!(summary.contains("alpha 3\n"));
        assert!(summary.contains("beta 0\n"));
        assert!(summary.contains("unassigned 0\n"));
        assert!(summary.contains("total 3\n"));

        // Nothing assigned: only the summary appears.
        let none: Vec<Assignment> = (0..3)
            .map(|i| Assignment {
                fiber_index: i,
                matched: None,
            })
            .collect();
        let out2 = dir.path().join("seg2");
        write_segmented_bundles(&dataset, &none, &atlas, &out2).unwrap();
        assert!(!out2.join("alpha.fib").exists());
        assert!(!out2.join("beta.fib").exists());
        let summary = std::fs::read_to_string(out2.join("summary.txt")).unwrap();
        assert!(summary.contains("unassigned 3\n"));
    }
}
