//! C ABI for the fibseg segmentation engine.
//!
//! Handles are opaque pointers created and destroyed by this library;
//! every fallible call returns a [`FibsegStatus`] and leaves a
//! human-readable message retrievable with [`fibseg_last_error`]. The
//! header `include/fibseg.h` is generated by cbindgen at build time.
//!
//! Typical flow:
//!
//! ```c
//! FibsegDataset *subject = NULL;
//! FibsegAtlas *atlas = NULL;
//! FibsegResult *result = NULL;
//! if (fibseg_dataset_read("subject.fib", &subject) != FIBSEG_OK ||
//!     fibseg_atlas_load("atlas_dir", &atlas) != FIBSEG_OK ||
//!     fibseg_segment(subject, atlas, 0, &result) != FIBSEG_OK) {
//!     fprintf(stderr, "%s\n", fibseg_last_error());
//! }
//! ...
//! fibseg_result_free(result);
//! fibseg_atlas_free(atlas);
//! fibseg_dataset_free(subject);
//! ```

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::num::NonZeroUsize;
use std::path::PathBuf;

use fibseg::classifier::{segment, CascadeConfig, CascadeStats, WorkerCount};
use fibseg::error::Error;
use fibseg::io::{load_atlas, read_fiber_file, write_assignments, Assignment, Atlas, FiberDataset};

/// Outcome of a fibseg call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FibsegStatus {
    FibsegOk = 0,
    /// A required pointer argument was NULL.
    FibsegNullArgument = 1,
    /// A string argument was not valid UTF-8.
    FibsegInvalidUtf8 = 2,
    /// The operating system reported an I/O failure.
    FibsegIo = 3,
    /// A file or directory exists but does not parse or validate.
    FibsegInvalidData = 4,
    /// A parameter was out of range.
    FibsegInvalidArgument = 5,
    /// An internal failure (worker pool construction).
    FibsegInternal = 6,
    /// An index argument was out of bounds.
    FibsegOutOfRange = 7,
}

/// Cascade stage outcome counters for one segmentation run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FibsegCascadeStats {
    pub pairs_total: u64,
    pub discarded_test1: u64,
    pub discarded_test2: u64,
    pub discarded_test3: u64,
    pub discarded_test4_dme: u64,
    pub discarded_test4_tn: u64,
    pub accepted: u64,
}

/// A loaded subject dataset (opaque).
pub struct FibsegDataset {
    inner: FiberDataset,
}

/// A loaded atlas (opaque).
pub struct FibsegAtlas {
    inner: Atlas,
    names: Vec<CString>,
}

/// Segmentation output (opaque).
pub struct FibsegResult {
    assignments: Vec<Assignment>,
    stats: CascadeStats,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).expect("NULs stripped");
    });
}

fn status_of(error: &Error) -> FibsegStatus {
    match error {
        Error::Io { .. } => FibsegStatus::FibsegIo,
        Error::InvalidArgument(_) => FibsegStatus::FibsegInvalidArgument,
        Error::ThreadPool(_) => FibsegStatus::FibsegInternal,
        _ => FibsegStatus::FibsegInvalidData,
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string valid for the call.
unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, FibsegStatus> {
    if ptr.is_null() {
        set_error("path argument is NULL");
        return Err(FibsegStatus::FibsegNullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path argument is not valid UTF-8");
            Err(FibsegStatus::FibsegInvalidUtf8)
        }
    }
}

fn require<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, FibsegStatus> {
    // SAFETY: callers contractually pass handles created by this library.
    unsafe { ptr.as_ref() }.ok_or_else(|| {
        set_error(format!("{what} handle is NULL"));
        FibsegStatus::FibsegNullArgument
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fibseg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next fibseg call on the same thread. Never NULL.
#[no_mangle]
pub extern "C" fn fibseg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Reads a fiber file into a new dataset handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
/// On success `*out` owns the dataset and must be released with
/// [`fibseg_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn fibseg_dataset_read(
    path: *const c_char,
    out: *mut *mut FibsegDataset,
) -> FibsegStatus {
    if out.is_null() {
        set_error("output pointer is NULL");
        return FibsegStatus::FibsegNullArgument;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match read_fiber_file(&path) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(FibsegDataset { inner }));
            FibsegStatus::FibsegOk
        }
        Err(e) => {
            set_error(&e);
            status_of(&e)
        }
    }
}

/// Number of fibers in a dataset; 0 for a NULL handle.
#[no_mangle]
pub extern "C" fn fibseg_dataset_fiber_count(dataset: *const FibsegDataset) -> usize {
    match require(dataset, "dataset") {
        Ok(d) => d.inner.len(),
        Err(_) => 0,
    }
}

/// Releases a dataset handle. NULL is a no-op.
///
/// # Safety
/// `dataset` must be NULL or a pointer from [`fibseg_dataset_read`] that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn fibseg_dataset_free(dataset: *mut FibsegDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Loads an atlas directory into a new atlas handle.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be a valid pointer.
/// On success `*out` must be released with [`fibseg_atlas_free`].
#[no_mangle]
pub unsafe extern "C" fn fibseg_atlas_load(
    dir: *const c_char,
    out: *mut *mut FibsegAtlas,
) -> FibsegStatus {
    if out.is_null() {
        set_error("output pointer is NULL");
        return FibsegStatus::FibsegNullArgument;
    }
    let dir = match path_arg(dir) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match load_atlas(&dir) {
        Ok(inner) => {
            let names = inner
                .bundles
                .iter()
                .map(|b| CString::new(b.name.clone()).unwrap_or_default())
                .collect();
            *out = Box::into_raw(Box::new(FibsegAtlas { inner, names }));
            FibsegStatus::FibsegOk
        }
        Err(e) => {
            set_error(&e);
            status_of(&e)
        }
    }
}

/// Number of bundles in an atlas; 0 for a NULL handle.
#[no_mangle]
pub extern "C" fn fibseg_atlas_bundle_count(atlas: *const FibsegAtlas) -> usize {
    match require(atlas, "atlas") {
        Ok(a) => a.inner.bundles.len(),
        Err(_) => 0,
    }
}

/// Total number of centroids across all bundles; 0 for a NULL handle.
#[no_mangle]
pub extern "C" fn fibseg_atlas_centroid_count(atlas: *const FibsegAtlas) -> usize {
    match require(atlas, "atlas") {
        Ok(a) => a.inner.total_centroids(),
        Err(_) => 0,
    }
}

/// Name of bundle `index`, borrowed from the atlas handle; NULL when the
/// handle is NULL or the index is out of range.
#[no_mangle]
pub extern "C" fn fibseg_atlas_bundle_name(
    atlas: *const FibsegAtlas,
    index: usize,
) -> *const c_char {
    match require(atlas, "atlas") {
        Ok(a) => match a.names.get(index) {
            Some(name) => name.as_ptr(),
            None => {
                set_error(format!("bundle index {index} out of range"));
                std::ptr::null()
            }
        },
        Err(_) => std::ptr::null(),
    }
}

/// Distance threshold of bundle `index` in millimeters; NaN when the
/// handle is NULL or the index is out of range.
#[no_mangle]
pub extern "C" fn fibseg_atlas_bundle_threshold(
    atlas: *const FibsegAtlas,
    index: usize,
) -> f64 {
    match require(atlas, "atlas") {
        Ok(a) => match a.inner.bundles.get(index) {
            Some(b) => b.threshold,
            None => {
                set_error(format!("bundle index {index} out of range"));
                f64::NAN
            }
        },
        Err(_) => f64::NAN,
    }
}

/// Releases an atlas handle. NULL is a no-op.
///
/// # Safety
/// `atlas` must be NULL or a pointer from [`fibseg_atlas_load`] that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn fibseg_atlas_free(atlas: *mut FibsegAtlas) {
    if !atlas.is_null() {
        drop(Box::from_raw(atlas));
    }
}

/// Segments a dataset against an atlas. Fibers are resampled to 21 points
/// as needed. `workers` is the worker thread count, 0 for one per CPU.
///
/// # Safety
/// `dataset` and `atlas` must be live handles from this library; `out`
/// must be a valid pointer. On success `*out` must be released with
/// [`fibseg_result_free`].
#[no_mangle]
pub unsafe extern "C" fn fibseg_segment(
    dataset: *const FibsegDataset,
    atlas: *const FibsegAtlas,
    workers: u32,
    out: *mut *mut FibsegResult,
) -> FibsegStatus {
    if out.is_null() {
        set_error("output pointer is NULL");
        return FibsegStatus::FibsegNullArgument;
    }
    let dataset = match require(dataset, "dataset") {
        Ok(d) => d,
        Err(status) => return status,
    };
    let atlas = match require(atlas, "atlas") {
        Ok(a) => a,
        Err(status) => return status,
    };
    let config = CascadeConfig {
        workers: match NonZeroUsize::new(workers as usize) {
            Some(n) => WorkerCount::Fixed(n),
            None => WorkerCount::Auto,
        },
        ..CascadeConfig::default()
    };
    let fibers = dataset.inner.resampled();
    match segment(&fibers, &atlas.inner, &config) {
        Ok((assignments, stats)) => {
            *out = Box::into_raw(Box::new(FibsegResult {
                assignments,
                stats,
            }));
            FibsegStatus::FibsegOk
        }
        Err(e) => {
            set_error(&e);
            status_of(&e)
        }
    }
}

/// Number of classified fibers in a result; 0 for a NULL handle.
#[no_mangle]
pub extern "C" fn fibseg_result_fiber_count(result: *const FibsegResult) -> usize {
    match require(result, "result") {
        Ok(r) => r.assignments.len(),
        Err(_) => 0,
    }
}

/// Bundle index assigned to fiber `index`, or -1 when the fiber is
/// unassigned, the index is out of range, or the handle is NULL.
#[no_mangle]
pub extern "C" fn fibseg_result_bundle_index(result: *const FibsegResult, index: usize) -> i64 {
    match require(result, "result") {
        Ok(r) => match r.assignments.get(index) {
            Some(a) => a.matched.map_or(-1, |m| m.bundle_index as i64),
            None => {
                set_error(format!("fiber index {index} out of range"));
                -1
            }
        },
        Err(_) => -1,
    }
}

/// Normalized distance of fiber `index` to its assigned bundle; NaN when
/// unassigned, out of range, or the handle is NULL.
#[no_mangle]
pub extern "C" fn fibseg_result_distance(result: *const FibsegResult, index: usize) -> f64 {
    match require(result, "result") {
        Ok(r) => match r.assignments.get(index) {
            Some(a) => a.matched.map_or(f64::NAN, |m| m.distance),
            None => {
                set_error(format!("fiber index {index} out of range"));
                f64::NAN
            }
        },
        Err(_) => f64::NAN,
    }
}

/// Copies the cascade stage counters of a run into `out`.
///
/// # Safety
/// `result` must be a live result handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fibseg_result_stats(
    result: *const FibsegResult,
    out: *mut FibsegCascadeStats,
) -> FibsegStatus {
    if out.is_null() {
        set_error("output pointer is NULL");
        return FibsegStatus::FibsegNullArgument;
    }
    let result = match require(result, "result") {
        Ok(r) => r,
        Err(status) => return status,
    };
    let s = &result.stats;
    *out = FibsegCascadeStats {
        pairs_total: s.pairs_total,
        discarded_test1: s.discarded_test1,
        discarded_test2: s.discarded_test2,
        discarded_test3: s.discarded_test3,
        discarded_test4_dme: s.discarded_test4_dme,
        discarded_test4_tn: s.discarded_test4_tn,
        accepted: s.accepted,
    };
    FibsegStatus::FibsegOk
}

/// Writes a result as an assignment CSV
/// (`fiber_index,bundle_index,bundle_name,distance`).
///
/// # Safety
/// `result` and `atlas` must be live handles; `path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fibseg_result_write_csv(
    result: *const FibsegResult,
    atlas: *const FibsegAtlas,
    path: *const c_char,
) -> FibsegStatus {
    let result = match require(result, "result") {
        Ok(r) => r,
        Err(status) => return status,
    };
    let atlas = match require(atlas, "atlas") {
        Ok(a) => a,
        Err(status) => return status,
    };
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match write_assignments(&result.assignments, &atlas.inner, &path) {
        Ok(()) => FibsegStatus::FibsegOk,
        Err(e) => {
            set_error(&e);
            status_of(&e)
        }
    }
}

/// Releases a result handle. NULL is a no-op.
///
/// # Safety
/// `result` must be NULL or a pointer from [`fibseg_segment`] that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn fibseg_result_free(result: *mut FibsegResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
