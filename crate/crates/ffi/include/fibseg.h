/* C interface of the fibseg fiber bundle segmentation engine. */

#ifndef FIBSEG_H
#define FIBSEG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a fibseg call.
typedef enum FibsegStatus {
  FibsegOk = 0,
  // A required pointer argument was NULL.
  FibsegNullArgument = 1,
  // A string argument was not valid UTF-8.
  FibsegInvalidUtf8 = 2,
  // The operating system reported an I/O failure.
  FibsegIo = 3,
  // A file or directory exists but does not parse or validate.
  FibsegInvalidData = 4,
  // A parameter was out of range.
  FibsegInvalidArgument = 5,
  // An internal failure (worker pool construction).
  FibsegInternal = 6,
  // An index argument was out of bounds.
  FibsegOutOfRange = 7,
} FibsegStatus;

// A loaded atlas (opaque).
typedef struct FibsegAtlas FibsegAtlas;

// A loaded subject dataset (opaque).
typedef struct FibsegDataset FibsegDataset;

// Segmentation output (opaque).
typedef struct FibsegResult FibsegResult;

// Cascade stage outcome counters for one segmentation run.
typedef struct FibsegCascadeStats {
  uint64_t pairs_total;
  uint64_t discarded_test1;
  uint64_t discarded_test2;
  uint64_t discarded_test3;
  uint64_t discarded_test4_dme;
  uint64_t discarded_test4_tn;
  uint64_t accepted;
} FibsegCascadeStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fibseg_version(void);

// Message of the most recent failure on this thread. The pointer stays
// valid until the next fibseg call on the same thread. Never NULL.
const char *fibseg_last_error(void);

// Reads a fiber file into a new dataset handle.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
// On success `*out` owns the dataset and must be released with
// [`fibseg_dataset_free`].
enum FibsegStatus fibseg_dataset_read(const char *path, struct FibsegDataset **out);

// Number of fibers in a dataset; 0 for a NULL handle.
size_t fibseg_dataset_fiber_count(const struct FibsegDataset *dataset);

// Releases a dataset handle. NULL is a no-op.
//
// # Safety
// `dataset` must be NULL or a pointer from [`fibseg_dataset_read`] that
// has not been freed yet.
void fibseg_dataset_free(struct FibsegDataset *dataset);

// Loads an atlas directory into a new atlas handle.
//
// # Safety
// `dir` must be a NUL-terminated string; `out` must be a valid pointer.
// On success `*out` must be released with [`fibseg_atlas_free`].
enum FibsegStatus fibseg_atlas_load(const char *dir, struct FibsegAtlas **out);

// Number of bundles in an atlas; 0 for a NULL handle.
size_t fibseg_atlas_bundle_count(const struct FibsegAtlas *atlas);

// Total number of centroids across all bundles; 0 for a NULL handle.
size_t fibseg_atlas_centroid_count(const struct FibsegAtlas *atlas);

// Name of bundle `index`, borrowed from the atlas handle; NULL when the
// handle is NULL or the index is out of range.
const char *fibseg_atlas_bundle_name(const struct FibsegAtlas *atlas, size_t index);

// Distance threshold of bundle `index` in millimeters; NaN when the
// handle is NULL or the index is out of range.
double fibseg_atlas_bundle_threshold(const struct FibsegAtlas *atlas, size_t index);

// Releases an atlas handle. NULL is a no-op.
//
// # Safety
// `atlas` must be NULL or a pointer from [`fibseg_atlas_load`] that has
// not been freed yet.
void fibseg_atlas_free(struct FibsegAtlas *atlas);

// Segments a dataset against an atlas. Fibers are resampled to 21 points
// as needed. `workers` is the worker thread count, 0 for one per CPU.
//
// # Safety
// `dataset` and `atlas` must be live handles from this library; `out`
// must be a valid pointer. On success `*out` must be released with
// [`fibseg_result_free`].
enum FibsegStatus fibseg_segment(const struct FibsegDataset *dataset,
                                 const struct FibsegAtlas *atlas,
                                 uint32_t workers,
                                 struct FibsegResult **out);

// Number of classified fibers in a result; 0 for a NULL handle.
size_t fibseg_result_fiber_count(const struct FibsegResult *result);

// Bundle index assigned to fiber `index`, or -1 when the fiber is
// unassigned, the index is out of range, or the handle is NULL.
int64_t fibseg_result_bundle_index(const struct FibsegResult *result, size_t index);

// Normalized distance of fiber `index` to its assigned bundle; NaN when
// unassigned, out of range, or the handle is NULL.
double fibseg_result_distance(const struct FibsegResult *result, size_t index);

// Copies the cascade stage counters of a run into `out`.
//
// # Safety
// `result` must be a live result handle; `out` must be a valid pointer.
enum FibsegStatus fibseg_result_stats(const struct FibsegResult *result,
                                      struct FibsegCascadeStats *out);

// Writes a result as an assignment CSV
// (`fiber_index,bundle_index,bundle_name,distance`).
//
// # Safety
// `result` and `atlas` must be live handles; `path` must be a
// NUL-terminated string.
enum FibsegStatus fibseg_result_write_csv(const struct FibsegResult *result,
                                          const struct FibsegAtlas *atlas,
                                          const char *path);

// Releases a result handle. NULL is a no-op.
//
// # Safety
// `result` must be NULL or a pointer from [`fibseg_segment`] that has not
// been freed yet.
void fibseg_result_free(struct FibsegResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIBSEG_H */
