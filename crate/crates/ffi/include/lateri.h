#ifndef LATERI_H
#define LATERI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Storage type codes, equal to the on-disk dtype byte.
 */
typedef enum LateriDType {
  LATERI_D_TYPE_F32 = 0,
  LATERI_D_TYPE_F16 = 1,
  LATERI_D_TYPE_BIT = 2,
} LateriDType;

/**
 * Similarity metric codes.
 */
typedef enum LateriMetric {
  LATERI_METRIC_NEG_L2_SQUARED = 0,
  LATERI_METRIC_DOT = 1,
  LATERI_METRIC_COSINE = 2,
} LateriMetric;

/**
 * Scorer codes for [`lateri_rerank`].
 */
typedef enum LateriScorer {
  LATERI_SCORER_MAX_SIM = 0,
  LATERI_SCORER_BINARY_ASYMMETRIC = 1,
  LATERI_SCORER_BINARY_SYMMETRIC = 2,
} LateriScorer;

/**
 * Result code of every fallible call.
 */
typedef enum LateriStatus {
  LATERI_STATUS_OK = 0,
  LATERI_STATUS_NULL_POINTER = 1,
  LATERI_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Dimension, row count or other shape mismatch.
   */
  LATERI_STATUS_SHAPE = 3,
  LATERI_STATUS_NOT_NORMALIZED = 4,
  LATERI_STATUS_UNKNOWN_PASSAGE = 5,
  LATERI_STATUS_DUPLICATE_PASSAGE = 6,
  /**
   * Malformed, truncated or unsupported index data.
   */
  LATERI_STATUS_FORMAT = 7,
  LATERI_STATUS_IO = 8,
  LATERI_STATUS_PANIC = 9,
} LateriStatus;

/**
 * Opaque handle to poly-encoder codes.
 */
typedef struct LateriCodes LateriCodes;

/**
 * Opaque handle to an open index.
 */
typedef struct LateriIndex LateriIndex;

/**
 * Opaque handle to a ranked candidate list.
 */
typedef struct LateriResults LateriResults;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL if none.
 * Valid until the next failing call on the same thread.
 */
const char *lateri_last_error(void);

/**
 * Opens an index file. On success `*out` owns a handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LateriStatus lateri_index_open(const char *path, struct LateriIndex **out);

/**
 * # Safety
 * `index` must be NULL or a handle from [`lateri_index_open`] not yet freed.
 */
void lateri_index_free(struct LateriIndex *index);

/**
 * Number of passages, 0 for NULL.
 *
 * # Safety
 * `index` must be NULL or a live handle.
 */
uint64_t lateri_index_len(const struct LateriIndex *index);

/**
 * Vector dimension (bits for a bit index), 0 for NULL.
 *
 * # Safety
 * `index` must be NULL or a live handle.
 */
uint32_t lateri_index_dim(const struct LateriIndex *index);

/**
 * # Safety
 * `index` must be a live handle and `out` writable.
 */
enum LateriStatus lateri_index_dtype(const struct LateriIndex *index, enum LateriDType *out);

/**
 * Loads poly-encoder codes from a shard holding a `polycodes` record.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LateriStatus lateri_codes_load(const char *path, struct LateriCodes **out);

/**
 * # Safety
 * `codes` must be NULL or a handle from [`lateri_codes_load`] not yet freed.
 */
void lateri_codes_free(struct LateriCodes *codes);

/**
 * MaxSim score of a 32-row query against one passage, both row-major.
 *
 * # Safety
 * `query` must hold `query_rows * dim` floats, `passage` must hold
 * `passage_rows * dim` floats and `out` must be writable.
 */
enum LateriStatus lateri_maxsim(const float *query,
                                size_t query_rows,
                                const float *passage,
                                size_t passage_rows,
                                size_t dim,
                                uint32_t metric_code,
                                double *out);

/**
 * `dim_bits - 2 * popcount(a ^ b)` over `words` packed 64-bit words.
 *
 * # Safety
 * `a` and `b` must each hold `words` values and `out` must be writable.
 */
enum LateriStatus lateri_packed_dot(const uint64_t *a,
                                    const uint64_t *b,
                                    size_t words,
                                    size_t dim_bits,
                                    int64_t *out);

/**
 * Payload bytes of an index of `passages` records averaging `avg_tokens`
 * rows. `dim` counts bits for [`LateriDType::Bit`].
 *
 * # Safety
 * `out` must be writable.
 */
enum LateriStatus lateri_estimate_index_size(uint64_t passages,
                                             double avg_tokens,
                                             size_t dim,
                                             uint32_t dtype_code,
                                             uint64_t *out);

/**
 * Re-ranks `candidate_count` passage ids against a 32-row query with a
 * MaxSim scorer. `metric_code` applies to [`LateriScorer::MaxSim`] only.
 *
 * # Safety
 * `index` must be a live handle, `query` must hold `query_rows * dim`
 * floats, `candidate_ids` must hold `candidate_count` NUL-terminated strings
 * and `out` must be writable.
 */
enum LateriStatus lateri_rerank(const struct LateriIndex *index,
                                const float *query,
                                size_t query_rows,
                                size_t dim,
                                const char *const *candidate_ids,
                                size_t candidate_count,
                                uint32_t scorer,
                                uint32_t metric_code,
                                struct LateriResults **out);

/**
 * Re-ranks candidates with the poly-encoder score. The index must hold one
 * row per passage.
 *
 * # Safety
 * As for [`lateri_rerank`]; `codes` must be a live handle.
 */
enum LateriStatus lateri_rerank_poly(const struct LateriIndex *index,
                                     const struct LateriCodes *codes,
                                     const float *query,
                                     size_t query_rows,
                                     size_t dim,
                                     const char *const *candidate_ids,
                                     size_t candidate_count,
                                     struct LateriResults **out);

/**
 * Number of ranked entries, 0 for NULL.
 *
 * # Safety
 * `results` must be NULL or a live handle.
 */
size_t lateri_results_len(const struct LateriResults *results);

/**
 * Reads entry `i` (0-based, best first). `*passage_id` borrows from the
 * handle and stays valid until [`lateri_results_free`]. Any output pointer
 * may be NULL.
 *
 * # Safety
 * `results` must be a live handle; non-NULL outputs must be writable.
 */
enum LateriStatus lateri_results_get(const struct LateriResults *results,
                                     size_t i,
                                     const char **passage_id,
                                     double *score,
                                     uint32_t *rank);

/**
 * # Safety
 * `results` must be NULL or a handle not yet freed.
 */
void lateri_results_free(struct LateriResults *results);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATERI_H */
