#ifndef QSAMPLE_H
#define QSAMPLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QsStatus {
  QS_STATUS_OK = 0,
  QS_STATUS_NULL_POINTER = 1,
  QS_STATUS_INVALID_PARAMETER = 2,
  QS_STATUS_NOT_STOCHASTIC = 3,
  QS_STATUS_NOT_REVERSIBLE = 4,
  QS_STATUS_GAP_TOO_SMALL = 5,
  QS_STATUS_SIZE_GUARD = 6,
  QS_STATUS_PRECONDITION = 7,
  QS_STATUS_CERTIFICATION = 8,
  QS_STATUS_PARSE = 9,
  QS_STATUS_NUMERIC = 10,
  QS_STATUS_BUFFER_TOO_SMALL = 11,
  QS_STATUS_IO = 12,
  QS_STATUS_INTERNAL = 13,
} QsStatus;

/**
 * Validated reversible Markov chain.
 */
typedef struct QsChain QsChain;

/**
 * Chebyshev gap filter.
 */
typedef struct QsFilter QsFilter;

/**
 * Fixed-point phase schedule.
 */
typedef struct QsSchedule QsSchedule;

/**
 * Spectral data of the qubitized walk of a chain.
 */
typedef struct QsWalk QsWalk;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qs_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Release with
 * `qs_string_free`.
 */
char *qs_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void qs_string_free(char *s);

/**
 * Chain from a row-major `n × n` transition matrix.
 *
 * # Safety
 * `p` must point to `n * n` doubles and `out` to writable storage.
 */
enum QsStatus qs_chain_from_rows(const double *p, size_t n, struct QsChain **out);

/**
 * Chain from the JSON chain format `{"n", "P", "pi"?}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum QsStatus qs_chain_from_json(const char *json, struct QsChain **out);

/**
 * Heat-bath Glauber chain on the `2 × cols` Ising ladder.
 *
 * # Safety
 * `out` must be writable.
 */
enum QsStatus qs_chain_ising_ladder(size_t cols, double beta, bool lazy, struct QsChain **out);

/**
 * # Safety
 * `chain` must be NULL or a handle from this library, released once.
 */
void qs_chain_free(struct QsChain *chain);

/**
 * Number of states, or 0 for a NULL handle.
 *
 * # Safety
 * `chain` must be NULL or a live handle.
 */
size_t qs_chain_n(const struct QsChain *chain);

/**
 * # Safety
 * `chain` must be a live handle and `lambda2`, `delta` writable.
 */
enum QsStatus qs_chain_spectral_gap(const struct QsChain *chain, double *lambda2, double *delta);

/**
 * Copies the stationary distribution into `buf` (`len ≥ n`).
 *
 * # Safety
 * `chain` must be a live handle and `buf` valid for `len` doubles.
 */
enum QsStatus qs_chain_stationary(const struct QsChain *chain, double *buf, size_t len);

/**
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
enum QsStatus qs_walk_new(const struct QsChain *chain, struct QsWalk **out);

/**
 * # Safety
 * `walk` must be NULL or a handle from this library, released once.
 */
void qs_walk_free(struct QsWalk *walk);

/**
 * # Safety
 * `walk` must be a live handle and `out` writable.
 */
enum QsStatus qs_walk_phase_gap(const struct QsWalk *walk, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum QsStatus qs_filter_new(double delta, double eps, struct QsFilter **out);

/**
 * # Safety
 * `filter` must be NULL or a handle from this library, released once.
 */
void qs_filter_free(struct QsFilter *filter);

/**
 * # Safety
 * `filter` must be a live handle; `degree` and `achieved_eps` writable.
 */
enum QsStatus qs_filter_info(const struct QsFilter *filter, uint32_t *degree, double *achieved_eps);

/**
 * # Safety
 * `filter` must be a live handle and `out` writable.
 */
enum QsStatus qs_filter_eval(const struct QsFilter *filter, double theta, double *out);

/**
 * Error norm of the selective-phase gadget built from `walk` and `filter`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum QsStatus qs_gadget_error_norm(const struct QsWalk *walk,
                                   const struct QsFilter *filter,
                                   double phi,
                                   double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum QsStatus qs_schedule_new(double p_lower, double eps_fp, struct QsSchedule **out);

/**
 * # Safety
 * `schedule` must be NULL or a handle from this library, released once.
 */
void qs_schedule_free(struct QsSchedule *schedule);

/**
 * Odd schedule length `L`, or 0 for a NULL handle.
 *
 * # Safety
 * `schedule` must be NULL or a live handle.
 */
size_t qs_schedule_length(const struct QsSchedule *schedule);

/**
 * Copies the `(L − 1)/2` source and target angles into `alphas` and `betas`.
 *
 * # Safety
 * `schedule` must be a live handle and both buffers valid for `len` doubles.
 */
enum QsStatus qs_schedule_angles(const struct QsSchedule *schedule,
                                 double *alphas,
                                 double *betas,
                                 size_t len);

/**
 * Anneals along Glauber chains of the `2 × cols` ladder at `betas` after
 * checking adjacent overlaps, and returns the report as JSON. Release `json_out` with `qs_string_free`.
 *
 * # Safety
 * `betas` must point to `n_betas` doubles and `json_out` be writable.
 */
enum QsStatus qs_anneal_ladder(size_t cols,
                               const double *betas,
                               size_t n_betas,
                               double eps,
                               bool exact,
                               char **json_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSAMPLE_H */
