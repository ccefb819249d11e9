/* SPDX-License-Identifier: Apache-2.0 */

#ifndef SOCIALML_H
#define SOCIALML_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SmlStatus {
  SML_STATUS_OK = 0,
  SML_STATUS_NULL_POINTER = 1,
  SML_STATUS_INVALID_ARGUMENT = 2,
  SML_STATUS_DIMENSION_MISMATCH = 3,
  SML_STATUS_NOT_PRIMITIVE = 4,
  SML_STATUS_NO_CONVERGENCE = 5,
  SML_STATUS_NON_FINITE = 6,
  SML_STATUS_IO = 7,
  SML_STATUS_FORMAT = 8,
  SML_STATUS_PANIC = 99,
} SmlStatus;

/**
 * Social-learning belief recursion over a fixed graph.
 */
typedef struct SmlBeliefEngine SmlBeliefEngine;

/**
 * Row-major `K x K` combination matrix; entry `(l, k)` is the weight agent
 * `k` assigns to neighbour `l`.
 */
typedef struct SmlCombinationMatrix SmlCombinationMatrix;

/**
 * Trained per-agent classifier.
 */
typedef struct SmlModel SmlModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *sml_last_error(void);

/**
 * Builds a combination matrix from `k * k` row-major weights.
 *
 * # Safety
 * `data` must point to `k * k` readable doubles and `out` to a writable
 * handle slot.
 */
enum SmlStatus sml_matrix_new(const double *data, size_t k, struct SmlCombinationMatrix **out);

/**
 * Averaging matrix over a directed ring of `k` agents with self-loops.
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum SmlStatus sml_matrix_ring(size_t k, struct SmlCombinationMatrix **out);

/**
 * Averaging matrix over a `rows x cols` grid with self-loops.
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum SmlStatus sml_matrix_grid(size_t rows, size_t cols, struct SmlCombinationMatrix **out);

/**
 * Number of agents, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live matrix handle.
 */
size_t sml_matrix_size(const struct SmlCombinationMatrix *m);

/**
 * Writes whether the matrix is primitive to `out`.
 *
 * # Safety
 * `m` must be a live matrix handle and `out` writable.
 */
enum SmlStatus sml_matrix_is_primitive(const struct SmlCombinationMatrix *m, bool *out);

/**
 * Perron eigenvector, written to `out[0..len]` with `len` equal to the
 * matrix size.
 *
 * # Safety
 * `m` must be a live matrix handle and `out` must hold `len` doubles.
 */
enum SmlStatus sml_matrix_perron(const struct SmlCombinationMatrix *m,
                                 double tol,
                                 double *out,
                                 size_t len);

/**
 * # Safety
 * `m` must be null or a handle from this library not yet freed.
 */
void sml_matrix_free(struct SmlCombinationMatrix *m);

/**
 * Loads a model JSON file written by the `train` command.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum SmlStatus sml_model_load(const char *path, struct SmlModel **out);

/**
 * Raw feature dimension, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live model handle.
 */
size_t sml_model_input_dim(const struct SmlModel *m);

/**
 * Number of classes, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live model handle.
 */
size_t sml_model_num_classes(const struct SmlModel *m);

/**
 * Logits of class 0 against each other class, `z_0 - z_g` for
 * `g = 1..M`, written to `out[0..M-1]`.
 *
 * # Safety
 * `h` must hold `h_len` doubles and `out` must hold `out_len` doubles.
 */
enum SmlStatus sml_model_logits(const struct SmlModel *m,
                                const double *h,
                                size_t h_len,
                                double *out,
                                size_t out_len);

/**
 * # Safety
 * `m` must be null or a handle from this library not yet freed.
 */
void sml_model_free(struct SmlModel *m);

/**
 * Belief engine over a copy of `matrix` with `components` statistics per
 * agent. `delta == 0` selects plain social learning; `0 < delta < 1` the
 * adaptive recursion.
 *
 * # Safety
 * `matrix` must be a live matrix handle and `out` a writable handle slot.
 */
enum SmlStatus sml_engine_new(const struct SmlCombinationMatrix *matrix,
                              size_t components,
                              double delta,
                              struct SmlBeliefEngine **out);

/**
 * Advances one step with agent statistics `stats`, row-major
 * `agents x components`.
 *
 * # Safety
 * `e` must be a live engine handle and `stats` must hold `len` doubles.
 */
enum SmlStatus sml_engine_step(struct SmlBeliefEngine *e, const double *stats, size_t len);

/**
 * Current log-belief ratios, row-major `agents x components`.
 *
 * # Safety
 * `e` must be a live engine handle and `out` must hold `len` doubles.
 */
enum SmlStatus sml_engine_lambda(const struct SmlBeliefEngine *e, double *out, size_t len);

/**
 * Current class decision of every agent (class index, 0 is `+1` in the
 * binary case).
 *
 * # Safety
 * `e` must be a live engine handle and `out` must hold `len` values.
 */
enum SmlStatus sml_engine_decisions(const struct SmlBeliefEngine *e, size_t *out, size_t len);

/**
 * Steps taken since creation or the last reset, or 0 for a null handle.
 *
 * # Safety
 * `e` must be null or a live engine handle.
 */
size_t sml_engine_time(const struct SmlBeliefEngine *e);

/**
 * Clears the beliefs back to zero.
 *
 * # Safety
 * `e` must be a live engine handle.
 */
enum SmlStatus sml_engine_reset(struct SmlBeliefEngine *e);

/**
 * # Safety
 * `e` must be null or a handle from this library not yet freed.
 */
void sml_engine_free(struct SmlBeliefEngine *e);

/**
 * Exact error exponent at target risk `r` in `[0, log 2)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SmlStatus sml_exact_exponent(double r, double *out);

/**
 * Linear approximation of the error exponent.
 */
double sml_approx_exponent(double r);

/**
 * Training samples per agent sufficient for consistency at confidence
 * `1 - eps`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SmlStatus sml_sample_complexity(double c,
                                     double target_risk,
                                     double alpha,
                                     double beta,
                                     double eps,
                                     uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOCIALML_H */
