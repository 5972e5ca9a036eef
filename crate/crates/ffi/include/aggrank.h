#ifndef AGGRANK_H
#define AGGRANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AggrankDiscount {
  AGGRANK_DISCOUNT_LOG1P = 0,
  AGGRANK_DISCOUNT_IDENTITY = 1,
} AggrankDiscount;

typedef enum AggrankGain {
  AGGRANK_GAIN_EXP2_MINUS_ONE = 0,
  AGGRANK_GAIN_EXP2 = 1,
  AGGRANK_GAIN_IDENTITY = 2,
  AGGRANK_GAIN_CLAMPED01 = 3,
} AggrankGain;

typedef enum AggrankStatus {
  AGGRANK_STATUS_OK = 0,
  AGGRANK_STATUS_NULL_POINTER = 1,
  AGGRANK_STATUS_INVALID_ARGUMENT = 2,
  AGGRANK_STATUS_PARSE = 3,
  AGGRANK_STATUS_IO = 4,
  /**
   * The algorithm ran but could not produce a result (no convergence,
   * disconnected comparisons, infinite log-odds, ...).
   */
  AGGRANK_STATUS_ALGORITHM_FAILURE = 5,
  AGGRANK_STATUS_PANIC = 6,
} AggrankStatus;

/**
 * Opaque query dataset.
 */
typedef struct AggrankDataset AggrankDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a
 * successful call. The pointer stays valid until the next call into the
 * library on the same thread.
 */
const char *aggrank_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aggrank_version(void);

/**
 * NDCG loss `1 - DCG(alpha)/Z(s)` of scores `alpha` against structure `s`,
 * both of length `m`.
 *
 * # Safety
 * `alpha` and `s` must point to `m` doubles; `out` to one double.
 */
enum AggrankStatus aggrank_ndcg_loss(const double *alpha,
                                     const double *s,
                                     size_t m,
                                     enum AggrankGain gain,
                                     enum AggrankDiscount discount,
                                     double *out);

/**
 * ERR loss; gains must lie in `[0, 1]`.
 *
 * # Safety
 * As for [`aggrank_ndcg_loss`].
 */
enum AggrankStatus aggrank_err_loss(const double *alpha,
                                    const double *s,
                                    size_t m,
                                    enum AggrankGain gain,
                                    enum AggrankDiscount discount,
                                    double *out);

/**
 * Limit of averaged empirical log-odds under BTL sampling with relevances
 * `relevances`.
 *
 * # Safety
 * `relevances` and `out` must point to `m` doubles.
 */
enum AggrankStatus aggrank_limiting_score(const double *relevances, size_t m, double *out);

/**
 * Empirical log-odds scores from `n` comparisons `winners[i] > losers[i]`
 * on `m` items with smoothing `smoothing`.
 *
 * # Safety
 * `winners` and `losers` must point to `n` values; `out` to `m` doubles.
 */
enum AggrankStatus aggrank_log_odds_scores(const size_t *winners,
                                           const size_t *losers,
                                           size_t n,
                                           size_t m,
                                           double smoothing,
                                           double *out);

/**
 * Thurstone-Mosteller least-squares scores for the skew-symmetric
 * `m x m` row-major matrix `a`. `mask` is an optional row-major `m x m`
 * byte matrix (nonzero = observed, diagonal set); NULL means fully observed.
 *
 * # Safety
 * `a` must point to `m*m` doubles, `mask` to `m*m` bytes or be NULL, and
 * `out` to `m` doubles.
 */
enum AggrankStatus aggrank_thurstone_scores(const double *a,
                                            const uint8_t *mask,
                                            size_t m,
                                            double *out);

/**
 * Parses LETOR text (NUL-terminated) into a new dataset without judgments.
 *
 * # Safety
 * `text` must be a valid C string; `out` must be writable.
 */
enum AggrankStatus aggrank_dataset_parse_letor(const char *text, struct AggrankDataset **out);

/**
 * Loads a dataset directory written by `aggrank gen-data`: `data.letor`
 * plus the `judgments.json` sidecar when present.
 *
 * # Safety
 * `dir` must be a valid C string; `out` must be writable.
 */
enum AggrankStatus aggrank_dataset_load_dir(const char *dir, struct AggrankDataset **out);

/**
 * Releases a dataset. NULL is ignored.
 *
 * # Safety
 * `ds` must come from this library and not be used afterwards.
 */
void aggrank_dataset_free(struct AggrankDataset *ds);

/**
 * Number of queries.
 *
 * # Safety
 * `ds` must be a live dataset handle; `out` must be writable.
 */
enum AggrankStatus aggrank_dataset_num_queries(const struct AggrankDataset *ds, size_t *out);

/**
 * Feature dimension shared by all queries.
 *
 * # Safety
 * As for [`aggrank_dataset_num_queries`].
 */
enum AggrankStatus aggrank_dataset_dim(const struct AggrankDataset *ds, size_t *out);

/**
 * Total number of judgments over all queries.
 *
 * # Safety
 * As for [`aggrank_dataset_num_queries`].
 */
enum AggrankStatus aggrank_dataset_num_judgments(const struct AggrankDataset *ds, size_t *out);

/**
 * Number of items of query `q`.
 *
 * # Safety
 * As for [`aggrank_dataset_num_queries`].
 */
enum AggrankStatus aggrank_dataset_query_items(const struct AggrankDataset *ds,
                                               size_t q,
                                               size_t *out);

/**
 * Linear scores `X_q theta` of query `q`; `out` has room for `out_len`
 * doubles, which must equal the query's item count.
 *
 * # Safety
 * `theta` must point to `d` doubles and `out` to `out_len` doubles.
 */
enum AggrankStatus aggrank_dataset_scores(const struct AggrankDataset *ds,
                                          size_t q,
                                          const double *theta,
                                          size_t d,
                                          double *out,
                                          size_t out_len);

/**
 * Trains the NDCG regression surrogate on empirical log-odds of `k`
 * judgments per term by proximal SGD with steps `step_scale / sqrt(t)`,
 * writing the averaged iterate to `theta_out` (length `d`, the dataset
 * dimension).
 *
 * # Safety
 * `ds` must be a live dataset handle; `theta_out` must point to `d` doubles.
 */
enum AggrankStatus aggrank_train_regression(const struct AggrankDataset *ds,
                                            size_t k,
                                            double lambda,
                                            double step_scale,
                                            size_t iterations,
                                            double smoothing,
                                            uint64_t seed,
                                            double *theta_out,
                                            size_t d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AGGRANK_H */
