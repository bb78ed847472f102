#ifndef MFSOBOL_H
#define MFSOBOL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum MfsStatus {
  MFS_STATUS_OK = 0,
  // A required pointer argument was NULL.
  MFS_STATUS_NULL_POINTER = 1,
  // Lengths, sizes or values outside the accepted domain.
  MFS_STATUS_INVALID_ARGUMENT = 2,
  // Correlations or costs violate the allocation ordering.
  MFS_STATUS_INADMISSIBLE = 3,
  // The budget leaves fewer than two high-fidelity rows.
  MFS_STATUS_BUDGET_TOO_SMALL = 4,
  MFS_STATUS_SOLVER_FAILURE = 5,
  MFS_STATUS_LEAST_SQUARES = 6,
  MFS_STATUS_DEGENERATE_STATISTICS = 7,
  // The configuration text could not be parsed or is inconsistent.
  MFS_STATUS_CONFIG = 8,
  MFS_STATUS_IO = 9,
  // A Rust panic was caught at the boundary.
  MFS_STATUS_PANIC = 10,
} MfsStatus;

// One model of a campaign configuration.
typedef struct MfsModel MfsModel;

// Fitted Legendre polynomial chaos surrogate.
typedef struct MfsPce MfsPce;

// Incremental unscrambled Sobol' generator.
typedef struct MfsSobol MfsSobol;

// Outputs of one model on the Saltelli matrices. `c` is column-major by
// matrix: `c[j * rows + i]` is row `i` of `C_j`.
typedef struct MfsLevel {
  const double *a;
  const double *b;
  const double *c;
  size_t rows;
} MfsLevel;

// Scalar part of a Sobol' estimate; indices go to caller arrays.
typedef struct MfsEstimate {
  double mean;
  double variance;
  // Non-positive variance estimate; the indices are then zero.
  bool degenerate;
} MfsEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on the calling thread, or NULL.
// The pointer stays valid until the next failing call on this thread.
const char *mfs_last_error(void);

// Library version as a static NUL-terminated string.
const char *mfs_version(void);

// Creates a generator whose first point has sequence index `skip`.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum MfsStatus mfs_sobol_new(size_t dim, uint64_t skip, struct MfsSobol **out);

// Writes the next point (`dim` values in `[0, 1)`) and advances.
//
// # Safety
// `point` must hold `dim` doubles.
enum MfsStatus mfs_sobol_next(struct MfsSobol *seq, double *point, size_t dim);

// # Safety
// `seq` must come from [`mfs_sobol_new`] and not be used afterwards.
void mfs_sobol_free(struct MfsSobol *seq);

// Fills `points` (row-major, `n × dim`) with Sobol' points `skip..skip+n`.
//
// # Safety
// `points` must hold `n * dim` doubles.
enum MfsStatus mfs_sobol_points(size_t dim, size_t n, uint64_t skip, double *points);

// Builds model `model_id` from campaign TOML text. Relative waveform paths
// resolve against the working directory. Perturbed 0D models evaluate the
// unperturbed 0D solver; the trend correction needs pilot data.
//
// # Safety
// Both strings must be NUL-terminated; `out` must be a valid handle slot.
enum MfsStatus mfs_model_new(const char *config_toml, const char *model_id, struct MfsModel **out);

// Number of outputs written by [`mfs_model_evaluate`].
//
// # Safety
// `model` must be a live handle or NULL (which yields 0).
size_t mfs_model_output_count(const struct MfsModel *model);

// Evaluates the model at physical inputs `z`.
//
// # Safety
// `z` must hold `dim` doubles and `outputs` `n_outputs` doubles.
enum MfsStatus mfs_model_evaluate(const struct MfsModel *model,
                                  const double *z,
                                  size_t dim,
                                  double *outputs,
                                  size_t n_outputs);

// # Safety
// `model` must come from [`mfs_model_new`] and not be used afterwards.
void mfs_model_free(struct MfsModel *model);

// Single-fidelity Saltelli estimate with the Owen main-effect estimator.
//
// # Safety
// `level` must describe valid arrays; `main` and `total` hold `dim` doubles.
enum MfsStatus mfs_mc_sobol(const struct MfsLevel *level,
                            size_t dim,
                            struct MfsEstimate *out,
                            double *main,
                            double *total);

// Multifidelity estimate over `k` nested levels, highest fidelity first.
// Level `i` must provide at least `m[i]` rows.
//
// # Safety
// `levels`, `m`, `alpha` and `costs` hold `k` entries; `main` and `total`
// hold `dim` doubles.
enum MfsStatus mfs_mfmc_sobol(const struct MfsLevel *levels,
                              size_t k,
                              size_t dim,
                              const size_t *m,
                              const double *alpha,
                              const double *costs,
                              struct MfsEstimate *out,
                              double *main,
                              double *total);

// Optimal rows `m` and control-variate weights `alpha` for `k` models with
// output deviations `sigma`, correlations `rho` with model 1 (`rho[0] = 1`)
// and per-evaluation `costs`.
//
// # Safety
// Input arrays hold `k` doubles; `m` and `alpha` have room for `k` values.
enum MfsStatus mfs_optimal_allocation(const double *sigma,
                                      const double *rho,
                                      const double *costs,
                                      size_t k,
                                      double budget,
                                      size_t dim,
                                      size_t *m,
                                      double *alpha);

// Checks the correlation ordering and cost-ratio conditions. Offending
// 1-based levels go to `violations` (room for `k`), their number to
// `n_violations`.
//
// # Safety
// `rho` and `costs` hold `k` doubles; `violations` has room for `k` values.
enum MfsStatus mfs_check_cost_ratio(const double *rho,
                                    const double *costs,
                                    size_t k,
                                    size_t *violations,
                                    size_t *n_violations);

// Least-squares fit of total degree `order` on uniform inputs with bounds
// `lower`/`upper`. `z` is `n × dim` row-major in physical units.
//
// # Safety
// `lower`/`upper` hold `dim` doubles, `z` `n * dim`, `y` `n`.
enum MfsStatus mfs_pce_fit(const double *lower,
                           const double *upper,
                           size_t dim,
                           uint32_t order,
                           const double *z,
                           const double *y,
                           size_t n,
                           struct MfsPce **out);

// # Safety
// `z` holds `dim` doubles; `value` is a valid pointer.
enum MfsStatus mfs_pce_evaluate(const struct MfsPce *pce,
                                const double *z,
                                size_t dim,
                                double *value);

// Mean, variance and Sobol' indices read off the coefficients.
//
// # Safety
// `main` and `total` hold `dim` doubles.
enum MfsStatus mfs_pce_sobol(const struct MfsPce *pce,
                             size_t dim,
                             struct MfsEstimate *out,
                             double *main,
                             double *total);

// # Safety
// `pce` must come from [`mfs_pce_fit`] and not be used afterwards.
void mfs_pce_free(struct MfsPce *pce);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFSOBOL_H */
