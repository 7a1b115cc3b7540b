#ifndef SEATRADE_H
#define SEATRADE_H

/* Generated by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum SeatradeStatus {
  SEATRADE_STATUS_OK = 0,
  SEATRADE_STATUS_NULL_POINTER = 1,
  SEATRADE_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The inputs have no usable (unmasked, finite) values.
   */
  SEATRADE_STATUS_NO_VALID_DATA = 3,
  /**
   * Malformed model JSON, config JSON or schema mismatch.
   */
  SEATRADE_STATUS_PARSE = 4,
  /**
   * Any other library error.
   */
  SEATRADE_STATUS_FAILED = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  SEATRADE_STATUS_PANIC = 6,
} SeatradeStatus;

/**
 * Opaque fitted model.
 */
typedef struct SeatradeModel SeatradeModel;

/**
 * Boosting hyperparameters; fill with [`seatrade_params_default`].
 */
typedef struct SeatradeParams {
  uint32_t n_rounds;
  uint32_t max_depth;
  double learning_rate;
  double min_child_weight;
  double l2_reg;
  double subsample_rows;
  double subsample_cols;
  uint32_t n_bins;
  uint64_t seed;
} SeatradeParams;

typedef struct SeatradeNtlStats {
  double mean;
  double max;
  double std;
} SeatradeNtlStats;

typedef struct SeatradeMetrics {
  double r2;
  double pearson_corr;
  double mae;
  double rmse;
  double mape_pct;
  size_t n;
} SeatradeMetrics;

/**
 * Means (and standard deviations) over Monte Carlo replications.
 */
typedef struct SeatradeMcSummary {
  size_t n_ok;
  size_t n_failed;
  double raw_r2_mean;
  double raw_r2_sd;
  double anchored_r2_mean;
  double anchored_r2_sd;
  double delta_slope_mean;
  double delta_slope_sd;
  double delta_corr_mean;
  double delta_corr_sd;
} SeatradeMcSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *seatrade_last_error(void);

/**
 * Writes the default hyperparameters to `out`.
 */
enum SeatradeStatus seatrade_params_default(struct SeatradeParams *out);

/**
 * Fits a model on the row-major `n_rows * n_cols` matrix `x` (NaN =
 * missing) and targets `y`. `params` may be null for defaults. On success
 * `*out` owns a model to release with [`seatrade_model_free`].
 *
 * # Safety
 * `x` and `y` must be valid for the stated lengths.
 */
enum SeatradeStatus seatrade_model_fit(const double *x,
                                       size_t n_rows,
                                       size_t n_cols,
                                       const double *y,
                                       const struct SeatradeParams *params,
                                       struct SeatradeModel **out);

/**
 * Predicts `n_rows` rows of `x` into `out`.
 *
 * # Safety
 * `model` must come from this library; buffers must be valid for the stated lengths.
 */
enum SeatradeStatus seatrade_model_predict(const struct SeatradeModel *model,
                                           const double *x,
                                           size_t n_rows,
                                           size_t n_cols,
                                           double *out);

/**
 * Number of input columns the model expects.
 *
 * # Safety
 * `model` must be null or come from this library.
 */
size_t seatrade_model_n_features(const struct SeatradeModel *model);

/**
 * Per-feature share of split gain in percent, in column order.
 *
 * # Safety
 * `out` must be valid for `len` writes; `len` must equal the feature count.
 */
enum SeatradeStatus seatrade_model_importance(const struct SeatradeModel *model,
                                              double *out,
                                              size_t len);

/**
 * Serializes the model; `*out` must be released with [`seatrade_string_free`].
 *
 * # Safety
 * `model` must come from this library.
 */
enum SeatradeStatus seatrade_model_to_json(const struct SeatradeModel *model, char **out);

/**
 * Loads a model from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
enum SeatradeStatus seatrade_model_from_json(const char *json, struct SeatradeModel **out);

/**
 * # Safety
 * `model` must be null or come from this library, and not be used afterwards.
 */
void seatrade_model_free(struct SeatradeModel *model);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void seatrade_string_free(char *s);

/**
 * Median of consecutive-acquisition dB change sums. Writes NaN when the
 * stack has fewer than two usable acquisitions.
 *
 * # Safety
 * `values` must hold `width * height * n_dates` values; `out` must be writable.
 */
enum SeatradeStatus seatrade_vv_diff_median(const double *values,
                                            size_t width,
                                            size_t height,
                                            size_t n_dates,
                                            double *out);

/**
 * Mean dB of the per-pixel median composite.
 *
 * # Safety
 * As for [`seatrade_vv_diff_median`].
 */
enum SeatradeStatus seatrade_vh_backscatter(const double *values,
                                            size_t width,
                                            size_t height,
                                            size_t n_dates,
                                            double *out);

/**
 * Nighttime-light statistics. `temporal_std` selects the spread of daily
 * means instead of the spatial spread of the composite.
 *
 * # Safety
 * As for [`seatrade_vv_diff_median`].
 */
enum SeatradeStatus seatrade_ntl_stats(const double *values,
                                       size_t width,
                                       size_t height,
                                       size_t n_dates,
                                       bool temporal_std,
                                       struct SeatradeNtlStats *out);

/**
 * Share of composite pixels with radiance strictly above `tau`.
 *
 * # Safety
 * As for [`seatrade_vv_diff_median`].
 */
enum SeatradeStatus seatrade_lit_area_ratio(const double *values,
                                            size_t width,
                                            size_t height,
                                            size_t n_dates,
                                            double tau,
                                            double *out);

/**
 * Test-set metrics; undefined ones are NaN.
 *
 * # Safety
 * `actual` and `predicted` must hold `n` values.
 */
enum SeatradeStatus seatrade_metrics(const double *actual,
                                     const double *predicted,
                                     size_t n,
                                     struct SeatradeMetrics *out);

/**
 * Shifts `raw` so that its first value equals `observed_first`; writes the
 * anchored series to `out` (may alias `raw`) and `offset` such that
 * `anchored = raw - offset`.
 *
 * # Safety
 * `raw` and `out` must hold `n` values.
 */
enum SeatradeStatus seatrade_anchor(const double *raw,
                                    size_t n,
                                    double observed_first,
                                    double *out,
                                    double *offset);

/**
 * `mean(post) - mean(pre)` of a log-scale series.
 *
 * # Safety
 * `pre` and `post` must hold `n_pre` and `n_post` values.
 */
enum SeatradeStatus seatrade_window_delta(const double *pre,
                                          size_t n_pre,
                                          const double *post,
                                          size_t n_post,
                                          double *out);

/**
 * Runs the Monte Carlo simulation. `config_json` holds any subset of the
 * configuration fields, or is null for the defaults.
 *
 * # Safety
 * `config_json` must be null or a NUL-terminated string.
 */
enum SeatradeStatus seatrade_mc_run(const char *config_json, struct SeatradeMcSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEATRADE_H */
