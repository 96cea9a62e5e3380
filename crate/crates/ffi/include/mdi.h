#ifndef MDI_H
#define MDI_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum MdiStatus {
  MDI_STATUS_OK = 0,
  MDI_STATUS_NULL_POINTER = 1,
  MDI_STATUS_INVALID_UTF8 = 2,
  MDI_STATUS_INVALID_ARGUMENT = 3,
  MDI_STATUS_MALFORMED = 4,
  MDI_STATUS_NOT_FOUND = 5,
  MDI_STATUS_LOCKED = 6,
  MDI_STATUS_DENIED = 7,
  MDI_STATUS_FIT_FAILED = 8,
  MDI_STATUS_IO = 9,
  MDI_STATUS_UNSUPPORTED = 10,
  MDI_STATUS_BUFFER_TOO_SMALL = 11,
  MDI_STATUS_PANIC = 12,
} MdiStatus;

typedef enum MdiViewKind {
  MDI_VIEW_KIND_CONTENT2D = 0,
  MDI_VIEW_KIND_CONTENT3D = 1,
  MDI_VIEW_KIND_PLOT = 2,
  MDI_VIEW_KIND_TEXT = 3,
} MdiViewKind;

typedef enum MdiModel {
  /**
   * `order` is the degree; parameters are coefficients from x⁰ up.
   */
  MDI_MODEL_POLYNOMIAL = 0,
  /**
   * `order` is the component count; parameters are (A, μ, σ) triples.
   */
  MDI_MODEL_GAUSSIAN_SUM = 1,
} MdiModel;

/**
 * Free-expansion gas state stepped synchronously.
 */
typedef struct MdiGas MdiGas;

/**
 * A fixed-bin 1D histogram.
 */
typedef struct MdiHistogram MdiHistogram;

/**
 * A scene view with its layers and items.
 */
typedef struct MdiView MdiView;

/**
 * Settings for [`mdi_run_headless`]; start from
 * [`mdi_headless_config_default`].
 */
typedef struct MdiHeadlessConfig {
  uint64_t steps;
  uint64_t seed;
  size_t particles;
  size_t grid_m;
  uint64_t refresh_ms;
} MdiHeadlessConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mdi_version(void);

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *mdi_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *mdi_status_name(enum MdiStatus status);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void mdi_string_free(char *s);

/**
 * Creates a view over the world rectangle `(x0, y0)–(x1, y1)`.
 *
 * # Safety
 * `title` must be a NUL-terminated string; `out_view` must be writable.
 */
enum MdiStatus mdi_view_new(const char *title,
                            enum MdiViewKind kind,
                            double x0,
                            double y0,
                            double x1,
                            double y1,
                            struct MdiView **out_view);

/**
 * # Safety
 * `view` must come from [`mdi_view_new`] and not be used afterwards.
 */
void mdi_view_free(struct MdiView *view);

/**
 * Ids of the reserved bottom (connection) and top (annotation) layers.
 *
 * # Safety
 * Pointers must be valid.
 */
enum MdiStatus mdi_view_reserved_layers(const struct MdiView *view,
                                        uint64_t *out_connection,
                                        uint64_t *out_annotation);

/**
 * Adds a user layer directly beneath the annotation layer.
 *
 * # Safety
 * Pointers must be valid; `name` NUL-terminated.
 */
enum MdiStatus mdi_view_add_layer(struct MdiView *view, const char *name, uint64_t *out_layer);

/**
 * # Safety
 * `view` must be valid.
 */
enum MdiStatus mdi_view_set_layer_visibility(struct MdiView *view, uint64_t layer, bool visible);

/**
 * Adds an item described by an item-spec JSON object, for example
 * `{"geometry":{"kind":"rectangle","rect":{"min":{"x":0,"y":0},"max":{"x":1,"y":1}}}}`.
 *
 * # Safety
 * Pointers must be valid; `spec_json` NUL-terminated.
 */
enum MdiStatus mdi_view_add_item_json(struct MdiView *view,
                                      uint64_t layer,
                                      const char *spec_json,
                                      uint64_t *out_item);

/**
 * Applies an edit JSON object such as `{"op":"drag","dx":1,"dy":0}`.
 *
 * # Safety
 * Pointers must be valid; `edit_json` NUL-terminated.
 */
enum MdiStatus mdi_view_apply_edit_json(struct MdiView *view, uint64_t item, const char *edit_json);

/**
 * Translates the viewport by a screen-space offset.
 *
 * # Safety
 * `view` must be valid.
 */
enum MdiStatus mdi_view_pan(struct MdiView *view, double dx, double dy);

/**
 * Scales the viewport about a screen point; `factor > 1` zooms in.
 *
 * # Safety
 * `view` must be valid.
 */
enum MdiStatus mdi_view_zoom(struct MdiView *view, double factor, double x, double y);

/**
 * Item ids under a screen point, topmost first. `out_len` always gets
 * the hit count; pass `capacity = 0` to size the buffer.
 *
 * # Safety
 * `out_ids` must hold `capacity` values; other pointers must be valid.
 */
enum MdiStatus mdi_view_hit_test(const struct MdiView *view,
                                 double x,
                                 double y,
                                 uint64_t *out_ids,
                                 size_t capacity,
                                 size_t *out_len);

/**
 * Serializes the view as a wire `frame` message.
 *
 * # Safety
 * Pointers must be valid. Free the result with [`mdi_string_free`].
 */
enum MdiStatus mdi_view_frame_json(const struct MdiView *view, uint64_t seq, char **out_json);

/**
 * # Safety
 * `name` NUL-terminated; `out_hist` writable.
 */
enum MdiStatus mdi_histogram_new(const char *name,
                                 size_t n_bins,
                                 double lo,
                                 double hi,
                                 struct MdiHistogram **out_hist);

/**
 * # Safety
 * `hist` must come from [`mdi_histogram_new`] and not be used afterwards.
 */
void mdi_histogram_free(struct MdiHistogram *hist);

/**
 * # Safety
 * `hist` must be valid.
 */
enum MdiStatus mdi_histogram_fill(struct MdiHistogram *hist, double x);

/**
 * In-range bin counts.
 *
 * # Safety
 * `out_counts` must hold `capacity` values; other pointers must be valid.
 */
enum MdiStatus mdi_histogram_counts(const struct MdiHistogram *hist,
                                    uint64_t *out_counts,
                                    size_t capacity,
                                    size_t *out_len);

/**
 * Fits `k` Gaussians to the histogram with Poisson weights.
 *
 * # Safety
 * `guess` holds `3k` values; `out_params` holds `capacity` values.
 */
enum MdiStatus mdi_histogram_fit_gaussians(const struct MdiHistogram *hist,
                                           size_t k,
                                           const double *guess,
                                           size_t guess_len,
                                           double *out_params,
                                           size_t capacity,
                                           double *out_chi2,
                                           bool *out_converged);

/**
 * Weighted least-squares fit of `n` points. `weights` may be null for
 * unit weights.
 *
 * # Safety
 * Arrays must hold the stated number of values.
 */
enum MdiStatus mdi_fit_points(enum MdiModel model,
                              size_t order,
                              const double *xs,
                              const double *ys,
                              const double *weights,
                              size_t n,
                              const double *guess,
                              size_t guess_len,
                              double *out_params,
                              size_t capacity,
                              double *out_chi2,
                              bool *out_converged);

/**
 * Gas of `n_particles` in the corner octant with default dt and speed.
 *
 * # Safety
 * `out_gas` must be writable.
 */
enum MdiStatus mdi_gas_new(size_t n_particles, uint64_t seed, struct MdiGas **out_gas);

/**
 * # Safety
 * `gas` must come from [`mdi_gas_new`] and not be used afterwards.
 */
void mdi_gas_free(struct MdiGas *gas);

/**
 * # Safety
 * `gas` must be valid.
 */
enum MdiStatus mdi_gas_step(struct MdiGas *gas, uint64_t n);

/**
 * Simulated time `step_index · dt`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum MdiStatus mdi_gas_sim_time(const struct MdiGas *gas, double *out_t);

/**
 * Coarse-grained entropy over an `m³` grid; `m ≥ 2`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum MdiStatus mdi_gas_entropy(const struct MdiGas *gas, size_t m, double *out_s);

/**
 * # Safety
 * Pointers must be valid.
 */
enum MdiStatus mdi_gas_kinetic_energy(const struct MdiGas *gas, double *out_e);

/**
 * Positions as `x, y, z` triples; `out_len` gets `3 · n`.
 *
 * # Safety
 * `out_xyz` must hold `capacity` values; other pointers must be valid.
 */
enum MdiStatus mdi_gas_positions(const struct MdiGas *gas,
                                 double *out_xyz,
                                 size_t capacity,
                                 size_t *out_len);

struct MdiHeadlessConfig mdi_headless_config_default(void);

/**
 * Runs the kinetics demo headless. Writes the entropy CSV atomically to
 * `export_path` when it is non-null and returns it through `out_csv`
 * when that is non-null.
 *
 * # Safety
 * `config` must be valid; string arguments NUL-terminated.
 */
enum MdiStatus mdi_run_headless(const struct MdiHeadlessConfig *config,
                                const char *export_path,
                                char **out_csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDI_H */
