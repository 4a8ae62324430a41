#ifndef PSTNET_H
#define PSTNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PstStatus {
  PST_STATUS_OK = 0,
  PST_STATUS_NULL_ARGUMENT = 1,
  PST_STATUS_INVALID_ARGUMENT = 2,
  PST_STATUS_IO = 3,
  PST_STATUS_CORRUPT = 4,
  PST_STATUS_DOMAIN = 5,
  PST_STATUS_INGEST = 6,
  PST_STATUS_BUFFER_TOO_SMALL = 7,
  PST_STATUS_PANIC = 8,
  PST_STATUS_UNSUPPORTED = 9,
} PstStatus;

/**
 * Surface-weather client with its cache.
 */
typedef struct PstClient PstClient;

/**
 * Trained estimator.
 */
typedef struct PstModel PstModel;

/**
 * Column state at one altitude. Mirrors the model's seven inputs.
 */
typedef struct PstState {
  double altitude_m;
  double temperature_k;
  double pressure_pa;
  double wind10_mps;
  double lapse_k_per_m;
  double density_ratio;
  double latitude_deg;
} PstState;

/**
 * Estimate with gate diagnostics. `regime` indexes convective, neutral,
 * stable, stratospheric.
 */
typedef struct PstEstimate {
  double k;
  double k_mo;
  double alpha[4];
  uint32_t regime;
} PstEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pst_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `cap`). Returns the full message length
 * without the NUL, or 0 when there is none.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes.
 */
size_t pst_last_error(char *buf, size_t cap);

/**
 * Reads a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PstStatus pst_model_load(const char *path, struct PstModel **out);

/**
 * Decodes a model from its serialized bytes.
 *
 * # Safety
 * `bytes` must be valid for `len` bytes; `out` must be writable.
 */
enum PstStatus pst_model_from_bytes(const uint8_t *bytes, size_t len, struct PstModel **out);

/**
 * Untrained model with the reference architecture and seeded weights.
 *
 * # Safety
 * `out` must be writable.
 */
enum PstStatus pst_model_init(uint64_t seed, struct PstModel **out);

/**
 * # Safety
 * `model` must be null or come from a `pst_model_*` constructor and not be
 * used afterwards.
 */
void pst_model_free(struct PstModel *model);

/**
 * Serializes the model. With `buf` null or `cap` too small, stores the
 * required size in `len` and returns `BufferTooSmall`.
 *
 * # Safety
 * `model` must be a live handle; `buf` valid for `cap` bytes or null;
 * `len` writable.
 */
enum PstStatus pst_model_to_bytes(const struct PstModel *model,
                                  uint8_t *buf,
                                  size_t cap,
                                  size_t *len);

/**
 * CRC32 of the serialized parameters.
 *
 * # Safety
 * `model` must be a live handle; `out` writable.
 */
enum PstStatus pst_model_checksum(const struct PstModel *model, uint32_t *out);

/**
 * Learnable parameter count.
 *
 * # Safety
 * `model` must be a live handle; `out` writable.
 */
enum PstStatus pst_model_param_count(const struct PstModel *model, size_t *out);

/**
 * Validated estimate with gate diagnostics.
 *
 * # Safety
 * `model` must be a live handle; `state` readable; `out` writable.
 */
enum PstStatus pst_model_estimate(const struct PstModel *model,
                                  const struct PstState *state,
                                  struct PstEstimate *out);

/**
 * TKE for `n` states into `out`. Every state is validated first; nothing
 * is written on failure.
 *
 * # Safety
 * `states` readable and `out` writable for `n` elements.
 */
enum PstStatus pst_model_predict_batch(const struct PstModel *model,
                                       const struct PstState *states,
                                       size_t n,
                                       double *out);

/**
 * Regime name for an index from `PstEstimate::regime`, or null.
 */
const char *pst_regime_name(uint32_t index);

/**
 * Weather client. `offline` non-zero serves fixtures only; `cache_dir`
 * may be null for an in-memory cache.
 *
 * # Safety
 * `cache_dir` null or NUL-terminated; `out` writable.
 */
enum PstStatus pst_client_new(int32_t offline, const char *cache_dir, struct PstClient **out);

/**
 * # Safety
 * `client` must be null or come from `pst_client_new` and not be used
 * afterwards.
 */
void pst_client_free(struct PstClient *client);

/**
 * Column state at `altitude_m` above the point, anchored on the latest
 * surface observation.
 *
 * # Safety
 * `client` must be a live handle; `out` writable.
 */
enum PstStatus pst_client_state(const struct PstClient *client,
                                double lat,
                                double lon,
                                double altitude_m,
                                struct PstState *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSTNET_H */
