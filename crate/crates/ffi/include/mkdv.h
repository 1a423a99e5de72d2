#ifndef MKDV_H
#define MKDV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum MkdvStatus {
  MKDV_STATUS_OK = 0,
  MKDV_STATUS_NULL_POINTER = 1,
  MKDV_STATUS_INVALID_ARGUMENT = 2,
  MKDV_STATUS_CAP_EXCEEDED = 3,
  MKDV_STATUS_INTEGRATION = 4,
  MKDV_STATUS_CONFIG = 5,
  MKDV_STATUS_IO = 6,
  MKDV_STATUS_PANIC = 7,
  MKDV_STATUS_OTHER = 8,
} MkdvStatus;

/**
 * Values accepted for `sign` arguments.
 */
typedef enum MkdvSign {
  MKDV_SIGN_DEFOCUSING = 0,
  MKDV_SIGN_FOCUSING = 1,
} MkdvSign;

/**
 * Values accepted for `equation` arguments.
 */
typedef enum MkdvEquation {
  MKDV_EQUATION_MKDV2 = 0,
  MKDV_EQUATION_MKDV = 1,
  MKDV_EQUATION_LINEAR = 2,
} MkdvEquation;

/**
 * Values accepted for `lemma` arguments.
 */
typedef enum MkdvLemma {
  MKDV_LEMMA_L53 = 0,
  MKDV_LEMMA_L55_14 = 1,
  MKDV_LEMMA_L55_25 = 2,
  MKDV_LEMMA_L58 = 3,
  MKDV_LEMMA_LLOG = 4,
} MkdvLemma;

/**
 * Opaque truncated field.
 */
typedef struct MkdvField MkdvField;

/**
 * Opaque flow parameters.
 */
typedef struct MkdvFlow MkdvFlow;

/**
 * Conserved and drifting quantities of a field.
 */
typedef struct MkdvEnergies {
  double e1;
  double e3;
  double mass;
  double momentum;
} MkdvEnergies;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty after a success).
 * The pointer stays valid until the next call on the same thread.
 */
const char *mkdv_last_error(void);

/**
 * Static description of a status code (`"unknown status"` for other values).
 */
const char *mkdv_status_name(int32_t status);

/**
 * Creates a field with band limit `n` from `2n + 1` coefficients.
 *
 * # Safety
 * `re` and `im` must point to `len` doubles; `out` must be writable.
 */
enum MkdvStatus mkdv_field_new(size_t n,
                               const double *re,
                               const double *im,
                               size_t len,
                               struct MkdvField **out);

/**
 * Draws sample `index` of the Gaussian ensemble with band limit `n`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MkdvStatus mkdv_field_sample(size_t n, uint64_t seed, size_t index, struct MkdvField **out);

/**
 * Releases a field. Null is ignored.
 *
 * # Safety
 * `field` must come from this library and not be used afterwards.
 */
void mkdv_field_free(struct MkdvField *field);

/**
 * Band limit `N` of a field, or 0 for null.
 *
 * # Safety
 * `field` must be null or valid.
 */
size_t mkdv_field_max_freq(const struct MkdvField *field);

/**
 * Copies the `2N + 1` coefficients into `re` and `im` (each of length `len`).
 *
 * # Safety
 * `field` must be valid; `re` and `im` must hold `len` doubles.
 */
enum MkdvStatus mkdv_field_coeffs(const struct MkdvField *field,
                                  double *re,
                                  double *im,
                                  size_t len);

/**
 * Evaluates `E_1`, `E_3` (for `sign`), mass and momentum.
 *
 * # Safety
 * `field` must be valid and `out` writable.
 */
enum MkdvStatus mkdv_field_energies(const struct MkdvField *field,
                                    int32_t sign,
                                    struct MkdvEnergies *out);

/**
 * Time derivative of `E_3(Pi_N u)` along the truncated flow at truncation `n`.
 *
 * # Safety
 * `field` must be valid and `out` writable.
 */
enum MkdvStatus mkdv_e3_drift(const struct MkdvField *field, size_t n, double *out);

/**
 * Creates flow parameters for truncation `n`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MkdvStatus mkdv_flow_new(size_t n,
                              int32_t sign,
                              int32_t equation,
                              double dt,
                              double tol,
                              struct MkdvFlow **out);

/**
 * Releases flow parameters. Null is ignored.
 *
 * # Safety
 * `flow` must come from this library and not be used afterwards.
 */
void mkdv_flow_free(struct MkdvFlow *flow);

/**
 * Evolves `field` to time `t` (negative allowed) and returns a new field.
 *
 * # Safety
 * `flow` and `field` must be valid; `out` writable.
 */
enum MkdvStatus mkdv_evolve(const struct MkdvFlow *flow,
                            const struct MkdvField *field,
                            double t,
                            struct MkdvField **out);

/**
 * Closed-form lemma sum at truncation `n`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MkdvStatus mkdv_lemma_sum(int32_t lemma, size_t n, double *out);

/**
 * Runs an experiment from JSON text, writing outputs under `out_root`
 * (null: the config's `output_dir`, then `$MKDV_LAB_OUT`, then `./runs`).
 * `passed` receives 1 when every check passed, else 0.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out_root` null or
 * NUL-terminated; `passed` writable.
 */
enum MkdvStatus mkdv_run_json(const char *config_json, const char *out_root, int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MKDV_H */
