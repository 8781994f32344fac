#ifndef DPLAB_H
#define DPLAB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DplabStatus {
  DPLAB_STATUS_OK = 0,
  DPLAB_STATUS_NULL_POINTER = 1,
  DPLAB_STATUS_INVALID_ARGUMENT = 2,
  DPLAB_STATUS_QUORUM = 3,
  DPLAB_STATUS_SOLVER_FAILURE = 4,
  DPLAB_STATUS_CALIBRATION_FAILURE = 5,
  DPLAB_STATUS_INCONCLUSIVE = 6,
  DPLAB_STATUS_EVOLUTION_BLOWUP = 7,
  DPLAB_STATUS_INADMISSIBLE_DATUM = 8,
  DPLAB_STATUS_NO_TAME_CONTINUATION = 9,
  DPLAB_STATUS_PARSE = 10,
  DPLAB_STATUS_IO = 11,
  DPLAB_STATUS_PANIC = 12,
} DplabStatus;

typedef enum DplabVerdict {
  DPLAB_VERDICT_DECAYING = 0,
  DPLAB_VERDICT_PLATEAU = 1,
  DPLAB_VERDICT_INCONCLUSIVE = 2,
} DplabVerdict;

typedef enum DplabClassifierMode {
  DPLAB_CLASSIFIER_MODE_STRICT = 0,
  DPLAB_CLASSIFIER_MODE_AS_WRITTEN = 1,
} DplabClassifierMode;

/**
 * A validated protocol configuration.
 */
typedef struct DplabConfig DplabConfig;

/**
 * A finished stability report.
 */
typedef struct DplabReport DplabReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into the library from the same thread.
 */
const char *dplab_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void dplab_string_free(char *s);

/**
 * Parses and validates a TOML protocol configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string, `out` a valid pointer.
 */
enum DplabStatus dplab_config_from_toml(const char *toml, struct DplabConfig **out);

/**
 * # Safety
 * `cfg` must be NULL or a handle from this library, not yet freed.
 */
void dplab_config_free(struct DplabConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum DplabStatus dplab_config_set_seed(struct DplabConfig *cfg, uint64_t seed);

/**
 * SHA-256 of the canonical configuration, as lowercase hex.
 *
 * # Safety
 * `cfg` must be a live config handle, `out` a valid pointer.
 */
enum DplabStatus dplab_config_hash(const struct DplabConfig *cfg, char **out);

/**
 * Runs the configured protocol over its whole ensemble.
 *
 * # Safety
 * `cfg` must be a live config handle, `out` a valid pointer.
 */
enum DplabStatus dplab_run(const struct DplabConfig *cfg, struct DplabReport **out);

/**
 * # Safety
 * `report` must be NULL or a handle from this library, not yet freed.
 */
void dplab_report_free(struct DplabReport *report);

/**
 * # Safety
 * `report` must be a live report handle, `out` a valid pointer.
 */
enum DplabStatus dplab_report_json(const struct DplabReport *report, char **out);

/**
 * # Safety
 * `report` must be a live report handle, `out` a valid pointer.
 */
enum DplabStatus dplab_report_verdict(const struct DplabReport *report, enum DplabVerdict *out);

/**
 * Borrowed view of SSI(n); valid while the report lives.
 *
 * # Safety
 * `report` must be a live report handle, `data` and `len` valid pointers.
 */
enum DplabStatus dplab_report_ssi(const struct DplabReport *report,
                                  const double **data,
                                  size_t *len);

/**
 * Borrowed view of SC(n); valid while the report lives.
 *
 * # Safety
 * `report` must be a live report handle, `data` and `len` valid pointers.
 */
enum DplabStatus dplab_report_sc(const struct DplabReport *report,
                                 const double **data,
                                 size_t *len);

/**
 * # Safety
 * `report` must be a live report handle, `survivors` a valid pointer.
 */
enum DplabStatus dplab_report_survivors(const struct DplabReport *report, size_t *survivors);

/**
 * Writes report.json, ssi.csv, sc.csv and metadata.json into `dir`.
 *
 * # Safety
 * `report` must be a live report handle, `dir` a NUL-terminated path.
 */
enum DplabStatus dplab_report_write(const struct DplabReport *report, const char *dir);

/**
 * Pointclass of a quantifier prefix, e.g. `Pi^1_2` (ascii) or `Π¹₂`.
 *
 * # Safety
 * `prefix` must be a NUL-terminated string, `out` a valid pointer.
 */
enum DplabStatus dplab_classify(const char *prefix,
                                enum DplabClassifierMode mode,
                                bool ascii,
                                char **out);

/**
 * TV denoising of a row-major `rows x cols` image on the unit square at a
 * fixed `lambda`; writes the minimiser to `out` (same shape) and the final
 * optimality residual to `residual` (may be NULL).
 *
 * # Safety
 * `data` and `out` must hold `rows * cols` doubles.
 */
enum DplabStatus dplab_tv_denoise(const double *data,
                                  size_t rows,
                                  size_t cols,
                                  double lambda,
                                  double tol,
                                  double *out,
                                  double *residual);

/**
 * Capacity energies of the barrier `{data >= theta}` on the default ladder
 * (8, 32, 128 nodes per unit). `energies` must hold 3 doubles; `verdict`
 * receives 0 zero, 1 positive, 2 inconclusive.
 *
 * # Safety
 * `data` must hold `rows * cols` doubles, `energies` 3 doubles.
 */
enum DplabStatus dplab_capacity(const double *data,
                                size_t rows,
                                size_t cols,
                                double theta,
                                double *energies,
                                int32_t *verdict);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPLAB_H */
