#ifndef ESR_H
#define ESR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum EsrStatus {
  ESR_STATUS_OK = 0,
  ESR_STATUS_NULL_POINTER = 1,
  ESR_STATUS_INVALID_UTF8 = 2,
  ESR_STATUS_INVALID_ARGUMENT = 3,
  ESR_STATUS_DIMENSION_MISMATCH = 4,
  ESR_STATUS_MISSING_DETECTION_ENTRY = 5,
  ESR_STATUS_UNDEFINED_PROBABILITY = 6,
  ESR_STATUS_NUMERICAL_INTEGRITY = 7,
  ESR_STATUS_WRONG_STATE_KIND = 8,
  ESR_STATUS_INTERNAL = 9,
} EsrStatus;

/**
 * Detection model handle.
 */
typedef struct EsrDetection EsrDetection;

/**
 * Generalized observable handle.
 */
typedef struct EsrObservable EsrObservable;

/**
 * Pure state, proper mixture or improper mixture.
 */
typedef struct EsrState EsrState;

/**
 * Analytic (and optionally sampled) probabilities for one sweep point.
 * The Monte Carlo fields are NaN when no sampling was done.
 */
typedef struct EsrResultRow {
  double sweep_value;
  double p_conditional;
  double p_overall;
  double p_quantum;
  double p_detect;
  double mc_frequency;
  double mc_halfwidth;
} EsrResultRow;

typedef struct EsrEnsembleSummary {
  uint64_t n_total;
  uint64_t n_detected;
  uint64_t n_yes;
  double yes_frequency;
  double confidence_halfwidth;
} EsrEnsembleSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *esr_last_error_message(void);

/**
 * Static description of a status code.
 */
const char *esr_status_name(enum EsrStatus status);

/**
 * Spin-1/2 observable along (theta, phi).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EsrStatus esr_observable_spin(const char *name,
                                   double theta,
                                   double phi,
                                   struct EsrObservable **out);

/**
 * Observable from a row-major `dim x dim` Hermitian matrix. `im` may be
 * null for a real matrix.
 *
 * # Safety
 * `re` (and `im` when non-null) must point to `dim * dim` doubles.
 */
enum EsrStatus esr_observable_from_matrix(const char *name,
                                          const double *re,
                                          const double *im,
                                          size_t dim,
                                          struct EsrObservable **out);

/**
 * Number of distinct eigenvalues.
 *
 * # Safety
 * `observable` must be a live handle or null.
 */
size_t esr_observable_spectrum_len(const struct EsrObservable *observable);

/**
 * Copies the ascending eigenvalues into `buf` (up to `capacity`).
 *
 * # Safety
 * `buf` must have room for `capacity` doubles.
 */
enum EsrStatus esr_observable_eigenvalues(const struct EsrObservable *observable,
                                          double *buf,
                                          size_t capacity);

/**
 * # Safety
 * `observable` must come from this library and not be freed twice.
 */
void esr_observable_free(struct EsrObservable *observable);

/**
 * Pure state from normalized amplitudes; `label` keys detection tables
 * and may be null.
 *
 * # Safety
 * `re` (and `im` when non-null) must point to `dim` doubles.
 */
enum EsrStatus esr_state_pure(const double *re,
                              const double *im,
                              size_t dim,
                              const char *label,
                              struct EsrState **out);

/**
 * Proper mixture of `n` pure-state handles. `devices` may be null, in
 * which case each component's device id is its state label. The component
 * states are copied; the caller keeps ownership of the handles.
 *
 * # Safety
 * `components` and `weights` must hold `n` entries; `devices` is null or
 * holds `n` strings (individual entries may be null).
 */
enum EsrStatus esr_state_proper(const struct EsrState *const *components,
                                const double *weights,
                                const char *const *devices,
                                size_t n,
                                struct EsrState **out);

/**
 * Improper mixture: reduced state of the first factor of a composite pure
 * state on a `dim_first * dim_second` space. Its detection key is "N".
 *
 * # Safety
 * `re` (and `im` when non-null) must point to `dim_first * dim_second` doubles.
 */
enum EsrStatus esr_state_improper_from_composite(const double *re,
                                                 const double *im,
                                                 size_t dim_first,
                                                 size_t dim_second,
                                                 struct EsrState **out);

/**
 * # Safety
 * `state` must be a live handle or null.
 */
size_t esr_state_dim(const struct EsrState *state);

/**
 * Copies the row-major quantum density matrix into `re`/`im`.
 *
 * # Safety
 * Both buffers must have room for `capacity` doubles.
 */
enum EsrStatus esr_state_density(const struct EsrState *state,
                                 double *re,
                                 double *im,
                                 size_t capacity);

/**
 * # Safety
 * `state` must come from this library and not be freed twice.
 */
void esr_state_free(struct EsrState *state);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum EsrStatus esr_detection_ideal(struct EsrDetection **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum EsrStatus esr_detection_constant(double probability, struct EsrDetection **out);

/**
 * Empty per-eigenvalue table. A NaN `default_probability` means no default.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EsrStatus esr_detection_table(double default_probability, struct EsrDetection **out);

/**
 * Adds or replaces a table entry. A null `key` applies to every state
 * without a more specific entry.
 *
 * # Safety
 * `detection` must be a live table handle; strings must be NUL-terminated.
 */
enum EsrStatus esr_detection_table_set(struct EsrDetection *detection,
                                       const char *key,
                                       const char *observable,
                                       double eigenvalue,
                                       double probability);

/**
 * # Safety
 * `detection` must come from this library and not be freed twice.
 */
void esr_detection_free(struct EsrDetection *detection);

/**
 * Probability of the property given that the detector registered.
 *
 * # Safety
 * Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
 */
enum EsrStatus esr_conditional_prob(const struct EsrState *state,
                                    const struct EsrObservable *observable,
                                    const double *eigenvalues,
                                    size_t n_eigenvalues,
                                    bool include_no_registration,
                                    const struct EsrDetection *detection,
                                    double *out);

/**
 * Unconditional probability of the property.
 *
 * # Safety
 * Same as [`esr_conditional_prob`].
 */
enum EsrStatus esr_overall_prob(const struct EsrState *state,
                                const struct EsrObservable *observable,
                                const double *eigenvalues,
                                size_t n_eigenvalues,
                                bool include_no_registration,
                                const struct EsrDetection *detection,
                                double *out);

/**
 * Standard quantum prediction, ignoring detection.
 *
 * # Safety
 * Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
 */
enum EsrStatus esr_quantum_prob(const struct EsrState *state,
                                const struct EsrObservable *observable,
                                const double *eigenvalues,
                                size_t n_eigenvalues,
                                double *out);

/**
 * Detection probability of the property.
 *
 * # Safety
 * Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
 */
enum EsrStatus esr_detect_prob(const struct EsrState *state,
                               const struct EsrObservable *observable,
                               const double *eigenvalues,
                               size_t n_eigenvalues,
                               const struct EsrDetection *detection,
                               double *out);

/**
 * Overall probability computed on the composite space with the effect
 * lifted to `T(X) (x) I`. Only valid for improper states that remember
 * their composite origin.
 *
 * # Safety
 * Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
 */
enum EsrStatus esr_composite_overall_prob(const struct EsrState *state,
                                          const struct EsrObservable *observable,
                                          const double *eigenvalues,
                                          size_t n_eigenvalues,
                                          const struct EsrDetection *detection,
                                          double *out);

/**
 * Spin-1/2 mixture `p_plus |+z><+z| + (1 - p_plus) |-z><-z|` with
 * per-component detection, measured for spin up at polar angle `theta`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EsrStatus esr_spin_scenario(double p_plus,
                                 double d_plus,
                                 double d_minus,
                                 double theta,
                                 struct EsrResultRow *out);

/**
 * Samples `n` preparations and measurements. Deterministic in `seed`.
 *
 * # Safety
 * Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
 */
enum EsrStatus esr_run_ensemble(const struct EsrState *state,
                                const struct EsrObservable *observable,
                                const double *eigenvalues,
                                size_t n_eigenvalues,
                                const struct EsrDetection *detection,
                                uint64_t n,
                                uint64_t seed,
                                double z,
                                struct EsrEnsembleSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ESR_H */
