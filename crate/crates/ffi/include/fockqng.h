#ifndef FOCKQNG_H
#define FOCKQNG_H

/* Generated by cbindgen from the fockqng-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an FFI call; anything but `Ok` leaves the outputs untouched.
 */
typedef enum FqStatus {
  /**
   * Success.
   */
  FQ_STATUS_OK = 0,
  /**
   * A null pointer or zero-length buffer was passed.
   */
  FQ_STATUS_NULL_ARGUMENT = 1,
  /**
   * Input violates a physical or domain constraint.
   */
  FQ_STATUS_DOMAIN = 2,
  /**
   * A string or file payload could not be parsed.
   */
  FQ_STATUS_PARSE = 3,
  /**
   * An iterative routine failed to converge.
   */
  FQ_STATUS_NUMERIC = 4,
  /**
   * The callee panicked; state is unchanged but the call did nothing.
   */
  FQ_STATUS_PANIC = 5,
} FqStatus;

/**
 * Opaque non-Gaussianity threshold curve for one Fock index.
 */
typedef struct FqCurve FqCurve;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null when
 * no call has failed yet. The pointer stays valid until the next failing
 * call on the same thread; do not free it.
 */
const char *fq_last_error(void);

/**
 * Library version as a static string; do not free.
 */
const char *fq_version(void);

/**
 * Frees a string returned by this library. Null is a no-op.
 */
void fq_string_free(char *s);

/**
 * Computes the threshold curve for target `n` by multi-start optimization
 * over core states. `a_grid` lists the witness slopes to sample (ascending,
 * starting at 0). Pass `restarts = 0` or `dim = 0` to use the defaults.
 * On success `*out` owns the curve; release it with `fq_curve_free`.
 *
 * # Safety
 * `a_grid` must point to `a_len` readable doubles and `out` must be a valid
 * destination for one pointer.
 */
enum FqStatus fq_curve_compute(uintptr_t n,
                               uintptr_t dim,
                               uintptr_t restarts,
                               uint64_t seed,
                               const double *a_grid,
                               uintptr_t a_len,
                               struct FqCurve **out);

/**
 * Deserializes a curve previously produced by `fq_curve_to_json`.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid
 * destination for one pointer.
 */
enum FqStatus fq_curve_from_json(const char *json, struct FqCurve **out);

/**
 * Serializes the curve; free the result with `fq_string_free`.
 *
 * # Safety
 * `curve` must be a live handle from this library and `out` a valid
 * destination for one pointer.
 */
enum FqStatus fq_curve_to_json(const struct FqCurve *curve, char **out);

/**
 * Releases a curve handle. Null is a no-op.
 *
 * # Safety
 * `curve` must be null or a handle not freed before.
 */
void fq_curve_free(struct FqCurve *curve);

/**
 * Point threshold of the curve: the largest admissible P_n.
 *
 * # Safety
 * `curve` must be a live handle and `out` a valid destination.
 */
enum FqStatus fq_curve_pbar(const struct FqCurve *curve, double *out);

/**
 * Tests a measured distribution against the curve. `violated` is 1 when
 * the witness fires, 0 otherwise; `margin` is the excess over the boundary
 * in probability units (negative when compatible with core states).
 *
 * # Safety
 * `probs` must point to `len` readable doubles; outputs must be valid.
 */
enum FqStatus fq_qng_witness(const struct FqCurve *curve,
                             const double *probs,
                             uintptr_t len,
                             uintptr_t n,
                             int32_t *violated,
                             double *margin);

/**
 * Loss depth of a distribution: the tolerable attenuation in dB before the
 * witness stops firing, and the matching minimal transmittance. A state
 * that never violates reports 0 dB and transmittance 1.
 *
 * # Safety
 * `probs` must point to `len` readable doubles; outputs must be valid.
 */
enum FqStatus fq_qng_depth(const struct FqCurve *curve,
                           const double *probs,
                           uintptr_t len,
                           uintptr_t n,
                           double *depth_db,
                           double *eta_min);

/**
 * Quantum Fisher information of the Fock state |n> for displacement
 * sensing: 4(2n + 1).
 */
double fq_qfi_fock(uintptr_t n);

/**
 * Transition probability |<m|D(alpha)|n>|^2 of the displacement operator.
 *
 * # Safety
 * `out` must be a valid destination for one double.
 */
enum FqStatus fq_displacement_overlap(uintptr_t m,
                                      uintptr_t n,
                                      double alpha_re,
                                      double alpha_im,
                                      double *out);

/**
 * Classical Fisher information for displacement amplitude, maximized over
 * the supplied ascending positive amplitude grid.
 *
 * # Safety
 * `probs` and `alpha_grid` must point to `len` and `grid_len` readable
 * doubles; outputs must be valid.
 */
enum FqStatus fq_fisher_profile(const double *probs,
                                uintptr_t len,
                                const double *alpha_grid,
                                uintptr_t grid_len,
                                double *fi_max,
                                double *d0);

/**
 * Cramér–Rao force-sensitivity bound in N/sqrt(Hz) for an oscillator probe
 * of mass `mass` (kg) and angular frequency `omega` (rad/s), probed
 * coherently for `t_probe` out of every `t_probe + t_dead` seconds and
 * averaged over `total_time`, with probe quantum Fisher information `fq`.
 *
 * # Safety
 * `out` must be a valid destination for one double.
 */
enum FqStatus fq_force_sensitivity(double mass,
                                   double omega,
                                   double t_probe,
                                   double t_dead,
                                   double total_time,
                                   double fq,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOCKQNG_H */
