#ifndef GJM_H
#define GJM_H

/* Generated by cbindgen from gjm-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every API call.
typedef enum GjmStatus {
  GJM_STATUS_OK = 0,
  // A required pointer argument was null.
  GJM_STATUS_NULL_ARGUMENT = 1,
  // Arguments outside the documented domain.
  GJM_STATUS_INVALID_ARGUMENT = 2,
  // Malformed JSON or schema violation.
  GJM_STATUS_PARSE_ERROR = 3,
  // The feasibility solver could not be driven to full accuracy.
  GJM_STATUS_SOLVER_DIAGNOSTIC = 4,
  // Unexpected internal failure (a bug; see the error message).
  GJM_STATUS_INTERNAL_ERROR = 5,
} GjmStatus;

// Guessable-outcome family, mirroring the library cases a-d.
typedef enum GjmCase {
  GJM_CASE_FULL = 0,
  GJM_CASE_PARTIAL_INPUT = 1,
  GJM_CASE_PARTIAL_OUTCOME = 2,
  GJM_CASE_PARTIAL_INPUT_OUTCOME = 3,
} GjmCase;

// Variant of the qubit partial input & outcome bound.
typedef enum GjmCaseDVariant {
  GJM_CASE_D_VARIANT_N2 = 0,
  GJM_CASE_D_VARIANT_GENERAL = 1,
} GjmCaseDVariant;

// Named adversarial strategy constructions.
typedef enum GjmStrategyKind {
  GJM_STRATEGY_KIND_FULL_JM = 0,
  GJM_STRATEGY_KIND_PARTIAL_INPUT = 1,
  GJM_STRATEGY_KIND_PARTIAL_OUTCOME = 2,
  GJM_STRATEGY_KIND_CASE_D_GENERIC = 3,
  GJM_STRATEGY_KIND_QUBIT_C = 4,
  GJM_STRATEGY_KIND_QUBIT_D = 5,
} GjmStrategyKind;

// Opaque measurement assembly handle.
typedef struct GjmAssembly GjmAssembly;

// Result of a threshold bisection.
typedef struct GjmThreshold {
  double eta_star;
  double eta_lo;
  double eta_hi;
  double tol;
  uint64_t evaluations;
  bool always_gjm;
} GjmThreshold;

// Entropy report of the post-selection counterexample (per round, bits).
typedef struct GjmEntropy {
  double h_a_given_e;
  double h_a_given_eprime;
  double i_ab_minus_ae;
  double i_ba_minus_be;
} GjmEntropy;

// Residuals of a strategy verification.
typedef struct GjmVerification {
  double consistency_residual;
  double nosignaling_residual;
  double partial_jm_residual;
  double guess_failure_prob;
  double completeness_residual;
  double min_psd_margin;
  bool pass;
} GjmVerification;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; never freed.
const char *gjm_version(void);

// Message of the most recent failure on this thread. The pointer stays
// valid until the next library call on the same thread; do not free it.
const char *gjm_last_error_message(void);

// Frees a string returned through an out-pointer.
//
// # Safety
// `s` must be a pointer previously returned by this library and not yet
// freed; null is ignored.
void gjm_string_free(char *s);

// Builds a projective qubit assembly from x-z plane angles
// (`r_y = (sin a, 0, cos a)`).
//
// # Safety
// `angles` must point to `n_angles` doubles; `out` must be a valid
// pointer.
enum GjmStatus gjm_assembly_qubit_angles(const double *angles,
                                         size_t n_angles,
                                         struct GjmAssembly **out);

// Parses an assembly from its JSON document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid.
enum GjmStatus gjm_assembly_from_json(const char *json, struct GjmAssembly **out);

// Serializes an assembly to JSON; free the result with
// [`gjm_string_free`].
//
// # Safety
// `assembly` must be a live handle; `out` must be valid.
enum GjmStatus gjm_assembly_to_json(const struct GjmAssembly *assembly, char **out);

// Hilbert-space dimension of the assembly.
//
// # Safety
// `assembly` must be a live handle; `out` must be valid.
enum GjmStatus gjm_assembly_dim(const struct GjmAssembly *assembly, size_t *out);

// Number of measurement settings.
//
// # Safety
// `assembly` must be a live handle; `out` must be valid.
enum GjmStatus gjm_assembly_settings(const struct GjmAssembly *assembly, size_t *out);

// Releases an assembly handle; null is ignored.
//
// # Safety
// `assembly` must come from this library and not be freed twice.
void gjm_assembly_free(struct GjmAssembly *assembly);

// Generic (measurement-independent) efficiency bound of a case.
//
// # Safety
// `out` must be valid.
enum GjmStatus gjm_generic_bound(enum GjmCase case_, size_t n, size_t k, double *out);

// Qubit partial-outcome bound `1/(1 + sin(θ/2))`.
//
// # Safety
// `out` must be valid.
enum GjmStatus gjm_qubit_bound_case_c(double theta, double *out);

// Qubit partial input & outcome bound for the given variant.
//
// # Safety
// `out` must be valid.
enum GjmStatus gjm_qubit_bound_case_d(double theta, enum GjmCaseDVariant variant, double *out);

// Smallest double-cone aperture containing the given measurement axes.
// `directions` holds `3 * n_directions` doubles (x, y, z triples);
// `out_axis`, when non-null, receives the optimal axis.
//
// # Safety
// `directions` must point to `3 * n_directions` doubles; `out_theta` must
// be valid; `out_axis` is optional but must point to 3 doubles when
// non-null.
enum GjmStatus gjm_double_cone_angle(const double *directions,
                                     size_t n_directions,
                                     double *out_theta,
                                     double *out_axis);

// Feasibility of the lossy assembly (ideal effects transformed at `eta`
// and visibility `nu_vis`) under the guessable subsets of `case`. Writes
// the max-slack value and whether the program is compatible (marginal
// counts as compatible).
//
// # Safety
// `assembly` must be a live handle; out-pointers must be valid.
enum GjmStatus gjm_feasible(const struct GjmAssembly *assembly,
                            enum GjmCase case_,
                            double eta,
                            double nu_vis,
                            double tol,
                            double *out_slack,
                            bool *out_feasible);

// Critical detection efficiency by bisection; `tol <= 0` selects the
// default bracket width 1e-4.
//
// # Safety
// `assembly` must be a live handle; `out` must be valid.
enum GjmStatus gjm_threshold(const struct GjmAssembly *assembly,
                             enum GjmCase case_,
                             double nu_vis,
                             double tol,
                             struct GjmThreshold *out);

// Entropy report of the post-selection counterexample, per round in bits.
//
// # Safety
// `out` must be valid.
enum GjmStatus gjm_entropy(uint32_t d, double eta, struct GjmEntropy *out);

// Builds a named strategy on a standard assembly family and verifies it.
// Generic kinds use `k` conclusive outcomes and `n` settings of the
// planar symmetric family; qubit kinds use the pair `{Z, cosθZ+sinθX}`.
// A negative `eta` selects the strategy's own bound. `tol <= 0` selects
// 1e-9.
//
// # Safety
// `out` must be valid.
enum GjmStatus gjm_verify_named_strategy(enum GjmStrategyKind kind,
                                         size_t k,
                                         size_t n,
                                         double theta,
                                         double eta,
                                         enum GjmCaseDVariant variant,
                                         double tol,
                                         struct GjmVerification *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GJM_H */
