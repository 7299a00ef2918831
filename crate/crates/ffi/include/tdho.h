#ifndef TDHO_H
#define TDHO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes shared with the CLI exit codes.
 */
typedef enum TdhoStatus {
  TdhoStatus_Ok = 0,
  /**
   * Invalid input: null pointer, malformed JSON, out-of-domain request.
   */
  TdhoStatus_Usage = 2,
  /**
   * A numerical routine failed to converge.
   */
  TdhoStatus_Numeric = 3,
  /**
   * Evaluation at a singular (caustic) configuration.
   */
  TdhoStatus_Singular = 4,
  /**
   * A self-check invariant failed beyond tolerance.
   */
  TdhoStatus_Invariant = 5,
} TdhoStatus;

/**
 * Opaque frequency-profile handle.
 */
typedef struct TdhoProfile TdhoProfile;

/**
 * Fundamental solution pair on `[t0, t]` together with its derivatives.
 */
typedef struct TdhoPair {
  double t0;
  double t;
  double c;
  double s;
  double c_dot;
  double s_dot;
} TdhoPair;

/**
 * A complex number in Cartesian form.
 */
typedef struct TdhoComplex {
  double re;
  double im;
} TdhoComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the most recent error on this thread into `buf`
 * (NUL-terminated, truncated to `len` bytes) and returns the full length
 * of the message, excluding the terminator.  `buf` may be null to query
 * the length only.
 */
uintptr_t tdho_last_error(char *buf, uintptr_t len);

/**
 * Builds a profile from its JSON description, e.g.
 * `{"kind": "mathieu", "a": 2.0, "b": 0.3}`.  On success `*out` owns the
 * new handle.
 */
enum TdhoStatus tdho_profile_from_json(const char *json, struct TdhoProfile **out);

/**
 * Releases a profile handle.  Passing null is a no-op.
 */
void tdho_profile_free(struct TdhoProfile *profile);

/**
 * Integrates the fundamental pair `(c, s)` from `t0` to `t`.
 */
enum TdhoStatus tdho_solve_fundamental(const struct TdhoProfile *profile,
                                       double t0,
                                       double t,
                                       double tol,
                                       struct TdhoPair *out);

/**
 * Number of zeros of `s` on `(t0, t]` (the branch index of the kernel).
 */
enum TdhoStatus tdho_branch_index(const struct TdhoProfile *profile,
                                  double t0,
                                  double t,
                                  int64_t *out);

/**
 * Bogoliubov coefficients of the evolution relative to the frequency
 * `omega` reference oscillator; `|a|^2 - |b|^2 = 1`.
 */
enum TdhoStatus tdho_bogoliubov(const struct TdhoProfile *profile,
                                double t0,
                                double t,
                                double omega,
                                struct TdhoComplex *out_a,
                                struct TdhoComplex *out_b);

/**
 * Pointwise propagator `K(q, t; q0, t0)`.  Returns `Singular` at a
 * caustic, where the kernel is a delta distribution.
 */
enum TdhoStatus tdho_kernel(const struct TdhoProfile *profile,
                            double t0,
                            double t,
                            double q,
                            double q0,
                            struct TdhoComplex *out);

/**
 * Transition amplitude between eigenstates `n1` (frequency `omega1`, at
 * `t0`) and `n2` (frequency `omega2`, at `t`).
 */
enum TdhoStatus tdho_transition_amplitude(const struct TdhoProfile *profile,
                                          double t0,
                                          double t,
                                          double omega1,
                                          uintptr_t n1,
                                          double omega2,
                                          uintptr_t n2,
                                          struct TdhoComplex *out);

/**
 * Vacuum persistence amplitude `<0, t | 0, t0>` for the frequency
 * `omega` reference vacuum.
 */
enum TdhoStatus tdho_vacuum_persistence(const struct TdhoProfile *profile,
                                        double t0,
                                        double t,
                                        double omega,
                                        struct TdhoComplex *out);

/**
 * Runs a JSON scenario (same schema as the CLI) and returns the run
 * manifest as a JSON string in `*out_manifest`.  Free the string with
 * `tdho_string_free`.
 */
enum TdhoStatus tdho_run_scenario(const char *json, double tol, char **out_manifest);

/**
 * Releases a string returned by this library.  Passing null is a no-op.
 */
void tdho_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDHO_H */
