#ifndef QND_MITE_H
#define QND_MITE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum QmStatus {
  QM_STATUS_OK = 0,
  QM_STATUS_NULL_POINTER = 1,
  QM_STATUS_INVALID_ARGUMENT = 2,
  QM_STATUS_DIMENSION_MISMATCH = 3,
  QM_STATUS_PARSE = 4,
  QM_STATUS_UNSUPPORTED = 5,
  QM_STATUS_NUMERICAL = 6,
  QM_STATUS_IO = 7,
  QM_STATUS_BUFFER_TOO_SMALL = 8,
  QM_STATUS_NOT_FOUND = 9,
  QM_STATUS_PANIC = 10,
} QmStatus;

// A diagonalized protocol plan with its trackers.
typedef struct QmPlan QmPlan;

// The records of one protocol trajectory.
typedef struct QmRun QmRun;

// A normalized state vector.
typedef struct QmState QmState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *qm_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *qm_version(void);

// Exact C-function value.
//
// # Safety
// `out` must be a valid pointer to a writable `double`.
enum QmStatus qm_c_exact(double alpha, uint32_t n_c, uint32_t n_d, double chi, double *out);

// Stirling (triangular-wave) Gaussian approximation.
//
// # Safety
// `out` must be a valid pointer to a writable `double`.
enum QmStatus qm_c_approx1(double alpha, uint32_t n_c, uint32_t n_d, double chi, double *out);

// `cos 2χ` Gaussian approximation.
//
// # Safety
// `out` must be a valid pointer to a writable `double`.
enum QmStatus qm_c_approx2(double alpha, uint32_t n_c, uint32_t n_d, double chi, double *out);

// Gaussian width `1/sqrt((1 + f) n)` of an outcome; fails for (0, 0).
//
// # Safety
// `out` must be a valid pointer to a writable `double`.
enum QmStatus qm_gaussian_width(uint32_t n_c, uint32_t n_d, double *out);

// Energy estimate from cumulative counts. `*defined` is false (and `*out`
// untouched) when both counts are zero.
//
// # Safety
// `out` and `defined` must be valid writable pointers.
enum QmStatus qm_estimate_energy(uint64_t m_c,
                                 uint64_t m_d,
                                 double tau,
                                 double *out,
                                 bool *defined);

// Haar-random state drawn from the stream seeded with `seed`.
//
// # Safety
// `out` must be a valid pointer; on success it receives a handle to free
// with [`qm_state_free`].
enum QmStatus qm_state_random(size_t num_qubits, uint64_t seed, struct QmState **out);

// The four-qubit cluster state.
//
// # Safety
// `out` must be a valid pointer.
enum QmStatus qm_state_cluster_c4(struct QmState **out);

// State from `2^num_qubits` amplitudes split into real and imaginary
// arrays; normalized on construction. `im` may be NULL for real input.
//
// # Safety
// `re` (and `im` when non-NULL) must point to `len` readable doubles.
enum QmStatus qm_state_from_amplitudes(size_t num_qubits,
                                       const double *re,
                                       const double *im,
                                       size_t len,
                                       struct QmState **out);

// Number of qubits, or 0 for a NULL handle.
//
// # Safety
// `state` must be NULL or a live handle.
size_t qm_state_num_qubits(const struct QmState *state);

// Copies the amplitudes into caller buffers of length `len`, which must be
// at least `2^num_qubits`.
//
// # Safety
// `re` and `im` must point to `len` writable doubles.
enum QmStatus qm_state_amplitudes(const struct QmState *state, double *re, double *im, size_t len);

// `|<a|b>|²`.
//
// # Safety
// `a` and `b` must be live handles and `out` a writable pointer.
enum QmStatus qm_state_fidelity(const struct QmState *a, const struct QmState *b, double *out);

// # Safety
// `state` must be NULL or a handle not yet freed.
void qm_state_free(struct QmState *state);

// The four-stage cluster plan with default parameters.
//
// # Safety
// `out` must be a valid pointer.
enum QmStatus qm_plan_cluster_c4(struct QmPlan **out);

// Plan described by a TOML run configuration (same format as the CLI).
//
// # Safety
// `toml` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
enum QmStatus qm_plan_from_toml(const char *toml, struct QmPlan **out);

// Number of stages, or 0 for a NULL handle.
//
// # Safety
// `plan` must be NULL or a live handle.
size_t qm_plan_num_stages(const struct QmPlan *plan);

// # Safety
// `plan` must be NULL or a handle not yet freed.
void qm_plan_free(struct QmPlan *plan);

// Runs every stage of `plan`. A NULL `initial` draws a Haar-random start
// from the same stream, matching trajectory 0 of the CLI for `seed`.
//
// # Safety
// `plan` must be a live handle, `initial` NULL or a live handle, `out` a
// valid pointer.
enum QmStatus qm_run_protocol(const struct QmPlan *plan,
                              const struct QmState *initial,
                              uint64_t seed,
                              struct QmRun **out);

// Final value of the named tracker (for example `"F_C"`).
//
// # Safety
// `run` must be a live handle, `name` a NUL-terminated string, `out` writable.
enum QmStatus qm_run_final_fidelity(const struct QmRun *run, const char *name, double *out);

// Total rounds over all stages, or 0 for a NULL handle.
//
// # Safety
// `run` must be NULL or a live handle.
size_t qm_run_total_rounds(const struct QmRun *run);

// Copy of the final state as a new handle.
//
// # Safety
// `run` must be a live handle and `out` a valid pointer.
enum QmStatus qm_run_final_state(const struct QmRun *run, struct QmState **out);

// Trajectory CSV (same layout as the CLI output) as a new string to release
// with [`qm_string_free`].
//
// # Safety
// `run` must be a live handle and `out` a valid pointer.
enum QmStatus qm_run_to_csv(const struct QmRun *run, char **out);

// # Safety
// `run` must be NULL or a handle not yet freed.
void qm_run_free(struct QmRun *run);

// # Safety
// `s` must be NULL or a string returned by this library and not yet freed.
void qm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QND_MITE_H */
