#ifndef MCQT_H
#define MCQT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum McqtStatus {
  MCQT_STATUS_OK = 0,
  MCQT_STATUS_NULL_POINTER = 1,
  MCQT_STATUS_INVALID_ARGUMENT = 2,
  MCQT_STATUS_INVALID_STATE = 3,
  MCQT_STATUS_BUDGET_EXCEEDED = 4,
  MCQT_STATUS_ORACLE_FAILURE = 5,
  MCQT_STATUS_INTERNAL = 6,
  MCQT_STATUS_PANIC = 7,
} McqtStatus;

typedef enum McqtEpr {
  MCQT_EPR_PHI_PLUS = 0,
  MCQT_EPR_PHI_MINUS = 1,
  MCQT_EPR_PSI_PLUS = 2,
  MCQT_EPR_PSI_MINUS = 3,
} McqtEpr;

typedef enum McqtTable {
  MCQT_TABLE_DERIVED = 0,
  MCQT_TABLE_PAPER = 1,
} McqtTable;

/**
 * Opaque protocol configuration.
 */
typedef struct McqtConfig McqtConfig;

/**
 * Opaque message state.
 */
typedef struct McqtMessage McqtMessage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the calling thread's last failed call, or null. Valid until
 * the next call on the same thread.
 */
const char *mcqt_last_error(void);

/**
 * Library version as a static string.
 */
const char *mcqt_version(void);

/**
 * Message from `len` amplitudes given as separate real and imaginary
 * arrays. `len` must be a power of two and the state normalized within 1e-6.
 *
 * # Safety
 * `re` and `im` must point to `len` readable doubles; `out` must be writable.
 */
enum McqtStatus mcqt_message_new(const double *re,
                                 const double *im,
                                 size_t len,
                                 struct McqtMessage **out);

/**
 * Seeded full-support random message on `n` qubits.
 *
 * # Safety
 * `out` must be writable.
 */
enum McqtStatus mcqt_message_random(size_t n, uint64_t seed, struct McqtMessage **out);

/**
 * The fixed three-qubit example message.
 *
 * # Safety
 * `out` must be writable.
 */
enum McqtStatus mcqt_message_example3x2(struct McqtMessage **out);

/**
 * Qubit count of `message`, or 0 when null.
 *
 * # Safety
 * `message` must be null or a live handle.
 */
size_t mcqt_message_num_qubits(const struct McqtMessage *message);

/**
 * # Safety
 * `message` must be null or a handle not yet freed.
 */
void mcqt_message_free(struct McqtMessage *message);

/**
 * Validated configuration for `n` message qubits and `m` controllers.
 *
 * # Safety
 * `out` must be writable.
 */
enum McqtStatus mcqt_config_new(size_t n,
                                size_t m,
                                enum McqtEpr epr,
                                enum McqtTable table,
                                struct McqtConfig **out);

/**
 * # Safety
 * `config` must be null or a handle not yet freed.
 */
void mcqt_config_free(struct McqtConfig *config);

/**
 * One sampled run seeded with `seed`. Writes the transcript as JSON to
 * `out_json` and Bob's fidelity to `out_fidelity` (either may be null).
 *
 * # Safety
 * Handles must be live; out pointers null or writable.
 */
enum McqtStatus mcqt_run(const struct McqtConfig *config,
                         const struct McqtMessage *message,
                         uint64_t seed,
                         char **out_json,
                         double *out_fidelity);

/**
 * Every branch, as a JSON array of branch reports. `out_failing` receives
 * how many branches miss fidelity 1 under the configuration's table.
 *
 * # Safety
 * Handles must be live; out pointers null or writable.
 */
enum McqtStatus mcqt_enumerate(const struct McqtConfig *config,
                               const struct McqtMessage *message,
                               char **out_json,
                               uint64_t *out_failing);

/**
 * Printed-versus-derived reconciliation for one channel, as JSON.
 *
 * # Safety
 * `out_json` must be writable.
 */
enum McqtStatus mcqt_reconcile(enum McqtEpr epr, char **out_json);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void mcqt_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MCQT_H */
