#ifndef ALIGNPRO_H
#define ALIGNPRO_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI entry point.
 */
typedef enum AlignproStatus {
  ALIGNPRO_STATUS_OK = 0,
  ALIGNPRO_STATUS_NULL_POINTER = 1,
  ALIGNPRO_STATUS_INVALID_ARGUMENT = 2,
  ALIGNPRO_STATUS_IO = 3,
  ALIGNPRO_STATUS_PARSE = 4,
  ALIGNPRO_STATUS_INVARIANT_VIOLATION = 5,
  ALIGNPRO_STATUS_INTERNAL = 6,
} AlignproStatus;

/**
 * Opaque problem-instance handle; create with the `alignpro_instance_*`
 * constructors and release with [`alignpro_instance_free`].
 */
typedef struct AlignproInstance AlignproInstance;

/**
 * Flat copy of one solved record.
 */
typedef struct AlignproRecord {
  uint64_t seed;
  uint32_t n_prompts;
  uint32_t n_responses;
  double beta;
  double lambda;
  double j_star;
  double j_frozen;
  double j_tilde_star;
  double j_tilde_ref;
  double gap;
  double term1;
  double term2;
  double term3;
  double rhs;
  double slack;
  double kl_mean;
  uint8_t bound_holds;
  uint64_t wall_time_ms;
} AlignproRecord;

/**
 * Flat copy of a bound verification report.
 */
typedef struct AlignproBoundSummary {
  double lhs_gap;
  double term1;
  double term2;
  double term3;
  double rhs;
  double slack;
  uint8_t holds;
} AlignproBoundSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * # Safety
 * `out` must be a valid pointer; the returned handle must be released with
 * [`alignpro_instance_free`].
 */
enum AlignproStatus alignpro_instance_generate(uint32_t n_prompts,
                                               uint32_t n_responses,
                                               uint32_t reward_style,
                                               uint32_t ref_style,
                                               double dirichlet_alpha,
                                               double beta,
                                               double lambda,
                                               double r_max,
                                               uint64_t seed,
                                               struct AlignproInstance **out);

/**
 * # Safety
 * `path` must be a valid NUL-terminated UTF-8 string and `out` a valid
 * pointer.
 */
enum AlignproStatus alignpro_instance_load(const char *path, struct AlignproInstance **out);

/**
 * # Safety
 * `handle` must come from a constructor in this library; `path` must be a
 * valid NUL-terminated UTF-8 string.
 */
enum AlignproStatus alignpro_instance_save(const struct AlignproInstance *handle, const char *path);

/**
 * # Safety
 * `handle` must come from a constructor in this library, or be null.
 */
void alignpro_instance_free(struct AlignproInstance *handle);

/**
 * Runs the full pipeline (optimal policy, optimal prompter, compositions,
 * gap, bound) on the instance.
 *
 * # Safety
 * `handle` must come from a constructor in this library; `out` must be valid.
 */
enum AlignproStatus alignpro_run_single(const struct AlignproInstance *handle,
                                        struct AlignproRecord *out);

/**
 * # Safety
 * `handle` must come from a constructor in this library; `out` must be valid.
 */
enum AlignproStatus alignpro_verify_bound(const struct AlignproInstance *handle,
                                          struct AlignproBoundSummary *out);

/**
 * Copies the last error message for this thread into `buf` (NUL-terminated,
 * truncating) and returns the full message length in bytes, excluding the
 * NUL. Passing a null or zero-length buffer just queries the length.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes when non-null.
 */
size_t alignpro_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALIGNPRO_H */
