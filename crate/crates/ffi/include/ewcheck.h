#ifndef EWCHECK_H
#define EWCHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EwCheck {
  EW_CHECK_FLAT = 0,
  EW_CHECK_EW = 1,
  EW_CHECK_LAX = 2,
  EW_CHECK_NULLGEO = 3,
  EW_CHECK_OMEGA = 4,
  EW_CHECK_CONSTRAINTS = 5,
  EW_CHECK_GT = 6,
} EwCheck;

typedef enum EwRepresentative {
  /**
   * Whatever the document asks for.
   */
  EW_REPRESENTATIVE_DOCUMENT = 0,
  EW_REPRESENTATIVE_ADJUGATE = 1,
  EW_REPRESENTATIVE_INVERSE = 2,
  EW_REPRESENTATIVE_PINNED = 3,
} EwRepresentative;

/**
 * Result of an API call.
 */
typedef enum EwStatus {
  EW_STATUS_OK = 0,
  EW_STATUS_NULL_POINTER = 1,
  EW_STATUS_INVALID_UTF8 = 2,
  /**
   * The document failed to parse or compile.
   */
  EW_STATUS_PARSE = 3,
  EW_STATUS_NOT_FOUND = 4,
  /**
   * The document lacks what the check needs, or the input is inconsistent.
   */
  EW_STATUS_INPUT = 5,
  /**
   * The expression-size cap was hit.
   */
  EW_STATUS_LIMIT = 6,
  /**
   * An internal panic was caught at the boundary.
   */
  EW_STATUS_INTERNAL = 7,
} EwStatus;

typedef enum EwVerdict {
  EW_VERDICT_PASS = 0,
  EW_VERDICT_FAIL = 1,
  EW_VERDICT_DEGENERATE = 2,
} EwVerdict;

/**
 * A compiled problem document.
 */
typedef struct EwProblem EwProblem;

/**
 * The outcome of one check.
 */
typedef struct EwReport EwReport;

/**
 * Overrides for a check. A null pointer means the document's own options.
 */
typedef struct EwOptions {
  enum EwRepresentative representative;
  /**
   * 0 keeps the document's value.
   */
  uint32_t base_order;
  /**
   * 0 means the engine default.
   */
  uint64_t max_size;
  bool leading;
  bool witness;
} EwOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Engine version as a static string; never free it.
 */
const char *ew_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ew_last_error(void);

/**
 * Releases a string returned by this library. Null is accepted.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void ew_string_free(char *s);

/**
 * Parses and compiles a problem document.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum EwStatus ew_problem_parse(const char *text, struct EwProblem **out);

/**
 * Loads a built-in catalog entry by name or alias.
 *
 * # Safety
 * `name` must be a nul-terminated string and `out` a valid pointer.
 */
enum EwStatus ew_problem_from_catalog(const char *name, struct EwProblem **out);

/**
 * Name of the problem; free with [`ew_string_free`]. Null on a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
char *ew_problem_name(const struct EwProblem *p);

/**
 * # Safety
 * `p` must be null or a handle not freed before.
 */
void ew_problem_free(struct EwProblem *p);

/**
 * Runs one check. On success `*out` receives a report handle.
 *
 * # Safety
 * `p` must be a live handle, `opts` null or valid, `out` a valid pointer.
 */
enum EwStatus ew_check(const struct EwProblem *p,
                       enum EwCheck check,
                       const struct EwOptions *opts,
                       struct EwReport **out);

/**
 * Verdict of a report; `Degenerate` for a null handle.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
enum EwVerdict ew_report_verdict(const struct EwReport *r);

/**
 * Report as JSON; free with [`ew_string_free`].
 *
 * # Safety
 * `r` must be null or a live handle.
 */
char *ew_report_json(const struct EwReport *r);

/**
 * Report as markdown; free with [`ew_string_free`].
 *
 * # Safety
 * `r` must be null or a live handle.
 */
char *ew_report_markdown(const struct EwReport *r);

/**
 * # Safety
 * `r` must be null or a handle not freed before.
 */
void ew_report_free(struct EwReport *r);

size_t ew_catalog_len(void);

/**
 * Name of catalog entry `i`, or null past the end; free with
 * [`ew_string_free`].
 */
char *ew_catalog_name(size_t i);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EWCHECK_H */
