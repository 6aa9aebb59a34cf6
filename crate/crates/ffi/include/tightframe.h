#ifndef TIGHTFRAME_H
#define TIGHTFRAME_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdint.h>
#include <stddef.h>

#define TIGHTFRAME_OK 0

/*
 The call succeeded but at least one verification check failed.
 */
#define TIGHTFRAME_VERIFICATION_FAILED 1

/*
 Malformed JSON, bad parameters or inconsistent filters.
 */
#define TIGHTFRAME_INPUT 2

#define TIGHTFRAME_PRECONDITION 3

#define TIGHTFRAME_NULL_POINTER 4

/*
 A panic or an unexpected internal failure.
 */
#define TIGHTFRAME_INTERNAL 5

/*
 The request is outside what the library computes, e.g. time-side values on the torus.
 */
#define TIGHTFRAME_UNSUPPORTED 6

/*
 Opaque handle to a constructed system.
 */
typedef struct TightframeSystem TightframeSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Builds a system from a descriptor JSON string.

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
int32_t tightframe_system_from_descriptor(const char *json, struct TightframeSystem **out);

/*
 Loads a system from an artifact JSON string; the stored filters are used as given.

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
int32_t tightframe_system_from_artifact(const char *json, struct TightframeSystem **out);

/*
 Releases a system. Null is ignored.

 # Safety
 `system` must come from this library and not be used afterwards.
 */
void tightframe_system_free(struct TightframeSystem *system);

/*
 Writes the system artifact JSON to `*out`.

 # Safety
 `system` must be a live handle and `out` a valid pointer.
 */
int32_t tightframe_system_to_json(const struct TightframeSystem *system, char **out);

/*
 Runs a verification suite ("uep", "refinement", "fiber", "telescope", "parseval" or "all").

 `seed` may be null to use the system's own seed; a non-positive `tolerance` selects the
 default. The JSON report is written to `*report` even when checks fail, in which case
 the return value is `TIGHTFRAME_VERIFICATION_FAILED`.

 # Safety
 Pointers must be valid; `suite` must be nul-terminated.
 */
int32_t tightframe_verify(const struct TightframeSystem *system,
                          const char *suite,
                          const uint64_t *seed,
                          double tolerance,
                          char **report);

/*
 Number of generators: the scaling function followed by the wavelets of every level.

 # Safety
 `system` must be a live handle and `count` a valid pointer.
 */
int32_t tightframe_generator_count(const struct TightframeSystem *system, size_t *count);

/*
 Time-domain values of generator `index` on Z or Z_N.

 Sets `*len` to the number of values and `*start` to the index of the first one. When
 `re` and `im` are non-null and `capacity >= *len`, the values are copied into them;
 call with null buffers first to size them.

 # Safety
 `re` and `im`, when non-null, must hold `capacity` doubles.
 */
int32_t tightframe_generator_values(const struct TightframeSystem *system,
                                    size_t index,
                                    int64_t *start,
                                    double *re,
                                    double *im,
                                    size_t capacity,
                                    size_t *len);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void tightframe_string_free(char *s);

/*
 Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *tightframe_last_error(void);

/*
 Library version as a static string.
 */
const char *tightframe_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TIGHTFRAME_H */
