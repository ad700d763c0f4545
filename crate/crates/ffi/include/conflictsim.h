#ifndef CONFLICTSIM_H
#define CONFLICTSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  CS_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  CS_STATUS_INVALID_UTF8 = 2,
  /**
   * A JSON argument did not parse into the expected shape.
   */
  CS_STATUS_INVALID_JSON = 3,
  /**
   * Unknown session id.
   */
  CS_STATUS_NOT_FOUND = 4,
  /**
   * Well-formed input the model rejects (bad level, phase regression, ...).
   */
  CS_STATUS_INVALID = 5,
  /**
   * The request clashes with session state (ended, wrong mode, duplicate).
   */
  CS_STATUS_CONFLICT = 6,
  /**
   * I/O or other internal failure.
   */
  CS_STATUS_INTERNAL = 7,
  /**
   * A panic was caught at the boundary.
   */
  CS_STATUS_PANIC = 8,
} CsStatus;

typedef enum CsStyle {
  CS_STYLE_PROBLEM_SOLVE = 0,
  CS_STYLE_FORCE = 1,
  CS_STYLE_SMOOTH = 2,
  CS_STYLE_WITHDRAW = 3,
} CsStyle;

typedef enum CsOutcome {
  CS_OUTCOME_NONE = 0,
  CS_OUTCOME_ESCALATION = 1,
  CS_OUTCOME_RESOLUTION = 2,
} CsOutcome;

/**
 * Opaque orchestrator handle. Safe to share across threads.
 */
typedef struct CsOrchestrator CsOrchestrator;

/**
 * Conflict state by value. Levels run 1..=7 (1 is optimal), phases 1..=4.
 */
typedef struct CsConflictState {
  uint8_t task_level;
  uint8_t rel_level;
  uint8_t phase;
  int32_t cumulative_potential;
  uint32_t turn_count;
  enum CsOutcome outcome;
} CsConflictState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or NULL.
 *
 * The pointer stays valid until the next call into this library on the same
 * thread. Do not free it.
 */
const char *cs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cs_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from an `out` parameter of this library and not be freed twice.
 */
void cs_string_free(char *s);

struct CsOrchestrator *cs_orchestrator_new(void);

/**
 * Creates an orchestrator that also persists each session log under `log_dir`.
 * Returns NULL if `log_dir` is NULL or not UTF-8.
 *
 * # Safety
 * `log_dir` must be NULL or a NUL-terminated string.
 */
struct CsOrchestrator *cs_orchestrator_with_log_dir(const char *log_dir);

/**
 * # Safety
 * `handle` must be NULL or come from `cs_orchestrator_new*`, and no other
 * call may be using it.
 */
void cs_orchestrator_free(struct CsOrchestrator *handle);

/**
 * Creates a session from a JSON session config (NULL means defaults) and
 * writes the session snapshot JSON to `out`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum CsStatus cs_session_create(const struct CsOrchestrator *handle,
                                const char *config_json,
                                char **out);

/**
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum CsStatus cs_session_snapshot(const struct CsOrchestrator *handle,
                                  const char *session_id,
                                  char **out);

/**
 * Submits a wizard rating (`{"taskFocus":..,"relationship":..,"phase":..}`)
 * and writes the turn report JSON to `out`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum CsStatus cs_session_rating(const struct CsOrchestrator *handle,
                                const char *session_id,
                                const char *rating_json,
                                char **out);

/**
 * Submits an affect cue and writes the input acknowledgement JSON to `out`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum CsStatus cs_session_cue(const struct CsOrchestrator *handle,
                             const char *session_id,
                             const char *cue_json,
                             char **out);

/**
 * Submits a gaze, distance or utterance event and writes the input
 * acknowledgement JSON to `out`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum CsStatus cs_session_modality(const struct CsOrchestrator *handle,
                                  const char *session_id,
                                  const char *event_json,
                                  char **out);

/**
 * Ends the session and writes the signal summary JSON to `out`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum CsStatus cs_session_end(const struct CsOrchestrator *handle,
                             const char *session_id,
                             char **out);

/**
 * Writes the session log as NDJSON (header line, then one event per line).
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum CsStatus cs_session_log(const struct CsOrchestrator *handle,
                             const char *session_id,
                             char **out);

/**
 * Writes the demanding-affect fragments as a JSON array. `params_json` may be
 * NULL for the defaults, or `{"pleasureMax":..,"arousalMin":..,"minDurationMs":..}`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum CsStatus cs_session_fragments(const struct CsOrchestrator *handle,
                                   const char *session_id,
                                   const char *params_json,
                                   char **out);

/**
 * Re-runs a recorded NDJSON log and writes the comparison report JSON to
 * `out`. `catalog_path` may be NULL to use the catalog named in the log.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum CsStatus cs_verify_log(const char *log_ndjson, const char *catalog_path, char **out);

enum CsStyle cs_classify_style(bool task_focus, bool relationship);

int32_t cs_style_potential(enum CsStyle style);

/**
 * Builds a start state, already marked terminal if it meets an end condition.
 *
 * # Safety
 * `out` must point to writable memory for one `CsConflictState`.
 */
enum CsStatus cs_conflict_start(uint8_t task_level,
                                uint8_t rel_level,
                                uint8_t phase,
                                uint32_t turn_budget,
                                struct CsConflictState *out);

/**
 * Applies one evaluated teacher turn. `out` may alias `state`.
 *
 * # Safety
 * `state` and `out` must point to valid `CsConflictState` memory.
 */
enum CsStatus cs_apply_turn(const struct CsConflictState *state,
                            bool task_focus,
                            bool relationship,
                            uint8_t phase,
                            uint32_t turn_budget,
                            struct CsConflictState *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONFLICTSIM_H */
