#ifndef ENTLINK_H
#define ENTLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum EntlinkStatus {
  ENTLINK_STATUS_OK = 0,
  ENTLINK_STATUS_NULL_POINTER = 1,
  ENTLINK_STATUS_INVALID_UTF8 = 2,
  /**
   * A record or word-vector file failed to parse.
   */
  ENTLINK_STATUS_PARSE = 3,
  ENTLINK_STATUS_IO = 4,
  ENTLINK_STATUS_CHECKPOINT = 5,
  ENTLINK_STATUS_SHAPE_MISMATCH = 6,
  ENTLINK_STATUS_INVALID_ARGUMENT = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  ENTLINK_STATUS_INTERNAL = 8,
} EntlinkStatus;

/**
 * An in-memory knowledge base with its blocking index.
 */
typedef struct EntlinkKb EntlinkKb;

/**
 * A trained model bound to a knowledge base and word vectors.
 */
typedef struct EntlinkLinker EntlinkLinker;

/**
 * Outcome of linking one mention.
 */
typedef struct EntlinkDecision {
  /**
   * 1 when an entity passed the decision threshold.
   */
  int32_t linked;
  /**
   * Chosen entity id, or null. Owned; release with [`entlink_decision_clear`].
   */
  char *entity_id;
  /**
   * 1 when `score` is meaningful (at least one candidate was scored).
   */
  int32_t has_score;
  /**
   * Score of the chosen entity, or of the best rejected candidate.
   */
  double score;
  size_t candidate_count;
} EntlinkDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *entlink_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *entlink_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void entlink_string_free(char *s);

/**
 * Averaged cosine/Levenshtein/Jaro score of two strings after normalization.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated strings; `out` must be writable.
 */
enum EntlinkStatus entlink_fuzzy_score(const char *a, const char *b, double *out);

/**
 * Loads a JSONL entity file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum EntlinkStatus entlink_kb_load(const char *path, struct EntlinkKb **out);

/**
 * Parses JSONL entity records held in memory.
 *
 * # Safety
 * `jsonl` must be a NUL-terminated string; `out` must be writable.
 */
enum EntlinkStatus entlink_kb_from_jsonl(const char *jsonl, struct EntlinkKb **out);

/**
 * Number of entities, or 0 for a null handle.
 *
 * # Safety
 * `kb` must be null or a live handle.
 */
size_t entlink_kb_len(const struct EntlinkKb *kb);

/**
 * # Safety
 * `kb` must be null or a handle from this library, not used afterwards.
 */
void entlink_kb_free(struct EntlinkKb *kb);

/**
 * Blocking candidates for one mention as a JSON array of
 * `{"mention_index","entity_id","fuzzy_score"}`, best first.
 *
 * # Safety
 * `kb` must be a live handle, `text` a NUL-terminated string and
 * `out_json` writable. Free the result with [`entlink_string_free`].
 */
enum EntlinkStatus entlink_kb_candidates(const struct EntlinkKb *kb,
                                         const char *text,
                                         double threshold,
                                         char **out_json);

/**
 * Opens a checkpoint together with the entity and word-vector files it
 * should serve. The blocking threshold is the one recorded in the checkpoint.
 *
 * # Safety
 * All paths must be NUL-terminated strings; `out` must be writable.
 */
enum EntlinkStatus entlink_linker_open(const char *checkpoint,
                                       const char *entities,
                                       const char *vectors,
                                       struct EntlinkLinker **out);

/**
 * # Safety
 * `linker` must be null or a handle from this library, not used afterwards.
 */
void entlink_linker_free(struct EntlinkLinker *linker);

/**
 * Releases the strings inside a decision and resets it.
 *
 * # Safety
 * `d` must be null or point to a decision filled by [`entlink_link`].
 */
void entlink_decision_clear(struct EntlinkDecision *d);

/**
 * Links one mention. `context` may be null.
 *
 * # Safety
 * `linker` must be a live handle, strings NUL-terminated, `out` writable.
 */
enum EntlinkStatus entlink_link(const struct EntlinkLinker *linker,
                                const char *doc_id,
                                const char *text,
                                const char *context,
                                struct EntlinkDecision *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENTLINK_H */
