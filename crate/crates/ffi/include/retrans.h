#ifndef RETRANS_H
#define RETRANS_H

/* Generated by cbindgen from the retrans-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call. Inspect `retrans_last_error` for a
 human-readable message after any non-OK status.
 */
typedef enum RetransStatus {
  RETRANS_STATUS_OK = 0,
  RETRANS_STATUS_NULL_ARGUMENT = 1,
  RETRANS_STATUS_INVALID_UTF8 = 2,
  RETRANS_STATUS_PARSE_ERROR = 3,
  RETRANS_STATUS_INVALID_INPUT = 4,
  RETRANS_STATUS_RUNTIME_ERROR = 5,
  RETRANS_STATUS_PANICKED = 6,
} RetransStatus;

typedef enum RetransPolicy {
  RETRANS_POLICY_RETRANSLATE = 0,
  RETRANS_POLICY_STREAM_WAITK = 1,
} RetransPolicy;

/*
 Opaque scoring model handle.
 */
typedef struct RetransModel RetransModel;

/*
 Opaque prefix translation list handle.
 */
typedef struct RetransPtl RetransPtl;

/*
 Toolkit version as a borrowed static string.
 */
const char *retrans_version(void);

/*
 Message for the most recent failure on this thread; empty after a
 success. Borrowed; valid until the next failing call on the thread.
 */
const char *retrans_last_error(void);

/*
 Frees a string returned through a `char **` out-parameter.
 */
void retrans_string_free(char *s);

/*
 Builds a model from config JSON: `{"seed":..,"vocab":[..]}`,
 `{"tables":{..},"eos_when_covered":..}`, or `{"command":..}` for an
 external scorer subprocess.
 */
enum RetransStatus retrans_model_from_json(const char *json, struct RetransModel **out);

void retrans_model_free(struct RetransModel *model);

/*
 Parses one PTL record: `{"id":..,"source":[..],"outputs":[[..],..]}`.
 */
enum RetransStatus retrans_ptl_from_json(const char *json, struct RetransPtl **out);

/*
 Serializes a PTL handle back to its JSON line. The string is owned
 by the caller; free it with `retrans_string_free`.
 */
enum RetransStatus retrans_ptl_to_json(const struct RetransPtl *ptl, char **out);

void retrans_ptl_free(struct RetransPtl *ptl);

/*
 Source length in tokens; 0 for a null handle.
 */
size_t retrans_ptl_source_len(const struct RetransPtl *ptl);

/*
 Final output length in tokens; 0 for a null handle.
 */
size_t retrans_ptl_final_len(const struct RetransPtl *ptl);

/*
 True when no output revises its predecessor; false for null.
 */
bool retrans_ptl_is_append_only(const struct RetransPtl *ptl);

/*
 Total erased suffix tokens divided by final length.
 */
enum RetransStatus retrans_ptl_normalized_erasure(const struct RetransPtl *ptl, double *out);

/*
 Differentiable average lagging of the list's content delays.
 */
enum RetransStatus retrans_ptl_dal(const struct RetransPtl *ptl, double *out);

/*
 Copies the per-token content delays into `out_delays`. `out_len`
 always receives the required length; the copy happens only when
 `capacity` suffices.
 */
enum RetransStatus retrans_ptl_content_delay(const struct RetransPtl *ptl,
                                             size_t *out_delays,
                                             size_t capacity,
                                             size_t *out_len);

/*
 Runs a policy over one whitespace-tokenized source sentence and
 returns the resulting PTL handle.
 */
enum RetransStatus retrans_simulate(const struct RetransModel *model,
                                    const char *source,
                                    enum RetransPolicy policy,
                                    double beta,
                                    size_t k,
                                    size_t beam,
                                    struct RetransPtl **out);

/*
 Corpus BLEU between newline-separated token lines (percentage).
 */
enum RetransStatus retrans_corpus_bleu(const char *hypotheses, const char *references, double *out);

#endif  /* RETRANS_H */
