/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef NFRAMES_H
#define NFRAMES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes shared by every function.
 */
typedef enum NfStatus {
  NF_STATUS_OK = 0,
  NF_STATUS_NULL_POINTER = 1,
  NF_STATUS_INVALID_UTF8 = 2,
  NF_STATUS_INVALID_INPUT = 3,
  NF_STATUS_IO = 4,
  NF_STATUS_PARSE = 5,
  NF_STATUS_EMBEDDING = 6,
  NF_STATUS_BUFFER_TOO_SMALL = 7,
  NF_STATUS_PANIC = 8,
} NfStatus;

/*
 Opaque handle to a trained model.
 */
typedef struct NfModel NfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. Valid until the
 next failing call on the same thread; do not free.
 */
const char *nf_last_error_message(void);

/*
 Library version as a static string; do not free.
 */
const char *nf_version(void);

/*
 Release a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void nf_string_free(char *s);

/*
 Load a model from a directory or `model.json` path.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum NfStatus nf_model_load(const char *path, struct NfModel **out);

/*
 Release a model. NULL is ignored.

 # Safety
 `model` must come from [`nf_model_load`] and not have been freed.
 */
void nf_model_free(struct NfModel *model);

/*
 Method name of a loaded model (e.g. `rbf`). Free with [`nf_string_free`].

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum NfStatus nf_model_method(const struct NfModel *model, char **out);

/*
 Predict every frame for the articles in `articles_jsonl` (one article
 object per line). Writes prediction JSONL to `out`; free it with
 [`nf_string_free`].

 # Safety
 `model` must be a live handle, `articles_jsonl` NUL-terminated and `out`
 writable.
 */
enum NfStatus nf_model_predict_json(const struct NfModel *model,
                                    const char *articles_jsonl,
                                    int with_evidence,
                                    char **out);

/*
 Harmonic mean of precision and recall; 0 when both are 0.

 # Safety
 `out` must be writable.
 */
enum NfStatus nf_harmonic_f1(double precision, double recall, double *out);

/*
 ROUGE-L F-measure between two entity strings.

 # Safety
 `a` and `b` must be NUL-terminated; `out` must be writable.
 */
enum NfStatus nf_rouge_l(const char *a, const char *b, double *out);

/*
 Krippendorff's alpha for binary data. `rows_json` is a JSON array of
 units, each an array with one entry per annotator: `true`, `false` or
 `null` for a missing answer.

 # Safety
 `rows_json` must be NUL-terminated; `out` must be writable.
 */
enum NfStatus nf_krippendorff_alpha_json(const char *rows_json, double *out);

/*
 Hash-embed `text` into `out[0..dim]`. `out_len` must be at least `dim`.

 # Safety
 `text` must be NUL-terminated; `out` must point to `out_len` doubles.
 */
enum NfStatus nf_hash_embed(const char *text, size_t dim, double *out, size_t out_len);

/*
 Aggregate annotation JSONL with the bundled codebook into label JSONL.
 Free the result with [`nf_string_free`].

 # Safety
 `annotations_jsonl` must be NUL-terminated; `out` must be writable.
 */
enum NfStatus nf_aggregate_json(const char *annotations_jsonl, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NFRAMES_H */
