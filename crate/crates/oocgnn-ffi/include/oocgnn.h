#ifndef OOCGNN_H
#define OOCGNN_H

/* Generated by cbindgen from oocgnn-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum OocgnnStatus {
  OOCGNN_STATUS_OK = 0,
  OOCGNN_STATUS_NULL_POINTER = 1,
  OOCGNN_STATUS_UTF8 = 2,
  OOCGNN_STATUS_INVALID_ARGUMENT = 3,
  OOCGNN_STATUS_IO = 4,
  OOCGNN_STATUS_PARSE = 5,
  OOCGNN_STATUS_INTEGRITY = 6,
  OOCGNN_STATUS_SCHEDULE = 7,
  OOCGNN_STATUS_TRAIN = 8,
  OOCGNN_STATUS_CONFIG = 9,
  OOCGNN_STATUS_MEMORY = 10,
  OOCGNN_STATUS_INTERNAL = 11,
} OocgnnStatus;

/**
 * Opaque handle to an opened dataset directory.
 */
typedef struct OocgnnStore OocgnnStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. Borrowed; valid until
 * the next failing call.
 */
const char *oocgnn_last_error(void);

/**
 * Release a string returned through a `char**` out-parameter.
 *
 * # Safety
 * `s` must be a pointer previously returned by this library and not yet
 * freed; null is ignored.
 */
void oocgnn_string_free(char *s);

/**
 * Ingest an edge list (file or train/valid/test directory) and build the
 * partitioned store. `p = 0` auto-tunes the partition count;
 * `labels_or_null` may point at a labels TSV for node classification.
 *
 * # Safety
 * String arguments must be valid NUL-terminated UTF-8 (or null where
 * documented).
 */
enum OocgnnStatus oocgnn_preprocess(const char *input,
                                    const char *out_dir,
                                    const char *format,
                                    const char *mode,
                                    uint32_t p,
                                    size_t dim,
                                    uint64_t seed,
                                    bool wide_ids,
                                    const char *labels_or_null);

/**
 * Open a preprocessed dataset; the handle must be released with
 * `oocgnn_store_close`.
 *
 * # Safety
 * `dir` must be valid UTF-8 and `out` a writable pointer.
 */
enum OocgnnStatus oocgnn_store_open(const char *dir, struct OocgnnStore **out);

/**
 * # Safety
 * `store` must come from `oocgnn_store_open` and not be used afterwards.
 */
void oocgnn_store_close(struct OocgnnStore *store);

/**
 * Auto-tuned (p, l, c) plan for the opened dataset as a JSON string.
 *
 * # Safety
 * `store` must be live; `out_json` writable.
 */
enum OocgnnStatus oocgnn_plan_json(const struct OocgnnStore *store,
                                   uint64_t cpu_bytes,
                                   uint64_t block_bytes,
                                   uint64_t fudge_bytes,
                                   char **out_json);

/**
 * Edge-permutation bias of one epoch of the named policy ("comet", "beta",
 * or "nc") as a JSON report. `l = 0` and `c = 0` pick defaults.
 *
 * # Safety
 * `store` must be live; strings valid; `out_json` writable.
 */
enum OocgnnStatus oocgnn_bias_json(const struct OocgnnStore *store,
                                   const char *policy,
                                   uint64_t seed,
                                   uint32_t l,
                                   uint32_t c,
                                   char **out_json);

/**
 * Multi-hop sample of `targets` over the full graph, returned as the
 * five-array JSON object. `fanouts_csv` is a comma list of integers or
 * "all" tokens; its length sets the hop count.
 *
 * # Safety
 * `store` must be live; `targets` must point at `n_targets` ids; strings
 * valid; `out_json` writable.
 */
enum OocgnnStatus oocgnn_sample_json(const struct OocgnnStore *store,
                                     const uint32_t *targets,
                                     size_t n_targets,
                                     const char *fanouts_csv,
                                     const char *direction,
                                     uint64_t seed,
                                     char **out_json);

/**
 * Train from a key=value config file with optional `key=value` overrides.
 *
 * # Safety
 * `config` must be valid UTF-8; `overrides` must point at `n_overrides`
 * valid strings (may be null when `n_overrides` is 0).
 */
enum OocgnnStatus oocgnn_train(const char *config,
                               const char *const *overrides,
                               size_t n_overrides);

/**
 * Evaluate a checkpoint against a dataset's test split. Writes the MRR
 * (link prediction) or accuracy (classification) to `out_value`.
 *
 * # Safety
 * Paths must be valid UTF-8; `out_value` writable.
 */
enum OocgnnStatus oocgnn_evaluate(const char *checkpoint,
                                  const char *dataset,
                                  const char *mode,
                                  double *out_value);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* OOCGNN_H */
