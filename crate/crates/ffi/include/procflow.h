#ifndef PROCFLOW_H
#define PROCFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_UTF8 = 2,
  PF_STATUS_VALIDATION = 3,
  PF_STATUS_PARSE = 4,
  PF_STATUS_NOT_FOUND = 5,
  PF_STATUS_DEPENDENCY = 6,
  PF_STATUS_CONFIG_MISMATCH = 7,
  PF_STATUS_PROVIDER = 8,
  PF_STATUS_AUTHORIZATION = 9,
  PF_STATUS_IO = 10,
  PF_STATUS_PANIC = 11,
} PfStatus;

/**
 * A loaded corpus.
 */
typedef struct PfCorpus PfCorpus;

/**
 * Review sessions over a workspace's comparison results.
 */
typedef struct PfReviewStore PfReviewStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next library call on the same thread.
 */
const char *pf_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void pf_string_free(char *s);

/**
 * DTW over a row-major `rows` x `cols` distance matrix. `out_path` must hold
 * `2 * (rows + cols - 1)` entries; it receives (row, col) pairs and
 * `out_path_len` the number of pairs.
 *
 * # Safety
 * `dist` must point to `rows * cols` doubles and `out_path` to the
 * capacity above.
 */
enum PfStatus pf_dtw_align(const double *dist,
                           size_t rows,
                           size_t cols,
                           double *out_cost,
                           size_t *out_path,
                           size_t *out_path_len);

/**
 * Sentence BLEU of `candidate` against one reference, both tokenized the
 * way QA evaluation tokenizes.
 *
 * # Safety
 * String arguments must be NUL-terminated.
 */
enum PfStatus pf_bleu(const char *candidate,
                      const char *reference,
                      size_t max_n,
                      double *out_score);

/**
 * # Safety
 * String arguments must be NUL-terminated.
 */
enum PfStatus pf_rouge_l(const char *candidate, const char *reference, double *out_score);

/**
 * Average-linkage clustering of `n` row-major vectors of length `dim`.
 * `out_labels[i]` receives the cluster index of row i; clusters are
 * numbered by their smallest member.
 *
 * # Safety
 * `vectors` must hold `n * dim` doubles and `out_labels` `n` entries.
 */
enum PfStatus pf_cluster_embeddings(const double *vectors,
                                    size_t n,
                                    size_t dim,
                                    double threshold,
                                    size_t *out_labels);

/**
 * Evenly spaced frame indices. `out_indices` must hold `max_frames`
 * entries.
 *
 * # Safety
 * `out_indices` must have the capacity above.
 */
enum PfStatus pf_sample_frame_indices(size_t frame_count,
                                      size_t max_frames,
                                      size_t *out_indices,
                                      size_t *out_len);

/**
 * Load a corpus root. `categories_json` is a JSON array of category
 * names, or null for none.
 *
 * # Safety
 * `root` must be NUL-terminated; `out` must be writable.
 */
enum PfStatus pf_corpus_load(const char *root,
                             const char *categories_json,
                             struct PfCorpus **out_corpus);

/**
 * Dataset statistics as a JSON string owned by the caller.
 *
 * # Safety
 * `corpus` must come from [`pf_corpus_load`].
 */
enum PfStatus pf_corpus_stats_json(const struct PfCorpus *corpus,
                                   uint32_t duration_bin_s,
                                   char **out_json);

/**
 * # Safety
 * `corpus` must be null or come from [`pf_corpus_load`], freed once.
 */
void pf_corpus_free(struct PfCorpus *corpus);

/**
 * # Safety
 * `workspace` must be NUL-terminated; `out_store` must be writable.
 */
enum PfStatus pf_review_open(const char *workspace, struct PfReviewStore **out_store);

/**
 * Create a session. `annotators_json` is a JSON array of names.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum PfStatus pf_review_create_session(const struct PfReviewStore *store,
                                       const char *session_id,
                                       size_t sample_size,
                                       const char *annotators_json,
                                       uint64_t seed);

/**
 * Items assigned to `annotator` in a session, as JSON.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum PfStatus pf_review_items_json(const struct PfReviewStore *store,
                                   const char *session_id,
                                   const char *annotator,
                                   char **out_json);

/**
 * Record a verdict: `"confirmed"`, `"rejected"` or `"unsure"`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum PfStatus pf_review_record(const struct PfReviewStore *store,
                               const char *session_id,
                               const char *item_id,
                               const char *annotator,
                               const char *verdict);

/**
 * Session progress and the accuracy table as JSON.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum PfStatus pf_review_stats_json(const struct PfReviewStore *store,
                                   const char *session_id,
                                   char **out_json);

/**
 * # Safety
 * `store` must be null or come from [`pf_review_open`], freed once.
 */
void pf_review_free(struct PfReviewStore *store);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROCFLOW_H */
