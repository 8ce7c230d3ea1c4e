#ifndef XCDTL_H
#define XCDTL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum XcdtlStatus {
  XCDTL_STATUS_OK = 0,
  XCDTL_STATUS_NULL_POINTER = 1,
  XCDTL_STATUS_INVALID_INPUT = 2,
  XCDTL_STATUS_NUMERICAL = 3,
  XCDTL_STATUS_IO = 4,
  XCDTL_STATUS_PARSE = 5,
  XCDTL_STATUS_PANIC = 6,
} XcdtlStatus;

/**
 * Graph handle.
 */
typedef struct XcdtlGraph XcdtlGraph;

/**
 * Fitted isolation forest handle.
 */
typedef struct XcdtlIForest XcdtlIForest;

typedef struct XcdtlDetectionMetrics {
  double roc_auc;
  double average_precision;
  double f1;
  double threshold;
} XcdtlDetectionMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call into the library from this thread.
 */
const char *xcdtl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *xcdtl_version(void);

size_t xcdtl_num_features(void);

/**
 * Static name of descriptor `index`, or null when out of range.
 */
const char *xcdtl_feature_name(size_t index);

/**
 * Builds a graph on `n` nodes from `n_edges` pairs stored flat in `edges`
 * (`2 * n_edges` entries). `domain` is 0..=3 (Social, Molecular, Proteins,
 * Linguistic).
 *
 * # Safety
 * `edges` must point to `2 * n_edges` readable values; `out_graph` must be
 * writable.
 */
enum XcdtlStatus xcdtl_graph_new(size_t n,
                                 const uint32_t *edges,
                                 size_t n_edges,
                                 uint32_t domain,
                                 struct XcdtlGraph **out_graph);

/**
 * Reads a whitespace-separated edge list. Duplicates and self-loops are
 * dropped and their count written to `dropped` when it is non-null.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_graph` must be writable.
 */
enum XcdtlStatus xcdtl_graph_load_edge_list(const char *path,
                                            uint32_t domain,
                                            struct XcdtlGraph **out_graph,
                                            size_t *dropped);

/**
 * # Safety
 * `graph` must come from this library and not be used afterwards.
 */
void xcdtl_graph_free(struct XcdtlGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle or null (returns 0).
 */
size_t xcdtl_graph_node_count(const struct XcdtlGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle or null (returns 0).
 */
size_t xcdtl_graph_edge_count(const struct XcdtlGraph *graph);

/**
 * Writes the twelve descriptors into `values`. `mask[j]` is 1 when the
 * descriptor is defined, else 0 and `values[j]` is NaN.
 *
 * # Safety
 * `values` and `mask` must each hold `xcdtl_num_features()` entries.
 */
enum XcdtlStatus xcdtl_graph_features(const struct XcdtlGraph *graph,
                                      double *values,
                                      uint8_t *mask);

/**
 * Modularity of the deterministic Louvain partition.
 *
 * # Safety
 * `graph` must be a live handle; `out_value` must be writable.
 */
enum XcdtlStatus xcdtl_graph_modularity(const struct XcdtlGraph *graph, double *out_value);

/**
 * Fits an isolation forest on a row-major `rows × cols` matrix.
 *
 * # Safety
 * `data` must hold `rows * cols` values; `out_forest` must be writable.
 */
enum XcdtlStatus xcdtl_iforest_fit(const double *data,
                                   size_t rows,
                                   size_t cols,
                                   uint64_t seed,
                                   struct XcdtlIForest **out_forest);

/**
 * Anomaly scores in (0, 1) for each of `rows` rows; larger is more
 * anomalous.
 *
 * # Safety
 * `data` must hold `rows * cols` values and `scores` `rows` entries.
 */
enum XcdtlStatus xcdtl_iforest_score(const struct XcdtlIForest *forest,
                                     const double *data,
                                     size_t rows,
                                     size_t cols,
                                     double *scores);

/**
 * # Safety
 * `forest` must come from this library and not be used afterwards.
 */
void xcdtl_iforest_free(struct XcdtlIForest *forest);

/**
 * ROC-AUC, average precision and F1 at `threshold` (`score > threshold`
 * is a detection). `labels[i]` is nonzero for anomalies.
 *
 * # Safety
 * `scores` and `labels` must hold `n` entries; `out_metrics` must be
 * writable.
 */
enum XcdtlStatus xcdtl_detection_metrics(const double *scores,
                                         const uint8_t *labels,
                                         size_t n,
                                         double threshold,
                                         struct XcdtlDetectionMetrics *out_metrics);

/**
 * Relative gain of a transfer metric over its non-transfer baseline.
 */
double xcdtl_transfer_gain(double m_transfer, double m_baseline);

/**
 * Invariance score from a Borda weight, a consistency `rho` and a shift
 * `delta >= 0`.
 */
double xcdtl_iit_score(double borda, double rho, double delta);

/**
 * Kruskal–Wallis H test. `values` holds the groups back to back;
 * `group_sizes` gives the length of each of the `k` groups.
 *
 * # Safety
 * `group_sizes` must hold `k` entries and `values` their sum; the output
 * pointers must be writable.
 */
enum XcdtlStatus xcdtl_kruskal_wallis(const double *values,
                                      const size_t *group_sizes,
                                      size_t k,
                                      double *out_statistic,
                                      double *out_p_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XCDTL_H */
