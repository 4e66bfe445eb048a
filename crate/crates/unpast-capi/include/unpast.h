/* C interface of the unpast biclustering library. */

#ifndef UNPAST_H
#define UNPAST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum {
  UNPAST_STATUS_OK = 0,
  UNPAST_STATUS_NULL_ARGUMENT = 1,
  UNPAST_STATUS_INVALID_ARGUMENT = 2,
  UNPAST_STATUS_PARSE_ERROR = 3,
  UNPAST_STATUS_IO_ERROR = 4,
  UNPAST_STATUS_PANIC = 5,
} UnpastStatus;

/**
 * 1-D split method.
 */
typedef enum {
  UNPAST_METHOD_KMEANS = 0,
  UNPAST_METHOD_WARD = 1,
  UNPAST_METHOD_GMM = 2,
} UnpastMethod;

/**
 * Feature grouping algorithm.
 */
typedef enum {
  UNPAST_CLUSTERING_LOUVAIN = 0,
  UNPAST_CLUSTERING_TOM = 1,
} UnpastClustering;

/**
 * Whether up- and down-regulated features form separate graphs.
 */
typedef enum {
  UNPAST_DIRECTIONS_SEPARATE = 0,
  UNPAST_DIRECTIONS_JOINT = 1,
} UnpastDirections;

/**
 * Direction of a bicluster relative to the background.
 */
typedef enum {
  UNPAST_DIRECTION_UP = 0,
  UNPAST_DIRECTION_DOWN = 1,
  UNPAST_DIRECTION_MIXED = 2,
} UnpastDirection;

/**
 * An expression matrix handle.
 */
typedef struct UnpastMatrix UnpastMatrix;

/**
 * A list of biclusters produced by `unpast_run`.
 */
typedef struct UnpastResult UnpastResult;

/**
 * Pipeline options; initialize with `unpast_options_default` and adjust.
 */
typedef struct {
  UnpastMethod binarization;
  UnpastClustering clustering;
  UnpastDirections directions;
  /**
   * Empirical null p-value cutoff for binarized features.
   */
  double pval;
  /**
   * Smallest admissible sample group.
   */
  size_t min_n_samples;
  /**
   * Jaccard threshold for feature-graph edges.
   */
  double edge_threshold;
  /**
   * Louvain resolution.
   */
  double resolution;
  /**
   * Nonzero runs the differential-expression verification pass.
   */
  int32_t run_de;
  double de_lfc;
  double de_pval;
  uint64_t seed;
  /**
   * Independent runs with stepped seeds; more than one reduces the
   * result to consensus biclusters.
   */
  size_t n_runs;
} UnpastOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on the calling thread.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *unpast_last_error(void);

/**
 * Library version as a static string.
 */
const char *unpast_version(void);

/**
 * Reads a features-by-samples TSV matrix into a new handle.
 */
UnpastStatus unpast_matrix_read_tsv(const char *path, UnpastMatrix **out);

/**
 * Builds a matrix from row-major values and NUL-terminated id arrays.
 * All data is copied; the caller keeps ownership of its buffers.
 */
UnpastStatus unpast_matrix_new(const char *const *feature_ids,
                               size_t n_features,
                               const char *const *sample_ids,
                               size_t n_samples,
                               const double *values,
                               UnpastMatrix **out);

size_t unpast_matrix_n_features(const UnpastMatrix *matrix);

size_t unpast_matrix_n_samples(const UnpastMatrix *matrix);

/**
 * Feature id at `index`; NULL when out of range. The pointer stays valid
 * while the matrix handle lives.
 */
const char *unpast_matrix_feature_id(const UnpastMatrix *matrix, size_t index);

/**
 * Sample id at `index`; NULL when out of range. The pointer stays valid
 * while the matrix handle lives.
 */
const char *unpast_matrix_sample_id(const UnpastMatrix *matrix, size_t index);

void unpast_matrix_free(UnpastMatrix *matrix);

/**
 * The pipeline defaults: kmeans binarization, Louvain grouping at
 * resolution 1, separate directions, p 0.01, groups of at least 5,
 * edge threshold 1/3, verification pass on, seed 0, one run.
 */
UnpastStatus unpast_options_default(UnpastOptions *options);

/**
 * Runs the pipeline on `matrix`. With `n_runs > 1` the result holds the
 * consensus biclusters of the stepped-seed runs.
 */
UnpastStatus unpast_run(const UnpastMatrix *matrix,
                        const UnpastOptions *options,
                        UnpastResult **out);

size_t unpast_result_len(const UnpastResult *result);

/**
 * Signal-to-noise ratio of bicluster `index`; NaN on a bad handle/index.
 */
double unpast_bicluster_snr(const UnpastResult *result, size_t index);

size_t unpast_bicluster_n_features(const UnpastResult *result, size_t index);

size_t unpast_bicluster_n_samples(const UnpastResult *result, size_t index);

/**
 * Direction of bicluster `index`; up on a bad handle/index (check first).
 */
UnpastDirection unpast_bicluster_direction(const UnpastResult *result, size_t index);

/**
 * Copies the feature row indices of bicluster `index` into `out`
 * (capacity `cap`, must be at least `unpast_bicluster_n_features`).
 */
UnpastStatus unpast_bicluster_features(const UnpastResult *result,
                                       size_t index,
                                       size_t *out,
                                       size_t cap);

/**
 * Copies the per-feature signs (+1 or -1) of bicluster `index` into
 * `out`, aligned with `unpast_bicluster_features`.
 */
UnpastStatus unpast_bicluster_feature_signs(const UnpastResult *result,
                                            size_t index,
                                            int8_t *out,
                                            size_t cap);

/**
 * Copies the sample column indices of bicluster `index` into `out`
 * (capacity `cap`, must be at least `unpast_bicluster_n_samples`).
 */
UnpastStatus unpast_bicluster_samples(const UnpastResult *result,
                                      size_t index,
                                      uint32_t *out,
                                      size_t cap);

/**
 * Writes the result as TSV with ids resolved against `matrix`.
 */
UnpastStatus unpast_result_write_tsv(const UnpastResult *result,
                                     const UnpastMatrix *matrix,
                                     const char *path);

void unpast_result_free(UnpastResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNPAST_H */
