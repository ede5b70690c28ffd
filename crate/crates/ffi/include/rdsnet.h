#ifndef RDSNET_H
#define RDSNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; validation and undefined match the command-line exit codes.
 */
typedef enum RdsnetStatus {
  RDSNET_STATUS_OK = 0,
  RDSNET_STATUS_INTERNAL = 1,
  RDSNET_STATUS_VALIDATION = 2,
  RDSNET_STATUS_UNDEFINED = 3,
  RDSNET_STATUS_NULL_POINTER = 4,
  RDSNET_STATUS_PANIC = 5,
} RdsnetStatus;

typedef struct RdsnetNetwork RdsnetNetwork;

typedef struct RdsnetSample RdsnetSample;

/**
 * Total estimate with its bootstrap and delta-method intervals.
 */
typedef struct RdsnetTotal {
  double mu;
  double total;
  double se;
  double ci_low;
  double ci_high;
  double delta_ci_low;
  double delta_ci_high;
  double level;
  size_t n;
  size_t dropped_replicates;
} RdsnetTotal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *rdsnet_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rdsnet_version(void);

/**
 * N_B·mu/(1 − mu).
 *
 * # Safety
 * `out` must be null or point to writable memory for one double.
 */
enum RdsnetStatus rdsnet_total_from_known(double mu, uint64_t n_b, double *out);

/**
 * Simulates the reference network (597 unsheltered, 1,438 sheltered) from `seed`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one handle.
 */
enum RdsnetStatus rdsnet_network_reference(uint64_t seed, struct RdsnetNetwork **out);

/**
 * Reads a network from an edge list and a node attribute table.
 *
 * # Safety
 * Paths must be null or NUL-terminated strings; `out` must be null or writable.
 */
enum RdsnetStatus rdsnet_network_read_csv(const char *edges_path,
                                          const char *nodes_path,
                                          struct RdsnetNetwork **out);

/**
 * Node count, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t rdsnet_network_node_count(const struct RdsnetNetwork *net);

/**
 * Edge count, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t rdsnet_network_edge_count(const struct RdsnetNetwork *net);

/**
 * Writes the unsheltered and sheltered node counts to `out[0]` and `out[1]`.
 *
 * # Safety
 * `net` must be null or a live handle; `out` must be null or hold two elements.
 */
enum RdsnetStatus rdsnet_network_group_sizes(const struct RdsnetNetwork *net, size_t *out);

/**
 * # Safety
 * `net` must be null or a handle not yet freed.
 */
void rdsnet_network_free(struct RdsnetNetwork *net);

/**
 * Coupon-limited recruitment from `n_seeds` degree-proportional seeds.
 *
 * # Safety
 * `net` must be null or a live handle; `out` must be null or writable.
 */
enum RdsnetStatus rdsnet_simulate_rds(const struct RdsnetNetwork *net,
                                      size_t n_seeds,
                                      size_t target_n,
                                      uint32_t coupon_limit,
                                      uint64_t seed,
                                      struct RdsnetSample **out);

/**
 * Reads an RDS sample table.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or writable.
 */
enum RdsnetStatus rdsnet_sample_read_csv(const char *path,
                                         uint32_t coupon_limit,
                                         struct RdsnetSample **out);

/**
 * # Safety
 * `sample` must be null or a live handle; `path` must be null or a NUL-terminated string.
 */
enum RdsnetStatus rdsnet_sample_write_csv(const struct RdsnetSample *sample, const char *path);

/**
 * Respondent count, or 0 for a null handle.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
size_t rdsnet_sample_len(const struct RdsnetSample *sample);

/**
 * Deepest recruitment wave, or 0 for a null handle.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
uint32_t rdsnet_sample_max_wave(const struct RdsnetSample *sample);

/**
 * # Safety
 * `sample` must be null or a handle not yet freed.
 */
void rdsnet_sample_free(struct RdsnetSample *sample);

/**
 * Unsheltered total given `n_b` sheltered, with a tree-bootstrap interval.
 *
 * # Safety
 * `sample` must be null or a live handle; `out` must be null or writable.
 */
enum RdsnetStatus rdsnet_estimate_total(const struct RdsnetSample *sample,
                                        uint64_t n_b,
                                        size_t replicates,
                                        double level,
                                        uint64_t seed,
                                        struct RdsnetTotal *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDSNET_H */
