/*
 * cellsim — similar-trajectory retrieval from cellular data.
 *
 * C API of the shared library. All objects are opaque handles created and
 * destroyed here; every fallible call returns a cellsim_status and leaves
 * a thread-local message retrievable via cellsim_last_error().
 */

#ifndef CELLSIM_CELLSIM_H_
#define CELLSIM_CELLSIM_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cellsim_status {
  CELLSIM_OK = 0,
  CELLSIM_ERR_IO = 1,
  CELLSIM_ERR_PARSE = 2,
  CELLSIM_ERR_VALIDATION = 3,
  CELLSIM_ERR_CONFIG = 4,
  CELLSIM_ERR_TOO_SHORT = 5,
  CELLSIM_ERR_UNMATCHABLE = 6,
  CELLSIM_ERR_FORMAT = 7,
  CELLSIM_ERR_INVALID_ARGUMENT = 8,
  CELLSIM_ERR_INTERNAL = 9
} cellsim_status;

typedef struct cellsim_config cellsim_config;
typedef struct cellsim_network cellsim_network;
typedef struct cellsim_towers cellsim_towers;
typedef struct cellsim_store cellsim_store;

const char *cellsim_version(void);
const char *cellsim_status_name(cellsim_status status);

/* Message of the most recent failure on this thread ("" when none). */
const char *cellsim_last_error(void);

/* ---- configuration ---- */

cellsim_config *cellsim_config_create(void);
void cellsim_config_destroy(cellsim_config *config);

cellsim_status cellsim_config_load_file(cellsim_config *config, const char *path);
cellsim_status cellsim_config_set(cellsim_config *config, const char *key,
                                  const char *value);
/* Copies the value into buffer (NUL-terminated, truncating). */
cellsim_status cellsim_config_get(const cellsim_config *config, const char *key,
                                  char *buffer, size_t buffer_size);
cellsim_status cellsim_config_write_manifest(const cellsim_config *config,
                                             const char *path,
                                             const char *command);

/* ---- road network and towers ---- */

cellsim_status cellsim_network_load(const char *path, cellsim_network **out);
void cellsim_network_destroy(cellsim_network *network);
uint64_t cellsim_network_node_count(const cellsim_network *network);
uint64_t cellsim_network_segment_count(const cellsim_network *network);

cellsim_status cellsim_towers_load(const char *path,
                                   const cellsim_network *network,
                                   cellsim_towers **out);
void cellsim_towers_destroy(cellsim_towers *towers);
uint64_t cellsim_towers_count(const cellsim_towers *towers);

/* ---- candidate store ---- */

cellsim_status cellsim_store_open(const char *path, cellsim_store **out);
void cellsim_store_destroy(cellsim_store *store);
uint64_t cellsim_store_entry_count(const cellsim_store *store);

/* ---- pipeline stages ---- */

typedef struct cellsim_preprocess_stats {
  uint64_t lines;
  uint64_t malformed;
  uint64_t unknown_tower;
  uint64_t duplicates;
  uint64_t conflicts;
  uint64_t sequences_in;
  uint64_t sequences_kept;
  uint64_t screened_low_rate;
  uint64_t points_in;
  uint64_t points_kept;
} cellsim_preprocess_stats;

cellsim_status cellsim_preprocess(const cellsim_config *config,
                                  const char *records_path,
                                  const cellsim_towers *towers,
                                  const char *out_records_path,
                                  cellsim_preprocess_stats *stats);

typedef struct cellsim_match_stats {
  uint64_t sequences;
  uint64_t matched;
  uint64_t failed_too_short;
  uint64_t failed_unmatchable;
  uint64_t dropped_points;
  double elapsed_s;
} cellsim_match_stats;

cellsim_status cellsim_match(const cellsim_config *config,
                             const cellsim_network *network,
                             const cellsim_towers *towers,
                             const char *records_path, const char *store_path,
                             cellsim_match_stats *stats);

cellsim_status cellsim_index(const cellsim_network *network,
                             const char *store_path, const char *index_path);

typedef struct cellsim_query_stats {
  uint64_t entries_total;
  uint64_t entries_skipped_global;
  uint64_t pairs_evaluated;
  uint64_t pairs_cut_local;
  uint64_t results;
  double elapsed_s;
} cellsim_query_stats;

cellsim_status cellsim_query(const cellsim_config *config,
                             const cellsim_network *network,
                             const cellsim_towers *towers,
                             const cellsim_store *store, const char *query_path,
                             int query_is_gps, const char *report_path,
                             cellsim_query_stats *stats);

cellsim_status cellsim_simulate(const cellsim_config *config,
                                const char *out_dir);

typedef struct cellsim_metrics {
  double precision;
  double recall;
  double f_measure;
  double matching_precision;
  double matching_recall;
} cellsim_metrics;

cellsim_status cellsim_evaluate_search(const char *results_path,
                                       const char *truth_path,
                                       cellsim_metrics *metrics);

cellsim_status cellsim_evaluate_matching(const cellsim_network *network,
                                         const cellsim_store *store,
                                         const char *truth_path,
                                         cellsim_metrics *metrics);

typedef struct cellsim_bench_row {
  int32_t workers;
  uint64_t sequences;
  double match_seconds;
  double throughput;
} cellsim_bench_row;

typedef struct cellsim_bench_report {
  cellsim_bench_row rows[16];
  int32_t row_count;
  double query_pruned_s;
  double query_unpruned_s;
  uint64_t dataset_entries;
} cellsim_bench_report;

cellsim_status cellsim_bench(const cellsim_config *config, const char *world_dir,
                             const int32_t *worker_counts, int32_t count,
                             const char *report_path,
                             cellsim_bench_report *report);

#ifdef __cplusplus
}
#endif

#endif /* CELLSIM_CELLSIM_H_ */
