/**
 * cellsim
 *
 * C API implementation: opaque handles wrap the core types, exceptions
 * become status codes, messages land in a thread-local slot.
 */

#include "cellsim/cellsim.h"

#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "cellsim/candidate_io.hpp"
#include "cellsim/config.hpp"
#include "cellsim/error.hpp"
#include "cellsim/pipeline.hpp"

using namespace cellsim;

struct cellsim_config {
  RunConfig cfg;
};
struct cellsim_network {
  RoadNetwork net;
};
struct cellsim_towers {
  TowerMap map;
};
struct cellsim_store {
  CandidateStore store;
};

namespace {

thread_local std::string g_last_error;

cellsim_status status_of(const Error &e) {
  switch (e.code()) {
    case ErrorCode::io: return CELLSIM_ERR_IO;
    case ErrorCode::parse: return CELLSIM_ERR_PARSE;
    case ErrorCode::validation: return CELLSIM_ERR_VALIDATION;
    case ErrorCode::config: return CELLSIM_ERR_CONFIG;
    case ErrorCode::too_short: return CELLSIM_ERR_TOO_SHORT;
    case ErrorCode::unmatchable: return CELLSIM_ERR_UNMATCHABLE;
    case ErrorCode::format: return CELLSIM_ERR_FORMAT;
    case ErrorCode::invalid_argument: return CELLSIM_ERR_INVALID_ARGUMENT;
    case ErrorCode::internal: return CELLSIM_ERR_INTERNAL;
  }
  return CELLSIM_ERR_INTERNAL;
}

template <typename Fn>
cellsim_status guarded(Fn &&fn) {
  try {
    fn();
    g_last_error.clear();
    return CELLSIM_OK;
  } catch (const Error &e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::exception &e) {
    g_last_error = e.what();
    return CELLSIM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CELLSIM_ERR_INTERNAL;
  }
}

cellsim_status require(bool ok, const char *what) {
  if (ok) return CELLSIM_OK;
  g_last_error = what;
  return CELLSIM_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char *cellsim_version(void) { return version_string(); }

const char *cellsim_status_name(cellsim_status status) {
  switch (status) {
    case CELLSIM_OK: return "ok";
    case CELLSIM_ERR_IO: return "io";
    case CELLSIM_ERR_PARSE: return "parse";
    case CELLSIM_ERR_VALIDATION: return "validation";
    case CELLSIM_ERR_CONFIG: return "config";
    case CELLSIM_ERR_TOO_SHORT: return "too_short";
    case CELLSIM_ERR_UNMATCHABLE: return "unmatchable";
    case CELLSIM_ERR_FORMAT: return "format";
    case CELLSIM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CELLSIM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char *cellsim_last_error(void) { return g_last_error.c_str(); }

cellsim_config *cellsim_config_create(void) { return new cellsim_config(); }

void cellsim_config_destroy(cellsim_config *config) { delete config; }

cellsim_status cellsim_config_load_file(cellsim_config *config, const char *path) {
  if (auto s = require(config && path, "null argument")) return s;
  return guarded([&] { config->cfg.load_file(path); });
}

cellsim_status cellsim_config_set(cellsim_config *config, const char *key,
                                  const char *value) {
  if (auto s = require(config && key && value, "null argument")) return s;
  return guarded([&] { config->cfg.set(key, value); });
}

cellsim_status cellsim_config_get(const cellsim_config *config, const char *key,
                                  char *buffer, size_t buffer_size) {
  if (auto s = require(config && key && buffer && buffer_size > 0, "null argument"))
    return s;
  return guarded([&] {
    const std::string value = config->cfg.get(key);
    std::strncpy(buffer, value.c_str(), buffer_size - 1);
    buffer[buffer_size - 1] = '\0';
  });
}

cellsim_status cellsim_config_write_manifest(const cellsim_config *config,
                                             const char *path,
                                             const char *command) {
  if (auto s = require(config && path, "null argument")) return s;
  return guarded([&] {
    std::map<std::string, std::string> extra;
    if (command) extra["command"] = command;
    config->cfg.write_manifest(path, extra);
  });
}

cellsim_status cellsim_network_load(const char *path, cellsim_network **out) {
  if (auto s = require(path && out, "null argument")) return s;
  return guarded([&] {
    auto handle = std::make_unique<cellsim_network>();
    handle->net = RoadNetwork::load(path);
    *out = handle.release();
  });
}

void cellsim_network_destroy(cellsim_network *network) { delete network; }

uint64_t cellsim_network_node_count(const cellsim_network *network) {
  return network ? network->net.nodes().size() : 0;
}

uint64_t cellsim_network_segment_count(const cellsim_network *network) {
  return network ? network->net.segments().size() : 0;
}

cellsim_status cellsim_towers_load(const char *path,
                                   const cellsim_network *network,
                                   cellsim_towers **out) {
  if (auto s = require(path && network && out, "null argument")) return s;
  return guarded([&] {
    auto handle = std::make_unique<cellsim_towers>();
    handle->map = TowerMap::load(path, network->net.frame());
    *out = handle.release();
  });
}

void cellsim_towers_destroy(cellsim_towers *towers) { delete towers; }

uint64_t cellsim_towers_count(const cellsim_towers *towers) {
  return towers ? towers->map.size() : 0;
}

cellsim_status cellsim_store_open(const char *path, cellsim_store **out) {
  if (auto s = require(path && out, "null argument")) return s;
  return guarded([&] {
    auto handle = std::make_unique<cellsim_store>();
    handle->store = CandidateStore::open(path);
    *out = handle.release();
  });
}

void cellsim_store_destroy(cellsim_store *store) { delete store; }

uint64_t cellsim_store_entry_count(const cellsim_store *store) {
  return store ? store->store.entries().size() : 0;
}

cellsim_status cellsim_preprocess(const cellsim_config *config,
                                  const char *records_path,
                                  const cellsim_towers *towers,
                                  const char *out_records_path,
                                  cellsim_preprocess_stats *stats) {
  if (auto s = require(config && records_path && towers && out_records_path,
                       "null argument"))
    return s;
  return guarded([&] {
    const PreprocessStats st =
        preprocess_stage(config->cfg, records_path, towers->map, out_records_path);
    if (stats) {
      *stats = cellsim_preprocess_stats{st.lines,        st.malformed,
                                        st.unknown_tower, st.duplicates,
                                        st.conflicts,    st.sequences_in,
                                        st.sequences_kept, st.screened_low_rate,
                                        st.points_in,    st.points_kept};
    }
  });
}

cellsim_status cellsim_match(const cellsim_config *config,
                             const cellsim_network *network,
                             const cellsim_towers *towers,
                             const char *records_path, const char *store_path,
                             cellsim_match_stats *stats) {
  if (auto s = require(config && network && towers && records_path && store_path,
                       "null argument"))
    return s;
  return guarded([&] {
    const MatchStats st = match_stage(config->cfg, network->net, towers->map,
                                      records_path, store_path);
    if (stats) {
      *stats = cellsim_match_stats{st.sequences, st.matched, st.failed_too_short,
                                   st.failed_unmatchable, st.dropped_points,
                                   st.elapsed_s};
    }
  });
}

cellsim_status cellsim_index(const cellsim_network *network,
                             const char *store_path, const char *index_path) {
  if (auto s = require(network && store_path && index_path, "null argument"))
    return s;
  return guarded([&] { index_stage(store_path, network->net, index_path); });
}

cellsim_status cellsim_query(const cellsim_config *config,
                             const cellsim_network *network,
                             const cellsim_towers *towers,
                             const cellsim_store *store, const char *query_path,
                             int query_is_gps, const char *report_path,
                             cellsim_query_stats *stats) {
  if (auto s = require(config && network && towers && store && query_path &&
                           report_path,
                       "null argument"))
    return s;
  return guarded([&] {
    const QueryStats st =
        query_stage(config->cfg, network->net, towers->map, store->store,
                    query_path, query_is_gps != 0, report_path);
    if (stats) {
      *stats = cellsim_query_stats{st.search.entries_total,
                                   st.search.entries_skipped_global,
                                   st.search.pairs_evaluated,
                                   st.search.pairs_cut_local,
                                   st.results,
                                   st.elapsed_s};
    }
  });
}

cellsim_status cellsim_simulate(const cellsim_config *config, const char *out_dir) {
  if (auto s = require(config && out_dir, "null argument")) return s;
  return guarded([&] { simulate_stage(config->cfg, out_dir); });
}

cellsim_status cellsim_evaluate_search(const char *results_path,
                                       const char *truth_path,
                                       cellsim_metrics *metrics) {
  if (auto s = require(results_path && truth_path && metrics, "null argument"))
    return s;
  return guarded([&] {
    const GroundTruth truth = read_truth(truth_path);
    const Metrics m = evaluate_search_file(results_path, truth);
    *metrics = cellsim_metrics{m.precision, m.recall, m.f_measure,
                               m.matching_precision, m.matching_recall};
  });
}

cellsim_status cellsim_evaluate_matching(const cellsim_network *network,
                                         const cellsim_store *store,
                                         const char *truth_path,
                                         cellsim_metrics *metrics) {
  if (auto s = require(network && store && truth_path && metrics, "null argument"))
    return s;
  return guarded([&] {
    const GroundTruth truth = read_truth(truth_path);
    const Metrics m = evaluate_matching_store(store->store, truth, network->net);
    *metrics = cellsim_metrics{m.precision, m.recall, m.f_measure,
                               m.matching_precision, m.matching_recall};
  });
}

cellsim_status cellsim_bench(const cellsim_config *config, const char *world_dir,
                             const int32_t *worker_counts, int32_t count,
                             const char *report_path,
                             cellsim_bench_report *report) {
  if (auto s = require(config && world_dir && worker_counts && count > 0 &&
                           count <= 16 && report_path,
                       "null argument or too many worker counts"))
    return s;
  return guarded([&] {
    std::vector<int> workers(worker_counts, worker_counts + count);
    const BenchReport rep =
        bench_stage(config->cfg, world_dir, workers, report_path);
    if (report) {
      std::memset(report, 0, sizeof *report);
      report->row_count = static_cast<int32_t>(rep.worker_sweep.size());
      for (std::size_t i = 0; i < rep.worker_sweep.size() && i < 16; ++i) {
        report->rows[i] = cellsim_bench_row{rep.worker_sweep[i].workers,
                                            rep.worker_sweep[i].sequences,
                                            rep.worker_sweep[i].match_seconds,
                                            rep.worker_sweep[i].throughput};
      }
      report->query_pruned_s = rep.query_pruned_s;
      report->query_unpruned_s = rep.query_unpruned_s;
      report->dataset_entries = rep.dataset_entries;
    }
  });
}

}  // extern "C"
