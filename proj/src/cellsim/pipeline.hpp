/**
 * cellsim
 *
 * File-to-file pipeline stages behind the CLI and the C API: preprocess,
 * match, index, query, simulate, evaluate, bench. Stages are sequential
 * barriers; within a stage, independent units (sequences, dataset
 * entries) run on the worker pool.
 */

#ifndef CELLSIM_PIPELINE_HPP_
#define CELLSIM_PIPELINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cellsim/candidate_io.hpp"
#include "cellsim/config.hpp"
#include "cellsim/simsearch.hpp"
#include "cellsim/simulate.hpp"

namespace cellsim {

struct PreprocessStats {
  std::uint64_t lines = 0;
  std::uint64_t malformed = 0;
  std::uint64_t unknown_tower = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t sequences_in = 0;
  std::uint64_t sequences_kept = 0;
  std::uint64_t screened_low_rate = 0;
  std::uint64_t points_in = 0;
  std::uint64_t points_kept = 0;
};

/** Parse, resolve towers, screen, filter; emits filtered records CSV. */
PreprocessStats preprocess_stage(const RunConfig &cfg,
                                 const std::string &records_path,
                                 const TowerMap &towers,
                                 const std::string &out_records_path);

/** In-memory variant: returns the filtered sequences. */
std::vector<TowerSequence> preprocess_sequences(const RunConfig &cfg,
                                                const std::string &records_path,
                                                const TowerMap &towers,
                                                PreprocessStats *stats = nullptr);

struct MatchStats {
  std::uint64_t sequences = 0;
  std::uint64_t matched = 0;
  std::uint64_t failed_too_short = 0;
  std::uint64_t failed_unmatchable = 0;
  std::uint64_t dropped_points = 0;
  double elapsed_s = 0.0;
};

/** Matches every sequence in the records file into a candidate store. */
MatchStats match_stage(const RunConfig &cfg, const RoadNetwork &net,
                       const TowerMap &towers, const std::string &records_path,
                       const std::string &store_path);

std::vector<CandidateSet> match_sequences(const RunConfig &cfg,
                                          const RoadNetwork &net,
                                          const TowerMap &towers,
                                          const std::vector<TowerSequence> &seqs,
                                          MatchStats *stats = nullptr);

/** Builds the global-pruning summary index for a store. */
void index_stage(const std::string &store_path, const RoadNetwork &net,
                 const std::string &out_index_path);

struct QueryStats {
  std::string query_id;
  SearchStats search;
  std::uint64_t results = 0;
  double elapsed_s = 0.0;
};

/** Runs one query (tower-sequence CSV or GPS CSV) against a store and
 *  writes the report (human summary + machine rows). */
QueryStats query_stage(const RunConfig &cfg, const RoadNetwork &net,
                       const TowerMap &towers, const CandidateStore &store,
                       const std::string &query_path, bool query_is_gps,
                       const std::string &out_report_path);

/** GPS trace (time, lon, lat rows) snapped to the network as a
 *  single-candidate set with confidence 1. */
CandidateSet snap_gps_trace(const std::string &path, const RoadNetwork &net);

/** Tower-sequence query file -> filtered, matched candidate set. */
CandidateSet match_query_file(const RunConfig &cfg, const RoadNetwork &net,
                              const TowerMap &towers, const std::string &path,
                              double *query_density = nullptr);

void simulate_stage(const RunConfig &cfg, const std::string &out_dir);

/** Search metrics from a results CSV (query_id,result_id,... rows). */
Metrics evaluate_search_file(const std::string &results_path,
                             const GroundTruth &truth);

/** Matching metrics for every store entry with ground truth. */
Metrics evaluate_matching_store(const CandidateStore &store,
                                const GroundTruth &truth, const RoadNetwork &net);

struct BenchRow {
  int workers = 0;
  std::uint64_t sequences = 0;
  double match_seconds = 0.0;
  double throughput = 0.0;  // sequences per second
};

struct BenchReport {
  std::vector<BenchRow> worker_sweep;
  double query_pruned_s = 0.0;
  double query_unpruned_s = 0.0;
  std::uint64_t dataset_entries = 0;
};

/** Worker-sweep match timing plus pruned/unpruned query timing on a
 *  synthesized world. */
BenchReport bench_stage(const RunConfig &cfg, const std::string &world_dir,
                        const std::vector<int> &worker_counts,
                        const std::string &out_report_path);

}  // namespace cellsim

#endif  // CELLSIM_PIPELINE_HPP_
