/**
 * cellsim
 *
 * Synthetic benchmark worlds: a grid road network, carrier-partitioned
 * towers, co-moving groups with a shared true route, and noisy observed
 * sequences. Generation is single-threaded and seed-deterministic; the
 * serialized world is byte-identical for a given seed. Also the search
 * and map-matching evaluation metrics.
 */

#ifndef CELLSIM_SIMULATE_HPP_
#define CELLSIM_SIMULATE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cellsim/ingest.hpp"
#include "cellsim/mapmatch.hpp"
#include "cellsim/roadnet.hpp"

namespace cellsim {

struct BenchmarkConfig {
  std::uint64_t seed = 1;
  int grid_rows = 10;
  int grid_cols = 10;
  double block_m = 300.0;
  double urban_density = 60.0;   // towers/km^2 inside the urban disc
  double rural_density = 20.0;   // elsewhere
  double urban_radius_frac = 0.5;  // of the half-extent
  int group_count = 10;
  int group_size_min = 2;
  int group_size_max = 8;
  int singles_count = 0;         // background solo travellers
  double trip_km_min = 3.0;
  double trip_km_max = 15.0;
  double sample_interval_min_s = 30.0;
  double sample_interval_max_s = 90.0;
  double pingpong_rate = 0.05;   // per point
  double backward_rate = 0.05;
  double drift_rate = 0.05;
  int carrier_count = 2;
  std::int64_t start_epoch = 1504224000;  // 2017-09-01 00:00:00 UTC
  double start_window_s = 7200.0;

  void validate() const;  // throws Error{validation}
};

struct TruthArc {
  SegmentId segment = 0;
  double lo = 0.0;
  double hi = 0.0;
  double t_enter = 0.0;
  double t_exit = 0.0;
};

struct MemberTruth {
  std::string member_id;
  int group_id = 0;
  std::vector<TruthArc> arcs;  // identical across a group's members
};

struct GroundTruth {
  std::vector<MemberTruth> members;
  std::vector<std::vector<std::string>> groups;  // group id -> member ids

  const MemberTruth *find(const std::string &member_id) const;
};

struct BenchmarkWorld {
  std::string network_json;
  RoadNetwork network;
  std::vector<CellTower> towers;   // densities populated
  std::vector<int> tower_carrier;  // parallel to towers
  std::vector<CellRecord> records;
  GroundTruth truth;
};

BenchmarkWorld synthesize_benchmark(const BenchmarkConfig &cfg);

/** Writes network.json, towers.csv, records.csv and truth.txt. */
void write_world(const BenchmarkWorld &world, const std::string &dir);

GroundTruth read_truth(const std::string &path);
void write_truth(const GroundTruth &truth, const std::string &path);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  double matching_precision = 0.0;
  double matching_recall = 0.0;
};

/** Per-query precision/recall against the query's co-moving group,
 *  averaged over queries; F-measure of the averages. Queries whose group
 *  has no other member are excluded and counted. */
Metrics evaluate_search(
    const std::map<std::string, std::vector<std::string>> &retrieved_per_query,
    const GroundTruth &truth, int *excluded_queries = nullptr);

/** Length-based map-matching precision/recall: correctly-matched length is
 *  the directed-segment interval intersection with the true route. */
Metrics evaluate_matching(
    const std::map<std::string, const CandidateTrajectory *> &matched,
    const GroundTruth &truth, const RoadNetwork &net);

double f_measure(double precision, double recall);

}  // namespace cellsim

#endif  // CELLSIM_SIMULATE_HPP_
