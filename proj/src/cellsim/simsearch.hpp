/**
 * cellsim
 *
 * Similar-trajectory search: time alignment on the road network,
 * window-overlap similarity over candidate pairs, adaptive candidate
 * counts, and the two pruning schemes (global endpoint pruning, local
 * optimistic-bound pruning). Both prunings are exact: enabling them never
 * changes which entries clear the threshold.
 */

#ifndef CELLSIM_SIMSEARCH_HPP_
#define CELLSIM_SIMSEARCH_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cellsim/candidate_io.hpp"
#include "cellsim/mapmatch.hpp"

namespace cellsim {

struct SearchConfig {
  double tau = 0.85;          // similarity threshold
  double epsilon0 = 2.0;      // base global-prune radius (dimensionless)
  double space_scale_m = 1000.0;
  double time_scale_s = 600.0;
  bool local_pruning = true;
  bool global_pruning = true;
  int m_cap = 7;              // adapt_m saturation
  // trajectory-length table: level upper bounds (km) -> M
  std::vector<std::pair<double, int>> m_table = {
      {3.0, 2}, {6.0, 3}, {9.0, 5}, {12.0, 6}, {15.0, 7}};
};

/**
 * A candidate trajectory with its timestamps spread along the path:
 * piecewise-constant speed between consecutive anchors, so any instant in
 * the span maps to one path offset.
 */
class TimedTrajectory {
public:
  struct Arc {
    SegmentId segment;
    double seg_lo;      // offsets on the segment, travel direction
    double seg_hi;
    double cum_start;   // path offset where this arc begins
  };

  static TimedTrajectory from_candidate(const CandidateTrajectory &cand,
                                        const RoadNetwork &net,
                                        int *collapsed_anchors = nullptr);

  double length_m() const { return total_length_; }
  double confidence() const { return confidence_; }
  std::int64_t span_begin() const { return anchor_times_.front(); }
  std::int64_t span_end() const { return anchor_times_.back(); }
  const std::vector<double> &anchor_offsets() const { return anchor_offsets_; }
  const std::vector<std::int64_t> &anchor_times() const { return anchor_times_; }

  /** Path offset at time t; clamps to nothing — out-of-span returns false. */
  bool offset_at(double t, double *offset) const;

  /** Arcs traversed between two path offsets (0 <= a <= b <= length). */
  std::vector<SegmentInterval> arcs_between(double off0, double off1) const;

  /** Arcs traversed during [t0, t1] clipped to the trajectory span;
   *  empty when the span misses the window entirely. */
  std::vector<SegmentInterval> arcs_during(double t0, double t1) const;

private:
  std::vector<Arc> arcs_;
  std::vector<double> anchor_offsets_;
  std::vector<std::int64_t> anchor_times_;
  double total_length_ = 0.0;
  double confidence_ = 1.0;
};

/** Shared directed road length of Q and T inside [t0, t1]. */
double window_overlap(const TimedTrajectory &q, const TimedTrajectory &t,
                      double t0, double t1);

/** Eq-7 style similarity: confidences times the overlap ratio over the
 *  query's anchor windows. Throws Error{invalid_argument} on an empty query. */
double pair_similarity(const TimedTrajectory &q, const TimedTrajectory &t);

struct BestPair {
  double similarity = 0.0;
  int query_rank = 0;
  int entry_rank = 0;
  std::uint64_t pairs_cut = 0;   // pairs abandoned by local pruning
  bool complete = false;         // true when any pair ran to completion
};

/**
 * Maximum pair similarity over the M x M candidate grid. With local
 * pruning on, a pair stops as soon as its optimistic bound drops below
 * max(best so far, prune_floor); such a pair can neither win nor clear
 * the floor, so above-floor results are identical to exhaustive
 * evaluation.
 */
BestPair best_pair_similarity(std::span<const TimedTrajectory> query,
                              std::span<const TimedTrajectory> entry,
                              const SearchConfig &cfg, double prune_floor);

/** Level table lookup of M for a query length, capped at m_cap. */
int adapt_m(double query_length_m, const SearchConfig &cfg);

/** Endpoint test of global pruning: keep when both the start pair and the
 *  end pair are within the normalized space-time radius. */
bool global_prune_keep(const EntrySummary &query, const EntrySummary &entry,
                       const SearchConfig &cfg, double density_per_km2);

struct QueryResult {
  std::string id;
  double similarity = 0.0;
  int query_rank = 0;
  int entry_rank = 0;
  bool above_threshold = false;
  std::uint64_t pairs_cut = 0;
};

struct SearchStats {
  std::uint64_t entries_total = 0;
  std::uint64_t entries_skipped_global = 0;
  std::uint64_t pairs_evaluated = 0;
  std::uint64_t pairs_cut_local = 0;
};

struct SearchReport {
  std::vector<QueryResult> results;  // similarity desc, id asc; all above tau
  SearchStats stats;
};

class SearchDataset {
public:
  SearchDataset(const std::vector<CandidateSet> &sets, const RoadNetwork &net);

  std::size_t size() const { return aligned_.size(); }
  const std::vector<TimedTrajectory> &aligned(std::size_t i) const {
    return aligned_[i];
  }
  const EntrySummary &summary(std::size_t i) const { return summaries_[i]; }

private:
  std::vector<std::vector<TimedTrajectory>> aligned_;
  std::vector<EntrySummary> summaries_;
};

/** Threshold query over the whole dataset. `query_density` drives the
 *  global-pruning radius. `workers` parallelizes the per-entry loop. */
SearchReport search(const CandidateSet &query, double query_density,
                    const SearchDataset &dataset, const RoadNetwork &net,
                    const SearchConfig &cfg, int workers = 1);

}  // namespace cellsim

#endif  // CELLSIM_SIMSEARCH_HPP_
