/**
 * cellsim
 *
 * HMM map matching for cell tower sequences. Emission combines the
 * projection distance with direction and road-class weights; transition
 * scores the detour of the connecting shortest path against the best
 * candidate pair of the step. Ambiguous gaps are expanded into k-shortest
 * alternatives and spliced into the top-M candidate trajectories.
 */

#ifndef CELLSIM_MAPMATCH_HPP_
#define CELLSIM_MAPMATCH_HPP_

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cellsim/ingest.hpp"
#include "cellsim/roadnet.hpp"

namespace cellsim {

struct MatchConfig {
  double beta_km = 0.0096;      // transition decay scale (km of detour delta)
  double c_speed = 0.08;        // road-class weight constant
  double sigma_scale = 0.5;     // sigma_t = sigma_scale * search range
  double w_d_floor = 0.25;      // direction weight lower clamp
  int k_paths = 4;              // alternatives per ambiguous gap
  double path_slack = 0.10;     // relative length slack for alternatives
  double single_path_tol = 0.05;  // one-path detection tolerance
  int m_max = 7;                // candidates kept per sequence
};

struct HmmState {
  int observation_index = 0;
  SegmentId segment = 0;
  Point projected_point;
  double offset_m = 0.0;
  double distance_m = 0.0;  // tower-to-projection distance
  double emission = 0.0;    // heading-free emission density (w_d = 1)
};

struct CandidateTrajectory {
  std::vector<PathOnNetwork> subpaths;  // one per observation gap
  std::vector<double> gap_scores;       // log transition per gap
  std::vector<std::int64_t> timestamps; // one per observation
  double raw_log_prob = 0.0;
  double confidence = 1.0;  // raw prob normalized to the rank-1 candidate
};

bool operator==(const CandidateTrajectory &a, const CandidateTrajectory &b);

struct CandidateSet {
  std::string sequence_id;
  std::vector<CandidateTrajectory> candidates;  // confidence-descending
};

bool operator==(const CandidateSet &a, const CandidateSet &b);

double trajectory_length_m(const CandidateTrajectory &t);

/**
 * Eq-style emission density for a candidate state. `heading` is the
 * incumbent bearing into the state's projected point; nullopt (first
 * observation or zero displacement) means no direction information.
 */
double emission_probability(const CellTower &tower, const HmmState &state,
                            std::optional<double> heading, const RoadNetwork &net,
                            const MatchConfig &cfg);
double log_emission_probability(const CellTower &tower, const HmmState &state,
                                std::optional<double> heading,
                                const RoadNetwork &net, const MatchConfig &cfg);

/**
 * Transition density between two states plus the shortest path realizing
 * it. The detour reference is the minimum network distance over all pairs
 * (previous states x candidate segments of `tower_cur`). Unreachable
 * pairs get probability 0 and no path.
 */
std::pair<double, std::optional<PathOnNetwork>> transition_probability(
    std::span<const HmmState> prev_states, const HmmState &from,
    const HmmState &to, const CellTower &tower_cur, const RoadNetwork &net,
    const MatchConfig &cfg);

/** True when the gap admits only one sensible path: the shortest path is
 *  within tolerance of the straight-line distance between the states. */
bool detect_single_path(const HmmState &from, const HmmState &to,
                        const RoadNetwork &net, const MatchConfig &cfg);

struct MatchOutcome {
  CandidateTrajectory best;
  std::vector<HmmState> states;     // chosen state per kept observation
  std::vector<double> gap_min_km;   // per-gap minimum pair distance
  double emission_log_sum = 0.0;    // emission part of raw_log_prob
  std::vector<int> dropped_observations;  // original indices
};

/**
 * Viterbi decode of the whole sequence; returns the maximum-probability
 * trajectory. Throws Error{too_short} below 2 usable points and
 * Error{unmatchable} when dropped observations make the sequence unusable.
 */
MatchOutcome match_sequence(const TowerSequence &seq, const RoadNetwork &net,
                            const TowerMap &towers, const MatchConfig &cfg);

/** Splices k-shortest alternatives into every ambiguous gap and returns
 *  the top-M trajectories by re-scored probability. */
CandidateSet expand_candidates(const TowerSequence &seq, const RoadNetwork &net,
                               const TowerMap &towers, const MatchConfig &cfg,
                               int m);
CandidateSet expand_candidates(const MatchOutcome &outcome, const std::string &id,
                               const RoadNetwork &net, const MatchConfig &cfg,
                               int m);

}  // namespace cellsim

#endif  // CELLSIM_MAPMATCH_HPP_
