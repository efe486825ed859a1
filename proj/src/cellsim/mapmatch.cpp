#include "cellsim/mapmatch.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "cellsim/error.hpp"

namespace cellsim {

bool operator==(const CandidateTrajectory &a, const CandidateTrajectory &b) {
  return a.subpaths == b.subpaths && a.gap_scores == b.gap_scores &&
         a.timestamps == b.timestamps && a.raw_log_prob == b.raw_log_prob &&
         a.confidence == b.confidence;
}

bool operator==(const CandidateSet &a, const CandidateSet &b) {
  return a.sequence_id == b.sequence_id && a.candidates == b.candidates;
}

double trajectory_length_m(const CandidateTrajectory &t) {
  double len = 0.0;
  for (const PathOnNetwork &p : t.subpaths) len += p.length_m;
  return len;
}

namespace {

PointOnSegment state_point(const HmmState &s) {
  return PointOnSegment{s.segment, s.offset_m, s.projected_point};
}

double sigma_for(const CellTower &tower, const MatchConfig &cfg) {
  return cfg.sigma_scale * search_range_m(tower.local_density);
}

double direction_weight(std::optional<double> heading, double segment_bearing,
                        const MatchConfig &cfg) {
  if (!heading) return 1.0;
  return std::max(cfg.w_d_floor,
                  angle_difference(*heading, segment_bearing) / kTwoPi);
}

double speed_weight(double speed_limit_kmh, const MatchConfig &cfg) {
  // Speed limits are normalized to the 120 km/h network maximum so the
  // weight stays in (0, 1].
  return 1.0 - cfg.c_speed * (speed_limit_kmh / 120.0);
}

double log_transition_for_length(double path_length_m, double min_km,
                                 const MatchConfig &cfg) {
  const double detour_km = std::fabs(path_length_m / 1000.0 - min_km);
  return -std::log(cfg.beta_km) - detour_km / cfg.beta_km;
}

std::optional<double> heading_between(const Point &a, const Point &b) {
  if (distance(a, b) < 1e-9) return std::nullopt;
  return bearing(a, b);
}

}  // namespace

double emission_probability(const CellTower &tower, const HmmState &state,
                            std::optional<double> heading, const RoadNetwork &net,
                            const MatchConfig &cfg) {
  return std::exp(log_emission_probability(tower, state, heading, net, cfg));
}

double log_emission_probability(const CellTower &tower, const HmmState &state,
                                std::optional<double> heading,
                                const RoadNetwork &net, const MatchConfig &cfg) {
  const RoadSegment &seg = net.segment(state.segment);
  const double sigma = sigma_for(tower, cfg);
  const double w_d = direction_weight(heading, seg.direction_angle, cfg);
  const double w_s = speed_weight(seg.speed_limit_kmh, cfg);
  const double z = (w_d * w_s * state.distance_m) / sigma;
  return -std::log(std::sqrt(kTwoPi) * sigma) - 0.5 * z * z;
}

std::pair<double, std::optional<PathOnNetwork>> transition_probability(
    std::span<const HmmState> prev_states, const HmmState &from,
    const HmmState &to, const CellTower &tower_cur, const RoadNetwork &net,
    const MatchConfig &cfg) {
  const auto cur_candidates =
      net.candidate_segments(tower_cur.position, tower_cur.local_density);
  std::vector<PointOnSegment> targets;
  targets.reserve(cur_candidates.size());
  for (const SegmentCandidate &c : cur_candidates)
    targets.push_back(PointOnSegment{c.segment, c.offset_m, c.projected});

  double min_m = kUnreachable;
  for (const HmmState &m : prev_states) {
    const auto dists = net.distances_to_many(state_point(m), targets);
    for (double d : dists) min_m = std::min(min_m, d);
  }

  const double d_from_to = net.network_distance(state_point(from), state_point(to));
  if (d_from_to >= kUnreachable || min_m >= kUnreachable)
    return {0.0, std::nullopt};

  const double detour_km = std::fabs(d_from_to - min_m) / 1000.0;
  const double prob = (1.0 / cfg.beta_km) * std::exp(-detour_km / cfg.beta_km);
  return {prob, net.shortest_path(state_point(from), state_point(to))};
}

bool detect_single_path(const HmmState &from, const HmmState &to,
                        const RoadNetwork &net, const MatchConfig &cfg) {
  const double sp = net.network_distance(state_point(from), state_point(to));
  if (sp >= kUnreachable) return false;
  const double straight = distance(from.projected_point, to.projected_point);
  return std::fabs(sp - straight) <= cfg.single_path_tol * straight + 1e-9;
}

namespace {

struct Layer {
  const CellTower *tower = nullptr;
  std::int64_t timestamp = 0;
  int original_index = 0;
  std::vector<HmmState> states;
};

std::vector<Layer> build_layers(const TowerSequence &seq, const RoadNetwork &net,
                                const TowerMap &towers, const MatchConfig &cfg,
                                std::vector<int> *dropped) {
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < seq.points.size(); ++i) {
    const SequencePoint &pt = seq.points[i];
    const CellTower *tower = towers.find(pt.tower);
    if (!tower)
      throw Error(ErrorCode::validation,
                  "sequence " + seq.user_id + " references unknown tower " +
                      std::to_string(pt.tower.lac) + "," +
                      std::to_string(pt.tower.cid));
    auto cands = net.candidate_segments(tower->position, tower->local_density);
    if (cands.empty()) {
      // One retry with a doubled radius, then the observation is dropped.
      cands = net.candidates_in_disc(
          tower->position, 2.0 * search_range_m(tower->local_density));
    }
    if (cands.empty()) {
      dropped->push_back(static_cast<int>(i));
      continue;
    }
    Layer layer;
    layer.tower = tower;
    layer.timestamp = pt.timestamp;
    layer.original_index = static_cast<int>(i);
    const int layer_index = static_cast<int>(layers.size());
    for (const SegmentCandidate &c : cands) {
      HmmState st;
      st.observation_index = layer_index;
      st.segment = c.segment;
      st.projected_point = c.projected;
      st.offset_m = c.offset_m;
      st.distance_m = c.distance_m;
      st.emission = emission_probability(*tower, st, std::nullopt, net, cfg);
      layer.states.push_back(std::move(st));
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

struct DpCell {
  double score = -std::numeric_limits<double>::infinity();
  double cum_len = 0.0;  // total chosen path length, tie-break only
  int prev = -1;
};

// Chain of segment ids for deterministic tie resolution.
std::vector<SegmentId> chain_of(const std::vector<Layer> &layers,
                                const std::vector<std::vector<DpCell>> &dp,
                                int layer, int state) {
  std::vector<SegmentId> chain;
  for (int l = layer, s = state; l >= 0; s = dp[l][s].prev, --l)
    chain.push_back(layers[l].states[s].segment);
  std::reverse(chain.begin(), chain.end());
  return chain;
}

}  // namespace

MatchOutcome match_sequence(const TowerSequence &seq, const RoadNetwork &net,
                            const TowerMap &towers, const MatchConfig &cfg) {
  MatchOutcome outcome;
  std::vector<Layer> layers = build_layers(seq, net, towers, cfg,
                                           &outcome.dropped_observations);
  if (layers.size() < 2) {
    if (!outcome.dropped_observations.empty())
      throw Error(ErrorCode::unmatchable,
                  "unmatchable point at index " +
                      std::to_string(outcome.dropped_observations.front()) +
                      ": no candidate segments within doubled search range");
    throw Error(ErrorCode::too_short,
                "too short: sequence " + seq.user_id + " has " +
                    std::to_string(layers.size()) + " usable points");
  }

  std::vector<std::vector<DpCell>> dp(layers.size());
  dp[0].resize(layers[0].states.size());
  for (std::size_t s = 0; s < layers[0].states.size(); ++s) {
    dp[0][s].score = log_emission_probability(*layers[0].tower,
                                              layers[0].states[s], std::nullopt,
                                              net, cfg);
  }

  outcome.gap_min_km.resize(layers.size() - 1, 0.0);

  for (std::size_t i = 1; i < layers.size(); ++i) {
    const Layer &prev = layers[i - 1];
    const Layer &cur = layers[i];
    dp[i].resize(cur.states.size());

    std::vector<PointOnSegment> targets;
    targets.reserve(cur.states.size());
    for (const HmmState &st : cur.states) targets.push_back(state_point(st));

    // d' matrix: rows = previous states, columns = current states.
    std::vector<std::vector<double>> dist(prev.states.size());
    double min_m = kUnreachable;
    for (std::size_t j = 0; j < prev.states.size(); ++j) {
      dist[j] = net.distances_to_many(state_point(prev.states[j]), targets);
      for (double d : dist[j]) min_m = std::min(min_m, d);
    }
    if (min_m >= kUnreachable)
      throw Error(ErrorCode::unmatchable,
                  "unmatchable point at index " +
                      std::to_string(cur.original_index) +
                      ": no road path reaches any candidate");
    outcome.gap_min_km[i - 1] = min_m / 1000.0;

    for (std::size_t k = 0; k < cur.states.size(); ++k) {
      DpCell best;
      for (std::size_t j = 0; j < prev.states.size(); ++j) {
        if (dp[i - 1][j].score == -std::numeric_limits<double>::infinity())
          continue;
        const double d = dist[j][k];
        if (d >= kUnreachable) continue;
        const double log_trans =
            log_transition_for_length(d, outcome.gap_min_km[i - 1], cfg);
        const auto heading = heading_between(prev.states[j].projected_point,
                                             cur.states[k].projected_point);
        const double log_em = log_emission_probability(*cur.tower, cur.states[k],
                                                       heading, net, cfg);
        DpCell cand;
        cand.score = dp[i - 1][j].score + log_trans + log_em;
        cand.cum_len = dp[i - 1][j].cum_len + d;
        cand.prev = static_cast<int>(j);
        bool better = false;
        if (cand.score > best.score) {
          better = true;
        } else if (cand.score == best.score && best.prev >= 0) {
          if (cand.cum_len < best.cum_len) {
            better = true;
          } else if (cand.cum_len == best.cum_len) {
            better = chain_of(layers, dp, static_cast<int>(i - 1), cand.prev) <
                     chain_of(layers, dp, static_cast<int>(i - 1), best.prev);
          }
        }
        if (better) best = cand;
      }
      dp[i][k] = best;
    }

    bool any = false;
    for (const DpCell &c : dp[i])
      if (c.score > -std::numeric_limits<double>::infinity()) any = true;
    if (!any)
      throw Error(ErrorCode::unmatchable,
                  "unmatchable point at index " +
                      std::to_string(cur.original_index) +
                      ": all transitions unreachable");
  }

  // Pick the best final state with the same tie rules, then backtrack.
  const std::size_t last = layers.size() - 1;
  int best_state = -1;
  for (std::size_t s = 0; s < dp[last].size(); ++s) {
    if (best_state < 0) {
      if (dp[last][s].score > -std::numeric_limits<double>::infinity())
        best_state = static_cast<int>(s);
      continue;
    }
    const DpCell &a = dp[last][s];
    const DpCell &b = dp[last][best_state];
    if (a.score > b.score ||
        (a.score == b.score &&
         (a.cum_len < b.cum_len ||
          (a.cum_len == b.cum_len &&
           chain_of(layers, dp, static_cast<int>(last), static_cast<int>(s)) <
               chain_of(layers, dp, static_cast<int>(last), best_state)))))
      best_state = static_cast<int>(s);
  }
  assert(best_state >= 0);

  std::vector<int> chosen(layers.size());
  for (int l = static_cast<int>(last), s = best_state; l >= 0;
       s = dp[l][s].prev, --l)
    chosen[l] = s;

  outcome.states.reserve(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l)
    outcome.states.push_back(layers[l].states[chosen[l]]);

  CandidateTrajectory best;
  best.timestamps.reserve(layers.size());
  for (const Layer &layer : layers) best.timestamps.push_back(layer.timestamp);

  // raw_log_prob is rebuilt as emissions-then-transitions so that the
  // candidate expansion, which scores splices the same way, reproduces the
  // incumbent's value bit for bit.
  double emission_sum = log_emission_probability(
      *layers[0].tower, outcome.states[0], std::nullopt, net, cfg);
  for (std::size_t i = 1; i < layers.size(); ++i) {
    const HmmState &a = outcome.states[i - 1];
    const HmmState &b = outcome.states[i];
    auto path = net.shortest_path(state_point(a), state_point(b));
    if (!path)
      throw Error(ErrorCode::internal, "chosen transition lost its path");
    const double log_trans =
        log_transition_for_length(path->length_m, outcome.gap_min_km[i - 1], cfg);
    const auto heading = heading_between(a.projected_point, b.projected_point);
    emission_sum +=
        log_emission_probability(*layers[i].tower, b, heading, net, cfg);
    best.gap_scores.push_back(log_trans);
    best.subpaths.push_back(std::move(*path));
  }
  outcome.emission_log_sum = emission_sum;
  double log_prob = emission_sum;
  for (double gs : best.gap_scores) log_prob += gs;
  best.raw_log_prob = log_prob;
  best.confidence = 1.0;
  outcome.best = std::move(best);
  return outcome;
}

namespace {

struct GapAlternatives {
  std::vector<PathOnNetwork> paths;  // length-ascending = score-descending
  std::vector<double> scores;        // log transition per path
};

// Lexicographic comparison of the concatenated segment chains of two
// combinations (used only to break exact score/length ties).
bool combo_chain_less(const std::vector<GapAlternatives> &gaps,
                      const std::vector<int> &a, const std::vector<int> &b) {
  std::size_t ga = 0, gb = 0, ia = 0, ib = 0;
  while (true) {
    while (ga < gaps.size() && ia >= gaps[ga].paths[a[ga]].segments.size()) {
      ++ga;
      ia = 0;
    }
    while (gb < gaps.size() && ib >= gaps[gb].paths[b[gb]].segments.size()) {
      ++gb;
      ib = 0;
    }
    if (ga == gaps.size() || gb == gaps.size()) return gb != gaps.size();
    const SegmentId sa = gaps[ga].paths[a[ga]].segments[ia++];
    const SegmentId sb = gaps[gb].paths[b[gb]].segments[ib++];
    if (sa != sb) return sa < sb;
  }
}

struct Combo {
  double score = 0.0;
  double total_len = 0.0;
  std::vector<int> idx;
};

}  // namespace

CandidateSet expand_candidates(const MatchOutcome &outcome, const std::string &id,
                               const RoadNetwork &net, const MatchConfig &cfg,
                               int m) {
  if (m < 1) throw Error(ErrorCode::invalid_argument, "M must be >= 1");

  const std::size_t n_gaps = outcome.best.subpaths.size();
  std::vector<GapAlternatives> gaps(n_gaps);
  for (std::size_t g = 0; g < n_gaps; ++g) {
    const HmmState &a = outcome.states[g];
    const HmmState &b = outcome.states[g + 1];
    if (detect_single_path(a, b, net, cfg)) {
      gaps[g].paths = {outcome.best.subpaths[g]};
      gaps[g].scores = {outcome.best.gap_scores[g]};
    } else {
      gaps[g].paths = net.k_shortest_paths(state_point(a), state_point(b),
                                           cfg.k_paths, cfg.path_slack);
      assert(!gaps[g].paths.empty());
      for (const PathOnNetwork &p : gaps[g].paths)
        gaps[g].scores.push_back(
            log_transition_for_length(p.length_m, outcome.gap_min_km[g], cfg));
    }
  }

  const double emission_part = outcome.emission_log_sum;

  // Best-first walk of the per-gap alternative grid: scores are additive
  // over gaps, so the top-M combinations pop in exact order.
  const auto make_combo = [&](std::vector<int> idx) {
    Combo c;
    c.idx = std::move(idx);
    c.score = emission_part;
    for (std::size_t g = 0; g < n_gaps; ++g) {
      c.score += gaps[g].scores[c.idx[g]];
      c.total_len += gaps[g].paths[c.idx[g]].length_m;
    }
    return c;
  };
  const auto combo_after = [&](const Combo &a, const Combo &b) {
    if (a.score != b.score) return a.score < b.score;  // max-heap on score
    if (a.total_len != b.total_len) return a.total_len > b.total_len;
    return combo_chain_less(gaps, b.idx, a.idx);
  };

  std::priority_queue<Combo, std::vector<Combo>, decltype(combo_after)> heap(
      combo_after);
  std::set<std::vector<int>> seen;
  std::vector<int> zero(n_gaps, 0);
  heap.push(make_combo(zero));
  seen.insert(zero);

  CandidateSet set;
  set.sequence_id = id;

  const auto emit = [&](const Combo &combo) {
    CandidateTrajectory traj;
    traj.timestamps = outcome.best.timestamps;
    for (std::size_t g = 0; g < n_gaps; ++g) {
      traj.subpaths.push_back(gaps[g].paths[combo.idx[g]]);
      traj.gap_scores.push_back(gaps[g].scores[combo.idx[g]]);
    }
    traj.raw_log_prob = combo.score;
    set.candidates.push_back(std::move(traj));
  };

  // Exact (score, length) ties are buffered and ordered by segment chain:
  // the lattice walk alone pops ties in discovery order, not chain order.
  std::vector<Combo> tied;
  const auto flush_tied = [&]() {
    std::sort(tied.begin(), tied.end(), [&](const Combo &a, const Combo &b) {
      return combo_chain_less(gaps, a.idx, b.idx);
    });
    for (const Combo &c : tied)
      if (static_cast<int>(set.candidates.size()) < m) emit(c);
    tied.clear();
  };

  while (!heap.empty() && static_cast<int>(set.candidates.size()) < m) {
    const Combo combo = heap.top();
    heap.pop();
    if (!tied.empty() && (combo.score != tied.front().score ||
                          combo.total_len != tied.front().total_len)) {
      flush_tied();
      if (static_cast<int>(set.candidates.size()) >= m) break;
    }
    tied.push_back(combo);

    for (std::size_t g = 0; g < n_gaps; ++g) {
      if (combo.idx[g] + 1 >= static_cast<int>(gaps[g].paths.size())) continue;
      std::vector<int> next = combo.idx;
      ++next[g];
      if (seen.insert(next).second) heap.push(make_combo(std::move(next)));
    }
  }
  flush_tied();

  const double top = set.candidates.front().raw_log_prob;
  for (CandidateTrajectory &t : set.candidates)
    t.confidence = std::exp(t.raw_log_prob - top);
  return set;
}

CandidateSet expand_candidates(const TowerSequence &seq, const RoadNetwork &net,
                               const TowerMap &towers, const MatchConfig &cfg,
                               int m) {
  const MatchOutcome outcome = match_sequence(seq, net, towers, cfg);
  return expand_candidates(outcome, seq.user_id, net, cfg, m);
}

}  // namespace cellsim
