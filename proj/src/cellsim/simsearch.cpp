#include "cellsim/simsearch.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>

#include "cellsim/error.hpp"
#include "cellsim/worker_pool.hpp"

namespace cellsim {

TimedTrajectory TimedTrajectory::from_candidate(const CandidateTrajectory &cand,
                                                const RoadNetwork &net,
                                                int *collapsed_anchors) {
  if (cand.timestamps.size() < 2)
    throw Error(ErrorCode::invalid_argument,
                "timed trajectory needs at least 2 anchors");

  TimedTrajectory out;
  out.confidence_ = cand.confidence;

  double cum = 0.0;
  out.anchor_offsets_.push_back(0.0);
  out.anchor_times_.push_back(cand.timestamps.front());
  int collapsed = 0;

  for (std::size_t g = 0; g < cand.subpaths.size(); ++g) {
    const PathOnNetwork &p = cand.subpaths[g];
    for (std::size_t s = 0; s < p.segments.size(); ++s) {
      const RoadSegment &seg = net.segment(p.segments[s]);
      double lo = (s == 0) ? p.entry_offset_m : 0.0;
      double hi = (s + 1 == p.segments.size()) ? p.exit_offset_m : seg.length_m;
      Arc arc{p.segments[s], lo, hi, cum};
      cum += hi - lo;
      out.arcs_.push_back(arc);
    }
    const std::int64_t t = cand.timestamps[g + 1];
    if (t == out.anchor_times_.back()) {
      // Degenerate zero-duration gap: keep the earlier anchor, count it.
      ++collapsed;
      out.anchor_offsets_.back() = cum;
      continue;
    }
    out.anchor_offsets_.push_back(cum);
    out.anchor_times_.push_back(t);
  }
  out.total_length_ = cum;
  if (collapsed_anchors) *collapsed_anchors = collapsed;
  if (out.anchor_times_.size() < 2)
    throw Error(ErrorCode::invalid_argument,
                "timed trajectory collapsed to a single instant");
  return out;
}

bool TimedTrajectory::offset_at(double t, double *offset) const {
  if (t < static_cast<double>(anchor_times_.front()) ||
      t > static_cast<double>(anchor_times_.back()))
    return false;
  auto it = std::upper_bound(anchor_times_.begin(), anchor_times_.end(),
                             static_cast<std::int64_t>(std::floor(t)));
  std::size_t hi = static_cast<std::size_t>(it - anchor_times_.begin());
  if (hi >= anchor_times_.size()) hi = anchor_times_.size() - 1;
  if (hi == 0) hi = 1;
  const std::size_t lo = hi - 1;
  const double t0 = static_cast<double>(anchor_times_[lo]);
  const double t1 = static_cast<double>(anchor_times_[hi]);
  const double f = t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
  *offset = anchor_offsets_[lo] + f * (anchor_offsets_[hi] - anchor_offsets_[lo]);
  return true;
}

std::vector<SegmentInterval> TimedTrajectory::arcs_between(double off0,
                                                           double off1) const {
  std::vector<SegmentInterval> out;
  if (off1 <= off0) return out;
  for (const Arc &arc : arcs_) {
    const double arc_len = arc.seg_hi - arc.seg_lo;
    const double a = std::max(off0, arc.cum_start);
    const double b = std::min(off1, arc.cum_start + arc_len);
    if (b <= a) continue;
    out.push_back(SegmentInterval{arc.segment, arc.seg_lo + (a - arc.cum_start),
                                  arc.seg_lo + (b - arc.cum_start)});
  }
  return out;
}

std::vector<SegmentInterval> TimedTrajectory::arcs_during(double t0,
                                                          double t1) const {
  std::vector<SegmentInterval> out;
  const double a = std::max(t0, static_cast<double>(anchor_times_.front()));
  const double b = std::min(t1, static_cast<double>(anchor_times_.back()));
  if (b <= a) return out;
  double off0 = 0.0, off1 = 0.0;
  if (!offset_at(a, &off0) || !offset_at(b, &off1)) return out;
  return arcs_between(off0, off1);
}

double window_overlap(const TimedTrajectory &q, const TimedTrajectory &t,
                      double t0, double t1) {
  if (t1 <= t0)
    throw Error(ErrorCode::invalid_argument, "window must satisfy t0 < t1");
  const auto q_arcs = q.arcs_during(t0, t1);
  if (q_arcs.empty()) return 0.0;
  const auto t_arcs = t.arcs_during(t0, t1);
  if (t_arcs.empty()) return 0.0;
  return interval_overlap_length(q_arcs, t_arcs);
}

double pair_similarity(const TimedTrajectory &q, const TimedTrajectory &t) {
  if (q.length_m() <= 0.0)
    throw Error(ErrorCode::invalid_argument, "empty query");
  double overlap = 0.0;
  const auto &times = q.anchor_times();
  for (std::size_t i = 1; i < times.size(); ++i)
    overlap += window_overlap(q, t, static_cast<double>(times[i - 1]),
                              static_cast<double>(times[i]));
  assert(overlap <= q.length_m() * (1.0 + 1e-9));
  const double sim = q.confidence() * t.confidence() * overlap / q.length_m();
  return std::clamp(sim, 0.0, 1.0);
}

BestPair best_pair_similarity(std::span<const TimedTrajectory> query,
                              std::span<const TimedTrajectory> entry,
                              const SearchConfig &cfg, double prune_floor) {
  BestPair best;
  best.similarity = 0.0;
  double best_seen = -1.0;

  for (std::size_t qi = 0; qi < query.size(); ++qi) {
    const TimedTrajectory &q = query[qi];
    if (q.length_m() <= 0.0)
      throw Error(ErrorCode::invalid_argument, "empty query");
    for (std::size_t ti = 0; ti < entry.size(); ++ti) {
      const TimedTrajectory &t = entry[ti];
      const double conf = q.confidence() * t.confidence();
      const auto &times = q.anchor_times();
      const auto &offsets = q.anchor_offsets();

      double overlap = 0.0;
      bool cut = false;
      for (std::size_t i = 1; i < times.size(); ++i) {
        overlap += window_overlap(q, t, static_cast<double>(times[i - 1]),
                                  static_cast<double>(times[i]));
        if (cfg.local_pruning) {
          const double remaining = q.length_m() - offsets[i];
          const double bound = conf * (overlap + remaining) / q.length_m();
          if (bound < std::max(best_seen, prune_floor)) {
            cut = true;
            break;
          }
        }
      }
      if (cut) {
        ++best.pairs_cut;
        continue;
      }
      const double sim =
          std::clamp(conf * overlap / q.length_m(), 0.0, 1.0);
      best.complete = true;
      if (sim > best_seen) {
        best_seen = sim;
        best.similarity = sim;
        best.query_rank = static_cast<int>(qi);
        best.entry_rank = static_cast<int>(ti);
      }
    }
  }
  return best;
}

int adapt_m(double query_length_m, const SearchConfig &cfg) {
  const double km = query_length_m / 1000.0;
  int m = cfg.m_cap;
  for (const auto &[upper_km, level_m] : cfg.m_table) {
    if (km < upper_km) {
      m = level_m;
      break;
    }
  }
  return std::max(1, std::min(m, cfg.m_cap));
}

bool global_prune_keep(const EntrySummary &query, const EntrySummary &entry,
                       const SearchConfig &cfg, double density_per_km2) {
  const double eps = cfg.epsilon0 * (search_range_m(density_per_km2) / 200.0);
  const auto normalized = [&](const Point &a, std::int64_t ta, const Point &b,
                              std::int64_t tb) {
    const double dx = (a.x - b.x) / cfg.space_scale_m;
    const double dy = (a.y - b.y) / cfg.space_scale_m;
    const double dt = static_cast<double>(ta - tb) / cfg.time_scale_s;
    return std::sqrt(dx * dx + dy * dy + dt * dt);
  };
  return normalized(query.start, query.start_time, entry.start, entry.start_time) <= eps &&
         normalized(query.end, query.end_time, entry.end, entry.end_time) <= eps;
}

SearchDataset::SearchDataset(const std::vector<CandidateSet> &sets,
                             const RoadNetwork &net) {
  aligned_.reserve(sets.size());
  summaries_.reserve(sets.size());
  for (const CandidateSet &set : sets) {
    std::vector<TimedTrajectory> list;
    list.reserve(set.candidates.size());
    for (const CandidateTrajectory &c : set.candidates)
      list.push_back(TimedTrajectory::from_candidate(c, net));
    aligned_.push_back(std::move(list));
    summaries_.push_back(summarize(set, net));
  }
}

SearchReport search(const CandidateSet &query, double query_density,
                    const SearchDataset &dataset, const RoadNetwork &net,
                    const SearchConfig &cfg, int workers) {
  std::vector<TimedTrajectory> query_aligned;
  for (const CandidateTrajectory &c : query.candidates)
    query_aligned.push_back(TimedTrajectory::from_candidate(c, net));

  const int m = adapt_m(query_aligned.front().length_m(), cfg);
  const std::size_t qm = std::min<std::size_t>(query_aligned.size(),
                                               static_cast<std::size_t>(m));
  const EntrySummary query_summary = summarize(query, net);

  SearchReport report;
  report.stats.entries_total = dataset.size();

  std::vector<QueryResult> slots(dataset.size());
  std::vector<char> has_result(dataset.size(), 0);
  std::atomic<std::uint64_t> skipped{0}, pairs_eval{0}, pairs_cut{0};

  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    if (cfg.global_pruning &&
        !global_prune_keep(query_summary, dataset.summary(i), cfg, query_density)) {
      skipped.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    const auto &entry_aligned = dataset.aligned(i);
    const std::size_t tm = std::min<std::size_t>(entry_aligned.size(),
                                                 static_cast<std::size_t>(m));
    const BestPair bp = best_pair_similarity(
        std::span(query_aligned).subspan(0, qm),
        std::span(entry_aligned).first(tm), cfg, cfg.tau);
    pairs_eval.fetch_add(qm * tm, std::memory_order_relaxed);
    pairs_cut.fetch_add(bp.pairs_cut, std::memory_order_relaxed);
    if (bp.complete && bp.similarity >= cfg.tau) {
      QueryResult res;
      res.id = dataset.summary(i).id;
      res.similarity = bp.similarity;
      res.query_rank = bp.query_rank;
      res.entry_rank = bp.entry_rank;
      res.above_threshold = true;
      res.pairs_cut = bp.pairs_cut;
      slots[i] = std::move(res);
      has_result[i] = 1;
    }
  });

  for (std::size_t i = 0; i < slots.size(); ++i)
    if (has_result[i]) report.results.push_back(std::move(slots[i]));
  std::sort(report.results.begin(), report.results.end(),
            [](const QueryResult &a, const QueryResult &b) {
              if (a.similarity != b.similarity) return a.similarity > b.similarity;
              return a.id < b.id;
            });
  report.stats.entries_skipped_global = skipped.load();
  report.stats.pairs_evaluated = pairs_eval.load();
  report.stats.pairs_cut_local = pairs_cut.load();
  return report;
}

}  // namespace cellsim
