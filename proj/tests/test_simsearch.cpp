#include <doctest.h>

#include <cmath>

#include "cellsim/error.hpp"
#include "cellsim/rng.hpp"
#include "cellsim/simsearch.hpp"

#include "helpers.hpp"

using namespace cellsim;
using namespace cellsim::testing;

namespace {

// Whole-segment route as a candidate trajectory: one subpath per segment,
// anchors at the segment boundaries.
CandidateTrajectory route_candidate(const RoadNetwork &net,
                                    const std::vector<SegmentId> &route,
                                    std::int64_t t0, double seconds_per_gap,
                                    double confidence = 1.0) {
  CandidateTrajectory c;
  c.confidence = confidence;
  c.raw_log_prob = std::log(confidence);
  double t = static_cast<double>(t0);
  c.timestamps.push_back(t0);
  for (SegmentId s : route) {
    PathOnNetwork p;
    p.segments = {s};
    p.entry_offset_m = 0.0;
    p.exit_offset_m = net.segment(s).length_m;
    p.length_m = net.segment(s).length_m;
    c.subpaths.push_back(p);
    c.gap_scores.push_back(0.0);
    t += seconds_per_gap;
    c.timestamps.push_back(static_cast<std::int64_t>(t));
  }
  return c;
}

// Eastbound segment of grid row `r` starting at column `c`.
SegmentId east_segment(const RoadNetwork &net, int rows, int cols, int r, int c) {
  (void)rows;
  // grid_builder emits horizontal file ids first, row-major, then verticals;
  // each file id maps to directed ids 2*id (forward) and 2*id+1 (reverse).
  const std::int64_t file_id = r * (cols - 1) + c;
  for (const RoadSegment &s : net.segments())
    if (s.source_id == file_id && !s.reversed) return s.id;
  FAIL("missing segment");
  return kNoSegment;
}

SegmentId north_segment(const RoadNetwork &net, int rows, int cols, int r, int c) {
  const std::int64_t file_id = rows * (cols - 1) + r * cols + c;
  for (const RoadSegment &s : net.segments())
    if (s.source_id == file_id && !s.reversed) return s.id;
  FAIL("missing segment");
  return kNoSegment;
}

std::vector<SegmentId> random_route(const RoadNetwork &net, Rng &rng, int hops) {
  std::uint32_t node = static_cast<std::uint32_t>(rng.uniform_u64(net.nodes().size()));
  std::vector<SegmentId> route;
  SegmentId prev = kNoSegment;
  for (int i = 0; i < hops; ++i) {
    const auto &out = net.out_segments(node);
    std::vector<SegmentId> options;
    for (SegmentId s : out)
      if (prev == kNoSegment || net.segment(prev).twin != s) options.push_back(s);
    if (options.empty()) options.assign(out.begin(), out.end());
    if (options.empty()) break;
    const SegmentId s = options[rng.uniform_u64(options.size())];
    route.push_back(s);
    node = net.segment(s).to_node;
    prev = s;
  }
  return route;
}

}  // namespace

TEST_CASE("time alignment interpolates along the path") {
  const RoadNetwork net = grid_builder(2, 5, 400.0).build();
  std::vector<SegmentId> route;
  for (int c = 0; c < 4; ++c) route.push_back(east_segment(net, 2, 5, 0, c));
  const CandidateTrajectory cand = route_candidate(net, route, 1000, 60.0);
  const TimedTrajectory traj = TimedTrajectory::from_candidate(cand, net);

  CHECK(traj.length_m() == doctest::Approx(1600.0));

  SUBCASE("anchor times map to anchor offsets") {
    for (std::size_t i = 0; i < traj.anchor_times().size(); ++i) {
      double off = -1.0;
      REQUIRE(traj.offset_at(static_cast<double>(traj.anchor_times()[i]), &off));
      CHECK(off == doctest::Approx(traj.anchor_offsets()[i]));
    }
  }
  SUBCASE("gap midpoints land halfway") {
    double off = -1.0;
    REQUIRE(traj.offset_at(1030.0, &off));
    CHECK(off == doctest::Approx(200.0));
    REQUIRE(traj.offset_at(1090.0, &off));
    CHECK(off == doctest::Approx(600.0));
  }
  SUBCASE("out of span is reported") {
    double off = 0.0;
    CHECK_FALSE(traj.offset_at(999.0, &off));
    CHECK_FALSE(traj.offset_at(1241.0, &off));
  }
  SUBCASE("offsets are monotone over a dense sweep") {
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double t = 1000.0 + 240.0 * i / 1000.0;
      double off = 0.0;
      REQUIRE(traj.offset_at(t, &off));
      CHECK(off >= prev - 1e-9);
      prev = off;
    }
  }
  SUBCASE("zero-duration anchors collapse with a counter") {
    CandidateTrajectory weird = cand;
    weird.timestamps[2] = weird.timestamps[1];
    int collapsed = 0;
    const TimedTrajectory t2 = TimedTrajectory::from_candidate(weird, net, &collapsed);
    CHECK(collapsed == 1);
    CHECK(t2.anchor_times().size() == traj.anchor_times().size() - 1);
  }
}

TEST_CASE("window overlap on a three-segment toy map") {
  const RoadNetwork net = grid_builder(2, 4, 300.0).build();
  std::vector<SegmentId> row0 = {east_segment(net, 2, 4, 0, 0),
                                 east_segment(net, 2, 4, 0, 1),
                                 east_segment(net, 2, 4, 0, 2)};
  const CandidateTrajectory qc = route_candidate(net, row0, 0, 60.0);
  const TimedTrajectory q = TimedTrajectory::from_candidate(qc, net);

  SUBCASE("identical trajectories overlap their full window arc") {
    const TimedTrajectory t = TimedTrajectory::from_candidate(qc, net);
    CHECK(window_overlap(q, t, 0.0, 60.0) == doctest::Approx(300.0));
    CHECK(window_overlap(q, t, 30.0, 90.0) == doctest::Approx(300.0));
    CHECK(window_overlap(q, t, 0.0, 180.0) == doctest::Approx(900.0));
  }
  SUBCASE("disjoint roads overlap nothing") {
    std::vector<SegmentId> row1 = {east_segment(net, 2, 4, 1, 0),
                                   east_segment(net, 2, 4, 1, 1),
                                   east_segment(net, 2, 4, 1, 2)};
    const TimedTrajectory t =
        TimedTrajectory::from_candidate(route_candidate(net, row1, 0, 60.0), net);
    CHECK(window_overlap(q, t, 0.0, 180.0) == doctest::Approx(0.0));
  }
  SUBCASE("partial co-traversal equals hand-computed intervals") {
    // T runs the same row at half speed: anchors every 120 s per segment.
    const TimedTrajectory t =
        TimedTrajectory::from_candidate(route_candidate(net, row0, 0, 120.0), net);
    // Window [0, 60]: Q covers [0, 300] of the row, T covers [0, 150].
    CHECK(window_overlap(q, t, 0.0, 60.0) == doctest::Approx(150.0));
    // Window [60, 120]: Q [300, 600], T [150, 300]: no shared interval.
    CHECK(window_overlap(q, t, 60.0, 120.0) == doctest::Approx(0.0));
    // Window [120, 180]: Q [600, 900], T [300, 450]: still disjoint.
    CHECK(window_overlap(q, t, 120.0, 180.0) == doctest::Approx(0.0));
  }
  SUBCASE("time span clipping contributes zero outside T") {
    const TimedTrajectory t = TimedTrajectory::from_candidate(
        route_candidate(net, row0, 300, 60.0), net);  // starts after Q ends
    CHECK(window_overlap(q, t, 0.0, 180.0) == doctest::Approx(0.0));
  }
}

TEST_CASE("pair similarity") {
  const RoadNetwork net = grid_builder(2, 5, 400.0).build();
  std::vector<SegmentId> row0;
  for (int c = 0; c < 4; ++c) row0.push_back(east_segment(net, 2, 5, 0, c));
  const CandidateTrajectory qc = route_candidate(net, row0, 0, 60.0);
  const TimedTrajectory q = TimedTrajectory::from_candidate(qc, net);

  SUBCASE("identical with unit confidences scores one") {
    CHECK(pair_similarity(q, q) == doctest::Approx(1.0));
  }
  SUBCASE("confidences multiply in") {
    const TimedTrajectory t = TimedTrajectory::from_candidate(
        route_candidate(net, row0, 0, 60.0, 0.5), net);
    CHECK(pair_similarity(q, t) == doctest::Approx(0.5));
  }
  SUBCASE("disjoint routes score zero") {
    std::vector<SegmentId> row1;
    for (int c = 0; c < 4; ++c) row1.push_back(east_segment(net, 2, 5, 1, c));
    const TimedTrajectory t =
        TimedTrajectory::from_candidate(route_candidate(net, row1, 0, 60.0), net);
    CHECK(pair_similarity(q, t) == doctest::Approx(0.0));
  }
  SUBCASE("half-route co-traversal") {
    // T follows the first two segments, then turns north and continues on
    // the upper row: shared length is exactly half of Len(Q).
    std::vector<SegmentId> detour = {row0[0], row0[1],
                                     north_segment(net, 2, 5, 0, 2),
                                     east_segment(net, 2, 5, 1, 2)};
    const TimedTrajectory t =
        TimedTrajectory::from_candidate(route_candidate(net, detour, 0, 60.0), net);
    CHECK(pair_similarity(q, t) == doctest::Approx(0.5));
  }
}

TEST_CASE("best pair over the candidate grid") {
  const RoadNetwork net = grid_builder(3, 6, 350.0).build();
  SearchConfig cfg;
  Rng rng(98765);

  SUBCASE("single candidates reduce to pair similarity") {
    const auto ra = random_route(net, rng, 5);
    const auto rb = random_route(net, rng, 5);
    const TimedTrajectory q =
        TimedTrajectory::from_candidate(route_candidate(net, ra, 0, 60.0), net);
    const TimedTrajectory t =
        TimedTrajectory::from_candidate(route_candidate(net, rb, 0, 60.0), net);
    cfg.local_pruning = false;
    const BestPair bp = best_pair_similarity(std::span(&q, 1), std::span(&t, 1),
                                             cfg, 0.0);
    CHECK(bp.similarity == doctest::Approx(pair_similarity(q, t)));
    CHECK(bp.query_rank == 0);
    CHECK(bp.entry_rank == 0);
  }

  SUBCASE("co-moving true paths win the argmax") {
    const auto truth = random_route(net, rng, 6);
    std::vector<TimedTrajectory> qs, ts;
    qs.push_back(TimedTrajectory::from_candidate(
        route_candidate(net, truth, 0, 60.0, 1.0), net));
    ts.push_back(TimedTrajectory::from_candidate(
        route_candidate(net, truth, 10, 55.0, 1.0), net));
    for (int i = 0; i < 3; ++i) {
      qs.push_back(TimedTrajectory::from_candidate(
          route_candidate(net, random_route(net, rng, 6), 0, 60.0, 0.8), net));
      ts.push_back(TimedTrajectory::from_candidate(
          route_candidate(net, random_route(net, rng, 6), 10, 55.0, 0.8), net));
    }
    cfg.local_pruning = true;
    const BestPair bp = best_pair_similarity(qs, ts, cfg, 0.0);
    CHECK(bp.query_rank == 0);
    CHECK(bp.entry_rank == 0);
    CHECK(bp.similarity > 0.8);
  }
}

TEST_CASE("local pruning is exact over random pairs") {
  const RoadNetwork net = grid_builder(3, 6, 350.0).build();
  Rng rng(55);

  int cuts = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<TimedTrajectory> qs, ts;
    const int mq = 1 + static_cast<int>(rng.uniform_u64(4));
    const int mt = 1 + static_cast<int>(rng.uniform_u64(4));
    const std::int64_t t0 = static_cast<std::int64_t>(rng.uniform_u64(120));
    // Correlated routes: candidates perturb a shared base route.
    const auto base = random_route(net, rng, 6);
    for (int i = 0; i < mq; ++i) {
      auto r = rng.chance(0.5) ? base : random_route(net, rng, 6);
      qs.push_back(TimedTrajectory::from_candidate(
          route_candidate(net, r, 0, 60.0, i == 0 ? 1.0 : rng.uniform(0.3, 1.0)),
          net));
    }
    for (int i = 0; i < mt; ++i) {
      auto r = rng.chance(0.5) ? base : random_route(net, rng, 6);
      ts.push_back(TimedTrajectory::from_candidate(
          route_candidate(net, r, t0, 66.0, i == 0 ? 1.0 : rng.uniform(0.3, 1.0)),
          net));
    }

    SearchConfig on;
    on.local_pruning = true;
    SearchConfig off;
    off.local_pruning = false;

    // Floor zero: pruning only races the running best, results identical.
    const BestPair with = best_pair_similarity(qs, ts, on, 0.0);
    const BestPair without = best_pair_similarity(qs, ts, off, 0.0);
    CHECK(with.similarity == doctest::Approx(without.similarity).epsilon(1e-12));
    CHECK(with.query_rank == without.query_rank);
    CHECK(with.entry_rank == without.entry_rank);
    cuts += static_cast<int>(with.pairs_cut);

    // Threshold floor: identical verdicts above tau, never a false keep.
    const BestPair tau_on = best_pair_similarity(qs, ts, on, 0.85);
    if (without.similarity >= 0.85) {
      CHECK(tau_on.similarity == doctest::Approx(without.similarity).epsilon(1e-12));
      CHECK(tau_on.query_rank == without.query_rank);
      CHECK(tau_on.entry_rank == without.entry_rank);
    } else {
      CHECK((!tau_on.complete || tau_on.similarity < 0.85));
    }

    // Instrumented bound validity: every prefix bound dominates the final
    // similarity of its pair.
    if (trial < 50) {
      for (const TimedTrajectory &q : qs)
        for (const TimedTrajectory &t : ts) {
          const double final_sim = pair_similarity(q, t);
          const auto &times = q.anchor_times();
          const auto &offsets = q.anchor_offsets();
          double acc = 0.0;
          for (std::size_t i = 1; i < times.size(); ++i) {
            acc += window_overlap(q, t, static_cast<double>(times[i - 1]),
                                  static_cast<double>(times[i]));
            const double bound = q.confidence() * t.confidence() *
                                 (acc + (q.length_m() - offsets[i])) /
                                 q.length_m();
            CHECK(bound >= final_sim - 1e-9);
          }
        }
    }
  }
  CHECK(cuts > 0);  // pruning actually engaged somewhere
}

TEST_CASE("adaptive M follows the level table") {
  SearchConfig cfg;
  CHECK(adapt_m(1000.0, cfg) == 2);
  CHECK(adapt_m(4500.0, cfg) == 3);
  CHECK(adapt_m(7000.0, cfg) == 5);
  CHECK(adapt_m(10000.0, cfg) == 6);
  CHECK(adapt_m(13000.0, cfg) == 7);
  CHECK(adapt_m(20000.0, cfg) == 7);  // saturation cap
  int prev = 0;
  for (double km = 0.0; km <= 30.0; km += 0.25) {
    const int m = adapt_m(km * 1000.0, cfg);
    CHECK(m >= prev);
    CHECK(m <= cfg.m_cap);
    prev = m;
  }
}

TEST_CASE("global pruning keeps and skips by normalized endpoints") {
  SearchConfig cfg;
  EntrySummary q;
  q.start = {0, 0};
  q.end = {5000, 0};
  q.start_time = 0;
  q.end_time = 600;

  SUBCASE("identical endpoints keep") {
    CHECK(global_prune_keep(q, q, cfg, 50.0));
  }
  SUBCASE("sqrt(2) distance keeps under epsilon 2") {
    EntrySummary e = q;
    e.start.x += 1000.0;
    e.start_time += 600;
    CHECK(global_prune_keep(q, e, cfg, 50.0));
  }
  SUBCASE("a day apart skips") {
    EntrySummary e = q;
    e.start_time += 86400;
    e.end_time += 86400;
    CHECK_FALSE(global_prune_keep(q, e, cfg, 50.0));
  }
  SUBCASE("sparse areas widen the radius") {
    EntrySummary e = q;
    e.start.x += 3500.0;
    CHECK_FALSE(global_prune_keep(q, e, cfg, 50.0));  // eps 2
    CHECK(global_prune_keep(q, e, cfg, 5.0));         // eps 10
  }
}

TEST_CASE("search returns the self entry and prunes exactly") {
  const RoadNetwork net = grid_builder(3, 6, 350.0).build();
  Rng rng(31);

  std::vector<CandidateSet> sets;
  for (int i = 0; i < 40; ++i) {
    CandidateSet set;
    set.sequence_id = "e" + std::to_string(i);
    const auto route = random_route(net, rng, 6);
    const std::int64_t t0 = (i % 8) * 3600;  // spread starts across hours
    set.candidates.push_back(route_candidate(net, route, t0, 60.0, 1.0));
    if (i % 2 == .0) {
      set.candidates.push_back(
          route_candidate(net, random_route(net, rng, 6), t0, 60.0, 0.7));
    }
    sets.push_back(std::move(set));
  }

  const SearchDataset dataset(sets, net);
  SearchConfig cfg;
  const CandidateSet &query = sets[5];

  const SearchReport report = search(query, 50.0, dataset, net, cfg, 1);
  REQUIRE(!report.results.empty());
  CHECK(report.results.front().id == "e5");
  CHECK(report.results.front().similarity == doctest::Approx(1.0));
  CHECK(report.results.front().above_threshold);

  SUBCASE("pruning on or off returns identical result sets") {
    std::vector<SearchReport> reports;
    for (const bool g : {true, false})
      for (const bool l : {true, false}) {
        SearchConfig c = cfg;
        c.global_pruning = g;
        c.local_pruning = l;
        reports.push_back(search(query, 50.0, dataset, net, c, 1));
      }
    for (std::size_t i = 1; i < reports.size(); ++i) {
      REQUIRE(reports[i].results.size() == reports[0].results.size());
      for (std::size_t r = 0; r < reports[0].results.size(); ++r) {
        CHECK(reports[i].results[r].id == reports[0].results[r].id);
        CHECK(reports[i].results[r].similarity ==
              doctest::Approx(reports[0].results[r].similarity).epsilon(1e-12));
        CHECK(reports[i].results[r].query_rank == reports[0].results[r].query_rank);
        CHECK(reports[i].results[r].entry_rank == reports[0].results[r].entry_rank);
      }
    }
    // Global pruning engaged on the hour-separated entries.
    CHECK(reports[0].stats.entries_skipped_global > 0);
  }

  SUBCASE("parallel search matches single-threaded results") {
    const SearchReport parallel = search(query, 50.0, dataset, net, cfg, 4);
    REQUIRE(parallel.results.size() == report.results.size());
    for (std::size_t r = 0; r < report.results.size(); ++r)
      CHECK(parallel.results[r].id == report.results[r].id);
  }
}

TEST_CASE("similarity stays within bounds on random pairs") {
  const RoadNetwork net = grid_builder(3, 5, 300.0).build();
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto rq = random_route(net, rng, 1 + static_cast<int>(rng.uniform_u64(7)));
    const auto rt = random_route(net, rng, 1 + static_cast<int>(rng.uniform_u64(7)));
    if (rq.empty() || rt.empty()) continue;
    const TimedTrajectory q = TimedTrajectory::from_candidate(
        route_candidate(net, rq, static_cast<std::int64_t>(rng.uniform_u64(60)),
                        40.0 + rng.uniform(0.0, 60.0), rng.uniform(0.1, 1.0)),
        net);
    const TimedTrajectory t = TimedTrajectory::from_candidate(
        route_candidate(net, rt, static_cast<std::int64_t>(rng.uniform_u64(60)),
                        40.0 + rng.uniform(0.0, 60.0), rng.uniform(0.1, 1.0)),
        net);
    const double sim = pair_similarity(q, t);
    CHECK(sim >= 0.0);
    CHECK(sim <= 1.0);

    double overlap_total = 0.0;
    const auto &times = q.anchor_times();
    for (std::size_t i = 1; i < times.size(); ++i)
      overlap_total += window_overlap(q, t, static_cast<double>(times[i - 1]),
                                      static_cast<double>(times[i]));
    CHECK(overlap_total <= q.length_m() + 1e-6);
  }
}
