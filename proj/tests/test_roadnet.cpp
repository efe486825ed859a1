#include <doctest.h>

#include <set>

#include "cellsim/error.hpp"
#include "cellsim/roadnet.hpp"
#include "cellsim/rng.hpp"

#include "helpers.hpp"

using namespace cellsim;
using namespace cellsim::testing;

TEST_CASE("smallest valid network loads") {
  JsonNetworkBuilder b;
  b.node(1, 0, 0).node(2, 500, 0).segment(10, 1, 2, 60.0, /*oneway=*/true);
  const RoadNetwork net = b.build();
  CHECK(net.nodes().size() == 2);
  CHECK(net.segments().size() == 1);
  CHECK(net.segment(0).speed_limit_kmh == doctest::Approx(60.0));
  CHECK(net.segment(0).length_m == doctest::Approx(500.0));

  SUBCASE("two-way roads become two directed segments") {
    JsonNetworkBuilder b2;
    b2.node(1, 0, 0).node(2, 500, 0).segment(10, 1, 2, 60.0, /*oneway=*/false);
    const RoadNetwork net2 = b2.build();
    CHECK(net2.segments().size() == 2);
    CHECK(net2.segment(0).twin == 1);
    CHECK(net2.segment(1).twin == 0);
    CHECK(angle_difference(net2.segment(0).direction_angle,
                           net2.segment(1).direction_angle) ==
          doctest::Approx(kPi));
  }
}

TEST_CASE("grid file yields the expected counts") {
  // A 10x10 grid of two-way streets: 180 undirected edges, 360 directed.
  const RoadNetwork net = grid_builder(10, 10, 300.0).build();
  CHECK(net.nodes().size() == 100);
  CHECK(net.segments().size() == 360);
}

TEST_CASE("dangling node reference is a validation error") {
  JsonNetworkBuilder b;
  b.node(1, 0, 0).node(2, 500, 0).segment(10, 1, 7);
  CHECK_THROWS_WITH_AS(b.build(),
                       doctest::Contains("references missing node"), Error);
}

TEST_CASE("malformed file reports a line number") {
  const std::string bad = "{\n\"nodes\": [\n{\"id\": }\n]}\n";
  try {
    RoadNetwork::from_json_text(bad);
    FAIL("expected parse error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("unknown keys are collected as warnings") {
  JsonNetworkBuilder b;
  b.node(1, 0, 0).node(2, 500, 0).segment(10, 1, 2);
  std::string text = b.json();
  text.insert(1, "\"extra_top\": 1,");
  LoadReport report;
  const RoadNetwork net = RoadNetwork::from_json_text(text, &report);
  CHECK(net.segments().size() == 2);
  REQUIRE(report.unknown_keys.size() == 1);
  CHECK(report.unknown_keys[0] == "$.extra_top");
}

TEST_CASE("speed limit outside (0, 120] is rejected") {
  JsonNetworkBuilder b;
  b.node(1, 0, 0).node(2, 500, 0).segment(10, 1, 2, 130.0);
  CHECK_THROWS_AS(b.build(), Error);
}

TEST_CASE("projection onto segments") {
  JsonNetworkBuilder b;
  b.node(1, 0, 0).node(2, 400, 0).segment(0, 1, 2, 60.0, true);
  const RoadNetwork net = b.build();
  const Point origin = node_position(net, 1);

  SUBCASE("point on the segment") {
    const auto c = net.project_to_segment(offset_point(origin, 120, 0), 0);
    CHECK(c.distance_m == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(c.offset_m == doctest::Approx(120.0));
  }
  SUBCASE("perpendicular 100 m from the midpoint") {
    const auto c = net.project_to_segment(offset_point(origin, 200, 100), 0);
    CHECK(c.distance_m == doctest::Approx(100.0));
    CHECK(c.projected.x == doctest::Approx(origin.x + 200.0));
  }
  SUBCASE("beyond the end clamps to the close endpoint") {
    const auto c = net.project_to_segment(offset_point(origin, 470, 30), 0);
    CHECK(c.offset_m == doctest::Approx(400.0));
    CHECK(c.distance_m == doctest::Approx(std::hypot(70.0, 30.0)));
  }
}

TEST_CASE("search range follows the density breakpoints") {
  CHECK(search_range_m(50.0) == doctest::Approx(200.0));
  CHECK(search_range_m(80.0) == doctest::Approx(200.0));
  CHECK(search_range_m(5.0) == doctest::Approx(1000.0));
  CHECK(search_range_m(1.0) == doctest::Approx(1000.0));
  CHECK(search_range_m(27.5) == doctest::Approx(600.0));  // linear midpoint
}

TEST_CASE("candidate lookup equals a linear scan") {
  const RoadNetwork net = grid_builder(6, 6, 250.0).build();
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Point center{rng.uniform(-900.0, 900.0), rng.uniform(-900.0, 900.0)};
    const double radius = rng.uniform(50.0, 800.0);
    auto fast = net.candidates_in_disc(center, radius);

    std::vector<SegmentId> slow;
    for (const RoadSegment &seg : net.segments())
      if (net.project_to_segment(center, seg.id).distance_m <= radius)
        slow.push_back(seg.id);

    REQUIRE(fast.size() == slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i)
      CHECK(fast[i].segment == slow[i]);
  }
}

TEST_CASE("network distance basics") {
  const RoadNetwork net = grid_builder(2, 3, 400.0).build();
  // Segment 0 runs 0 -> 1 horizontally (two-way; its twin exists too).
  const PointOnSegment a = net.point_on_segment(0, 50.0);
  const PointOnSegment b = net.point_on_segment(0, 200.0);

  CHECK(net.network_distance(a, a) == doctest::Approx(0.0));
  CHECK(net.network_distance(a, b) == doctest::Approx(150.0));

  SUBCASE("upstream target must go around") {
    const double d = net.network_distance(b, a);
    CHECK(d == doctest::Approx(brute_force_distance(net, b, a, 5000.0)));
    CHECK(d > 150.0);
  }
}

TEST_CASE("network distance on a directed cycle equals enumeration") {
  // 4-node one-way ring with uneven edge lengths.
  JsonNetworkBuilder b;
  b.node(0, 0, 0).node(1, 300, 0).node(2, 300, 400).node(3, 0, 400);
  b.segment(0, 0, 1, 60, true)
      .segment(1, 1, 2, 60, true)
      .segment(2, 2, 3, 60, true)
      .segment(3, 3, 0, 60, true);
  const RoadNetwork net = b.build();

  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const SegmentId sa = static_cast<SegmentId>(rng.uniform_u64(4));
    const SegmentId sb = static_cast<SegmentId>(rng.uniform_u64(4));
    const PointOnSegment pa =
        net.point_on_segment(sa, rng.uniform() * net.segment(sa).length_m);
    const PointOnSegment pb =
        net.point_on_segment(sb, rng.uniform() * net.segment(sb).length_m);
    const double expected = brute_force_distance(net, pa, pb, 10000.0);
    CHECK(net.network_distance(pa, pb) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("unreachable pairs return the infinity sentinel") {
  JsonNetworkBuilder b;
  b.node(0, 0, 0).node(1, 400, 0).node(2, 800, 0);
  b.segment(0, 0, 1, 60, true).segment(1, 2, 1, 60, true);
  const RoadNetwork net = b.build();
  const PointOnSegment a = net.point_on_segment(0, 100.0);
  const PointOnSegment c = net.point_on_segment(1, 100.0);
  CHECK(net.network_distance(c, a) == kUnreachable);
  CHECK(net.k_shortest_paths(c, a, 4, 0.1).empty());
}

TEST_CASE("k shortest paths on a straight chain finds exactly one") {
  JsonNetworkBuilder b;
  b.node(0, 0, 0).node(1, 400, 0).node(2, 800, 0);
  b.segment(0, 0, 1, 60, true).segment(1, 1, 2, 60, true);
  const RoadNetwork net = b.build();
  const auto paths = net.k_shortest_paths(net.point_on_segment(0, 100.0),
                                          net.point_on_segment(1, 300.0), 4, 0.1);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].length_m == doctest::Approx(300.0 + 300.0));
  CHECK(paths[0].segments == std::vector<SegmentId>{0, 1});
}

TEST_CASE("grid block corners admit four equal staircase paths") {
  // 2x4 grid with one-way spurs feeding the opposite corners: the four
  // monotone staircases between them have identical length.
  JsonNetworkBuilder b;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) b.node(r * 4 + c, c * 100.0, r * 100.0);
  b.node(100, -100.0, 0.0);   // west spur into node 0
  b.node(101, 400.0, 100.0);  // east spur out of node 7
  std::int64_t sid = 0;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c + 1 < 4; ++c) b.segment(sid++, r * 4 + c, r * 4 + c + 1);
  for (int c = 0; c < 4; ++c) b.segment(sid++, c, 4 + c);
  b.segment(sid++, 100, 0, 60, true);
  b.segment(sid++, 7, 101, 60, true);
  const RoadNetwork net = b.build();

  SegmentId spur_in = kNoSegment, spur_out = kNoSegment;
  for (const RoadSegment &seg : net.segments()) {
    if (seg.source_id == sid - 2 && !seg.reversed) spur_in = seg.id;
    if (seg.source_id == sid - 1 && !seg.reversed) spur_out = seg.id;
  }
  REQUIRE(spur_in != kNoSegment);
  REQUIRE(spur_out != kNoSegment);

  const auto paths =
      net.k_shortest_paths(net.point_on_segment(spur_in, 100.0),
                           net.point_on_segment(spur_out, 0.0), 4, 0.05);
  REQUIRE(paths.size() == 4);
  for (const auto &p : paths) CHECK(p.length_m == doctest::Approx(400.0));
}

namespace {

RoadNetwork random_network(Rng &rng, int n_nodes, int n_edges) {
  JsonNetworkBuilder b;
  for (int i = 0; i < n_nodes; ++i)
    b.node(i, rng.uniform(0.0, 2000.0), rng.uniform(0.0, 2000.0));
  std::int64_t sid = 0;
  std::set<std::pair<int, int>> used;
  for (int e = 0; e < n_edges; ++e) {
    const int from = static_cast<int>(rng.uniform_u64(n_nodes));
    const int to = static_cast<int>(rng.uniform_u64(n_nodes));
    if (from == to || !used.insert({from, to}).second) continue;
    b.segment(sid++, from, to, 60.0, /*oneway=*/true);
  }
  if (b.segs.empty()) b.segment(0, 0, 1 % n_nodes, 60.0, true);
  return b.build();
}

}  // namespace

TEST_CASE("k shortest paths equal the enumeration oracle on random graphs") {
  Rng rng(12345);
  int compared = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const RoadNetwork net = random_network(rng, 12, 30);
    const SegmentId sa =
        static_cast<SegmentId>(rng.uniform_u64(net.segments().size()));
    const SegmentId sb =
        static_cast<SegmentId>(rng.uniform_u64(net.segments().size()));
    const PointOnSegment a =
        net.point_on_segment(sa, rng.uniform() * net.segment(sa).length_m);
    const PointOnSegment bpt =
        net.point_on_segment(sb, rng.uniform() * net.segment(sb).length_m);
    const double slack = 0.25;

    const auto fast = net.k_shortest_paths(a, bpt, 50, slack);
    const double shortest = net.network_distance(a, bpt);
    if (shortest >= kUnreachable) {
      CHECK(fast.empty());
      continue;
    }
    const auto slow = enumerate_paths(net, a, bpt, (1.0 + slack) * shortest + 1e-6);
    const std::size_t expect = std::min<std::size_t>(50, slow.size());
    REQUIRE(fast.size() == expect);
    for (std::size_t i = 0; i < expect; ++i) {
      CHECK(fast[i].segments == slow[i].segments);
      CHECK(fast[i].length_m == doctest::Approx(slow[i].length_m).epsilon(1e-9));
    }
    ++compared;

    // Shortest-path consistency and ordering invariants.
    if (!fast.empty()) {
      CHECK(fast.front().length_m == doctest::Approx(shortest).epsilon(1e-9));
      for (std::size_t i = 1; i < fast.size(); ++i)
        CHECK(fast[i].length_m >= fast[i - 1].length_m - 1e-9);
      for (const auto &p : fast) CHECK(shortest <= p.length_m + 1e-9);
    }

    // Prefix property: a smaller k returns a prefix of a larger k.
    const auto first3 = net.k_shortest_paths(a, bpt, 3, slack);
    REQUIRE(first3.size() == std::min<std::size_t>(3, fast.size()));
    for (std::size_t i = 0; i < first3.size(); ++i)
      CHECK(first3[i].segments == fast[i].segments);
  }
  CHECK(compared > 10);
}

TEST_CASE("k shortest paths are loopless") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const RoadNetwork net = random_network(rng, 10, 26);
    const SegmentId sa =
        static_cast<SegmentId>(rng.uniform_u64(net.segments().size()));
    const SegmentId sb =
        static_cast<SegmentId>(rng.uniform_u64(net.segments().size()));
    const auto paths = net.k_shortest_paths(
        net.point_on_segment(sa, 10.0),
        net.point_on_segment(sb, net.segment(sb).length_m / 2), 20, 0.3);
    for (const auto &p : paths) {
      // No directed segment repeats, except the entry segment reappearing
      // as the final partial arc.
      for (std::size_t i = 0; i < p.segments.size(); ++i)
        for (std::size_t j = i + 1; j < p.segments.size(); ++j) {
          if (i == 0 && j == p.segments.size() - 1) continue;
          CHECK(p.segments[i] != p.segments[j]);
        }
    }
  }
}
