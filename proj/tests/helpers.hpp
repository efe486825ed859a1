/**
 * Shared test fixtures and brute-force oracles. The oracles re-derive
 * expected values by exhaustive enumeration and stay off the library's
 * search code paths.
 */

#ifndef CELLSIM_TESTS_HELPERS_HPP_
#define CELLSIM_TESTS_HELPERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cellsim/geom.hpp"
#include "cellsim/ingest.hpp"
#include "cellsim/roadnet.hpp"

namespace cellsim::testing {

// Geographic anchor shared by generated test networks.
inline constexpr double kLon0 = 108.0;
inline constexpr double kLat0 = 34.0;

inline PlanarFrame test_frame() { return PlanarFrame(LonLat{kLon0, kLat0}); }

struct JsonNetworkBuilder {
  struct Seg {
    std::int64_t id, from, to;
    double speed;
    bool oneway;
  };
  std::vector<std::pair<std::int64_t, Point>> nodes;  // planar meters
  std::vector<Seg> segs;

  JsonNetworkBuilder &node(std::int64_t id, double x, double y) {
    nodes.push_back({id, Point{x, y}});
    return *this;
  }
  JsonNetworkBuilder &segment(std::int64_t id, std::int64_t from, std::int64_t to,
                              double speed = 60.0, bool oneway = false) {
    segs.push_back({id, from, to, speed, oneway});
    return *this;
  }

  std::string json() const {
    const PlanarFrame frame = test_frame();
    // Zero-mean coordinates so the loaded network's centroid frame
    // reproduces the builder geometry exactly.
    double mx = 0.0, my = 0.0;
    for (const auto &[id, p] : nodes) {
      mx += p.x;
      my += p.y;
    }
    mx /= static_cast<double>(nodes.size());
    my /= static_cast<double>(nodes.size());
    std::ostringstream out;
    out.precision(17);
    out << "{\"nodes\":[";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const LonLat ll = frame.to_lonlat(
          Point{nodes[i].second.x - mx, nodes[i].second.y - my});
      out << (i ? "," : "") << "{\"id\":" << nodes[i].first
          << ",\"lon\":" << ll.lon << ",\"lat\":" << ll.lat << "}";
    }
    out << "],\"segments\":[";
    for (std::size_t i = 0; i < segs.size(); ++i) {
      out << (i ? "," : "") << "{\"id\":" << segs[i].id
          << ",\"from\":" << segs[i].from << ",\"to\":" << segs[i].to
          << ",\"speed_kmh\":" << segs[i].speed
          << ",\"oneway\":" << (segs[i].oneway ? "true" : "false") << "}";
    }
    out << "]}";
    return out.str();
  }

  RoadNetwork build() const { return RoadNetwork::from_json_text(json()); }
};

/** rows x cols grid of two-way streets, nodes at block_m spacing. */
inline JsonNetworkBuilder grid_builder(int rows, int cols, double block_m,
                                       double speed = 60.0) {
  JsonNetworkBuilder b;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      b.node(r * cols + c, c * block_m, r * block_m);
  std::int64_t sid = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c)
      b.segment(sid++, r * cols + c, r * cols + c + 1, speed);
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c < cols; ++c)
      b.segment(sid++, r * cols + c, (r + 1) * cols + c, speed);
  return b;
}

/** All loopless directed paths a -> b with length <= bound, by exhaustive
 *  DFS over the adjacency lists. Same path-shape rules as the library:
 *  the entry segment may only reappear as the final partial arc. */
inline std::vector<PathOnNetwork> enumerate_paths(const RoadNetwork &net,
                                                  const PointOnSegment &a,
                                                  const PointOnSegment &b,
                                                  double bound) {
  std::vector<PathOnNetwork> found;

  if (a.segment == b.segment && b.offset_m >= a.offset_m - 1e-9) {
    const double len = std::max(0.0, b.offset_m - a.offset_m);
    if (len <= bound)
      found.push_back(PathOnNetwork{{a.segment}, a.offset_m, b.offset_m, len});
  }

  const RoadSegment &sa = net.segment(a.segment);
  const RoadSegment &sb = net.segment(b.segment);
  std::vector<SegmentId> stack = {a.segment};

  const std::function<void(std::uint32_t, double)> dfs = [&](std::uint32_t node,
                                                             double g) {
    if (g > bound) return;
    if (node == sb.from_node) {
      bool mid_b = false;
      for (std::size_t i = 1; i < stack.size(); ++i)
        if (stack[i] == b.segment) mid_b = true;
      const bool entry_b = stack.front() == b.segment;
      if (!mid_b && (!entry_b || stack.size() > 1)) {
        const double total = g + b.offset_m;
        if (total <= bound) {
          PathOnNetwork p;
          p.segments = stack;
          p.segments.push_back(b.segment);
          p.entry_offset_m = a.offset_m;
          p.exit_offset_m = b.offset_m;
          p.length_m = total;
          found.push_back(std::move(p));
        }
      }
    }
    for (SegmentId sid : net.out_segments(node)) {
      if (std::find(stack.begin(), stack.end(), sid) != stack.end()) continue;
      stack.push_back(sid);
      dfs(net.segment(sid).to_node, g + net.segment(sid).length_m);
      stack.pop_back();
    }
  };
  dfs(sa.to_node, sa.length_m - a.offset_m);

  std::sort(found.begin(), found.end(),
            [](const PathOnNetwork &x, const PathOnNetwork &y) {
              if (x.length_m != y.length_m) return x.length_m < y.length_m;
              return x.segments < y.segments;
            });
  return found;
}

inline double brute_force_distance(const RoadNetwork &net, const PointOnSegment &a,
                                   const PointOnSegment &b, double bound) {
  const auto paths = enumerate_paths(net, a, b, bound);
  return paths.empty() ? kUnreachable : paths.front().length_m;
}

/** Position of the node with the given file id. */
inline Point node_position(const RoadNetwork &net, std::int64_t file_id) {
  for (const RoadNode &n : net.nodes())
    if (n.id == file_id) return n.position;
  throw std::runtime_error("node id not in network");
}

inline Point offset_point(const Point &base, double dx, double dy) {
  return Point{base.x + dx, base.y + dy};
}

inline TowerMap make_tower_map(const std::vector<CellTower> &towers) {
  std::vector<CellTower> copy = towers;
  compute_local_density(copy);
  TowerMap map;
  for (const CellTower &t : copy) map.add(t);
  return map;
}

inline TowerSequence make_sequence(
    const std::string &user,
    const std::vector<std::pair<std::int64_t, TowerKey>> &points) {
  TowerSequence seq;
  seq.user_id = user;
  for (const auto &[t, key] : points) seq.points.push_back(SequencePoint{t, key});
  return seq;
}

}  // namespace cellsim::testing

#endif  // CELLSIM_TESTS_HELPERS_HPP_
