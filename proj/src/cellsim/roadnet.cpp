#include "cellsim/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "cellsim/error.hpp"

namespace cellsim {

using nlohmann::json;

bool operator==(const PathOnNetwork &a, const PathOnNetwork &b) {
  return a.segments == b.segments && a.entry_offset_m == b.entry_offset_m &&
         a.exit_offset_m == b.exit_offset_m && a.length_m == b.length_m;
}

double search_range_m(double density_per_km2) {
  if (density_per_km2 >= 50.0) return 200.0;
  if (density_per_km2 <= 5.0) return 1000.0;
  return 1000.0 + (density_per_km2 - 5.0) * (200.0 - 1000.0) / (50.0 - 5.0);
}

namespace {

int line_of_byte_offset(const std::string &text, std::size_t byte) {
  int line = 1;
  const std::size_t end = std::min(byte, text.size());
  for (std::size_t i = 0; i < end; ++i)
    if (text[i] == '\n') ++line;
  return line;
}

void collect_unknown_keys(const json &obj, std::initializer_list<const char *> known,
                          const std::string &where, LoadReport *report) {
  if (!report) return;
  for (const auto &item : obj.items()) {
    bool ok = false;
    for (const char *k : known)
      if (item.key() == k) ok = true;
    if (!ok) report->unknown_keys.push_back(where + "." + item.key());
  }
}

}  // namespace

RoadNetwork RoadNetwork::load(const std::string &path, LoadReport *report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open road-network file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), report);
}

RoadNetwork RoadNetwork::from_json_text(const std::string &text, LoadReport *report) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::parse,
                "road-network parse error at line " +
                    std::to_string(line_of_byte_offset(text, e.byte)) + ": " +
                    e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("segments"))
    throw Error(ErrorCode::parse,
                "road-network file must contain 'nodes' and 'segments' arrays");
  collect_unknown_keys(doc, {"nodes", "segments"}, "$", report);

  RoadNetwork net;

  std::vector<LonLat> raw_nodes;
  std::vector<std::int64_t> node_ids;
  for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
    const json &n = doc["nodes"][i];
    collect_unknown_keys(n, {"id", "lon", "lat"},
                         "nodes[" + std::to_string(i) + "]", report);
    if (!n.contains("id") || !n.contains("lon") || !n.contains("lat"))
      throw Error(ErrorCode::parse,
                  "node " + std::to_string(i) + " missing id/lon/lat");
    node_ids.push_back(n["id"].get<std::int64_t>());
    raw_nodes.push_back(LonLat{n["lon"].get<double>(), n["lat"].get<double>()});
  }

  net.frame_ = PlanarFrame::centered_on(raw_nodes);

  std::unordered_map<std::int64_t, std::uint32_t> node_index;
  for (std::size_t i = 0; i < raw_nodes.size(); ++i) {
    if (!node_index.emplace(node_ids[i], static_cast<std::uint32_t>(i)).second)
      throw Error(ErrorCode::validation,
                  "duplicate node id " + std::to_string(node_ids[i]));
    net.nodes_.push_back(RoadNode{node_ids[i], net.frame_.to_planar(raw_nodes[i])});
  }

  const auto add_segment = [&](std::int64_t source_id, std::uint32_t from,
                               std::uint32_t to, std::vector<Point> polyline,
                               double speed, bool reversed) {
    RoadSegment seg;
    seg.id = static_cast<SegmentId>(net.segments_.size());
    seg.source_id = source_id;
    seg.reversed = reversed;
    seg.from_node = from;
    seg.to_node = to;
    seg.polyline = std::move(polyline);
    seg.length_m = polyline_length(seg.polyline);
    seg.speed_limit_kmh = speed;
    seg.direction_angle = bearing(seg.polyline.front(), seg.polyline.back());
    if (seg.length_m <= 0.0)
      throw Error(ErrorCode::validation,
                  "segment " + std::to_string(source_id) + " has zero length");
    net.segments_.push_back(std::move(seg));
    return net.segments_.back().id;
  };

  for (std::size_t i = 0; i < doc["segments"].size(); ++i) {
    const json &s = doc["segments"][i];
    collect_unknown_keys(s, {"id", "from", "to", "speed_kmh", "oneway", "polyline"},
                         "segments[" + std::to_string(i) + "]", report);
    if (!s.contains("id") || !s.contains("from") || !s.contains("to") ||
        !s.contains("speed_kmh"))
      throw Error(ErrorCode::parse,
                  "segment " + std::to_string(i) + " missing id/from/to/speed_kmh");
    const std::int64_t sid = s["id"].get<std::int64_t>();
    const std::int64_t from_id = s["from"].get<std::int64_t>();
    const std::int64_t to_id = s["to"].get<std::int64_t>();
    const double speed = s["speed_kmh"].get<double>();
    const bool oneway = s.value("oneway", false);

    const auto from_it = node_index.find(from_id);
    const auto to_it = node_index.find(to_id);
    if (from_it == node_index.end() || to_it == node_index.end())
      throw Error(ErrorCode::validation,
                  "segment " + std::to_string(sid) + " references missing node " +
                      std::to_string(from_it == node_index.end() ? from_id : to_id));
    if (speed <= 0.0 || speed > 120.0)
      throw Error(ErrorCode::validation,
                  "segment " + std::to_string(sid) + " speed_kmh " +
                      std::to_string(speed) + " outside (0, 120]");

    std::vector<Point> polyline;
    if (s.contains("polyline") && !s["polyline"].empty()) {
      for (const auto &pt : s["polyline"])
        polyline.push_back(
            net.frame_.to_planar(LonLat{pt[0].get<double>(), pt[1].get<double>()}));
    } else {
      polyline = {net.nodes_[from_it->second].position,
                  net.nodes_[to_it->second].position};
    }
    if (distance(polyline.front(), net.nodes_[from_it->second].position) > 10.0 ||
        distance(polyline.back(), net.nodes_[to_it->second].position) > 10.0)
      throw Error(ErrorCode::validation,
                  "segment " + std::to_string(sid) +
                      " polyline does not join its end nodes");

    const SegmentId fwd =
        add_segment(sid, from_it->second, to_it->second, polyline, speed, false);
    if (!oneway) {
      std::vector<Point> back(polyline.rbegin(), polyline.rend());
      const SegmentId rev = add_segment(sid, to_it->second, from_it->second,
                                        std::move(back), speed, true);
      net.segments_[fwd].twin = rev;
      net.segments_[rev].twin = fwd;
    }
  }

  net.adjacency_.assign(net.nodes_.size(), {});
  net.incoming_.assign(net.nodes_.size(), {});
  for (const RoadSegment &seg : net.segments_) {
    net.adjacency_[seg.from_node].push_back(seg.id);
    net.incoming_[seg.to_node].push_back(seg.id);
  }

  net.build_index();
  return net;
}

void RoadNetwork::build_index() {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
  bool first = true;
  for (const RoadSegment &seg : segments_) {
    for (const Point &p : seg.polyline) {
      if (first) {
        min_x = max_x = p.x;
        min_y = max_y = p.y;
        first = false;
      } else {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
      }
    }
  }
  grid_min_x_ = min_x;
  grid_min_y_ = min_y;
  grid_cols_ = std::max(1, static_cast<int>((max_x - min_x) / cell_size_m_) + 1);
  grid_rows_ = std::max(1, static_cast<int>((max_y - min_y) / cell_size_m_) + 1);
  grid_cells_.assign(static_cast<std::size_t>(grid_cols_) * grid_rows_, {});

  for (const RoadSegment &seg : segments_) {
    double sx0 = seg.polyline.front().x, sx1 = sx0;
    double sy0 = seg.polyline.front().y, sy1 = sy0;
    for (const Point &p : seg.polyline) {
      sx0 = std::min(sx0, p.x);
      sx1 = std::max(sx1, p.x);
      sy0 = std::min(sy0, p.y);
      sy1 = std::max(sy1, p.y);
    }
    const int c0 = std::clamp(static_cast<int>((sx0 - grid_min_x_) / cell_size_m_), 0, grid_cols_ - 1);
    const int c1 = std::clamp(static_cast<int>((sx1 - grid_min_x_) / cell_size_m_), 0, grid_cols_ - 1);
    const int r0 = std::clamp(static_cast<int>((sy0 - grid_min_y_) / cell_size_m_), 0, grid_rows_ - 1);
    const int r1 = std::clamp(static_cast<int>((sy1 - grid_min_y_) / cell_size_m_), 0, grid_rows_ - 1);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c)
        grid_cells_[static_cast<std::size_t>(r) * grid_cols_ + c].push_back(seg.id);
  }
}

SegmentCandidate RoadNetwork::project_to_segment(const Point &p, SegmentId seg) const {
  const RoadSegment &s = segments_.at(seg);
  const Projection pr = project_to_polyline(s.polyline, p);
  return SegmentCandidate{seg, pr.point, pr.distance_m, pr.offset_m};
}

PointOnSegment RoadNetwork::point_on_segment(SegmentId seg, double offset_m) const {
  const RoadSegment &s = segments_.at(seg);
  const double off = std::clamp(offset_m, 0.0, s.length_m);
  return PointOnSegment{seg, off, point_at_offset(s.polyline, off)};
}

std::vector<SegmentCandidate> RoadNetwork::candidates_in_disc(const Point &center,
                                                              double radius_m) const {
  std::vector<SegmentId> ids;
  const int c0 = std::clamp(static_cast<int>((center.x - radius_m - grid_min_x_) / cell_size_m_), 0, grid_cols_ - 1);
  const int c1 = std::clamp(static_cast<int>((center.x + radius_m - grid_min_x_) / cell_size_m_), 0, grid_cols_ - 1);
  const int r0 = std::clamp(static_cast<int>((center.y - radius_m - grid_min_y_) / cell_size_m_), 0, grid_rows_ - 1);
  const int r1 = std::clamp(static_cast<int>((center.y + radius_m - grid_min_y_) / cell_size_m_), 0, grid_rows_ - 1);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const auto &cell = grid_cells_[static_cast<std::size_t>(r) * grid_cols_ + c];
      ids.insert(ids.end(), cell.begin(), cell.end());
    }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<SegmentCandidate> out;
  for (SegmentId id : ids) {
    SegmentCandidate cand = project_to_segment(center, id);
    if (cand.distance_m <= radius_m) out.push_back(std::move(cand));
  }
  return out;
}

std::vector<SegmentCandidate> RoadNetwork::candidate_segments(
    const Point &tower_position, double density_per_km2) const {
  return candidates_in_disc(tower_position, search_range_m(density_per_km2));
}

std::vector<double> RoadNetwork::node_distances(
    std::uint32_t source, const std::vector<std::uint32_t> &targets) const {
  std::vector<double> dist(nodes_.size(), kUnreachable);
  std::vector<bool> wanted(nodes_.size(), false);
  std::size_t remaining = 0;
  for (std::uint32_t t : targets)
    if (!wanted[t]) {
      wanted[t] = true;
      ++remaining;
    }

  using QE = std::pair<double, std::uint32_t>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    if (wanted[u]) {
      wanted[u] = false;
      if (--remaining == 0 && !targets.empty()) break;
    }
    for (SegmentId sid : adjacency_[u]) {
      const RoadSegment &seg = segments_[sid];
      const double nd = d + seg.length_m;
      if (nd < dist[seg.to_node]) {
        dist[seg.to_node] = nd;
        queue.emplace(nd, seg.to_node);
      }
    }
  }
  return dist;
}

double RoadNetwork::network_distance(const PointOnSegment &a,
                                     const PointOnSegment &b) const {
  double best = kUnreachable;
  if (a.segment == b.segment && b.offset_m >= a.offset_m)
    best = b.offset_m - a.offset_m;

  const RoadSegment &sa = segments_[a.segment];
  const RoadSegment &sb = segments_[b.segment];
  const auto dist = node_distances(sa.to_node, {sb.from_node});
  if (dist[sb.from_node] < kUnreachable) {
    const double around =
        (sa.length_m - a.offset_m) + dist[sb.from_node] + b.offset_m;
    best = std::min(best, around);
  }
  return best;
}

std::vector<double> RoadNetwork::distances_to_many(
    const PointOnSegment &from, std::span<const PointOnSegment> to) const {
  const RoadSegment &sa = segments_[from.segment];
  std::vector<std::uint32_t> targets;
  targets.reserve(to.size());
  for (const PointOnSegment &p : to) targets.push_back(segments_[p.segment].from_node);
  const auto dist = node_distances(sa.to_node, targets);

  std::vector<double> out;
  out.reserve(to.size());
  for (const PointOnSegment &p : to) {
    double best = kUnreachable;
    if (p.segment == from.segment && p.offset_m >= from.offset_m)
      best = p.offset_m - from.offset_m;
    const double via = dist[segments_[p.segment].from_node];
    if (via < kUnreachable)
      best = std::min(best, (sa.length_m - from.offset_m) + via + p.offset_m);
    out.push_back(best);
  }
  return out;
}

namespace {

struct SearchEntry {
  double f = 0.0;
  double g = 0.0;
  bool complete = false;
  std::uint32_t node = 0;
  std::vector<SegmentId> segments;
};

// Min-heap order: cheapest f first, then shortest g, then lexicographically
// smallest segment chain so that equal-length paths pop deterministically.
struct EntryAfter {
  bool operator()(const SearchEntry &a, const SearchEntry &b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g > b.g;
    return a.segments > b.segments;
  }
};

}  // namespace

std::vector<PathOnNetwork> RoadNetwork::k_shortest_paths(const PointOnSegment &a,
                                                         const PointOnSegment &b,
                                                         int k, double slack) const {
  std::vector<PathOnNetwork> results;
  if (k < 1) return results;
  const double shortest = network_distance(a, b);
  if (shortest >= kUnreachable) return results;
  const double bound = (1.0 + slack) * shortest + 1e-6;

  // Exact remaining distance from every node to the start of b's segment,
  // computed over the reverse graph; used as the admissible heuristic that
  // keeps the path enumeration inside the (1+slack) corridor. Nodes beyond
  // the corridor bound are never useful, so the sweep stops there.
  const RoadSegment &sb = segments_[b.segment];
  std::vector<double> to_target(nodes_.size(), kUnreachable);
  {
    using QE = std::pair<double, std::uint32_t>;
    std::priority_queue<QE, std::vector<QE>, std::greater<>> queue;
    to_target[sb.from_node] = 0.0;
    queue.emplace(0.0, sb.from_node);
    while (!queue.empty()) {
      const auto [d, u] = queue.top();
      queue.pop();
      if (d > to_target[u]) continue;
      if (d > bound) break;
      for (SegmentId sid : incoming_[u]) {
        const RoadSegment &seg = segments_[sid];
        const double nd = d + seg.length_m;
        if (nd < to_target[seg.from_node]) {
          to_target[seg.from_node] = nd;
          queue.emplace(nd, seg.from_node);
        }
      }
    }
  }

  const RoadSegment &sa = segments_[a.segment];
  std::priority_queue<SearchEntry, std::vector<SearchEntry>, EntryAfter> queue;

  if (a.segment == b.segment && b.offset_m >= a.offset_m - 1e-9) {
    const double len = std::max(0.0, b.offset_m - a.offset_m);
    if (len <= bound)
      queue.push(SearchEntry{len, len, true, 0, {a.segment}});
  }
  {
    const double g0 = sa.length_m - a.offset_m;
    const double h = to_target[sa.to_node];
    if (h < kUnreachable && g0 + h + b.offset_m <= bound)
      queue.push(SearchEntry{g0 + h + b.offset_m, g0, false, sa.to_node, {a.segment}});
  }

  const auto uses_segment = [](const std::vector<SegmentId> &segs, SegmentId id) {
    return std::find(segs.begin(), segs.end(), id) != segs.end();
  };

  std::size_t pops = 0;
  const std::size_t pop_cap = 1u << 21;
  while (!queue.empty() && static_cast<int>(results.size()) < k &&
         pops++ < pop_cap) {
    SearchEntry e = queue.top();
    queue.pop();
    if (e.complete) {
      PathOnNetwork path;
      path.segments = std::move(e.segments);
      path.entry_offset_m = a.offset_m;
      path.exit_offset_m = b.offset_m;
      path.length_m = e.g;
      results.push_back(std::move(path));
      continue;
    }
    if (e.node == sb.from_node) {
      // Finish across b's segment. The entry segment may be re-entered as
      // this final partial arc (wrap-around); a full mid-path traversal of
      // b's segment may not.
      const bool seg_b_in_middle =
          e.segments.size() > 1 && uses_segment({e.segments.begin() + 1, e.segments.end()}, b.segment);
      const bool seg_b_is_entry = e.segments.front() == b.segment;
      if (!seg_b_in_middle && (!seg_b_is_entry || e.segments.size() > 1)) {
        const double total = e.g + b.offset_m;
        if (total <= bound) {
          SearchEntry done;
          done.f = total;
          done.g = total;
          done.complete = true;
          done.segments = e.segments;
          done.segments.push_back(b.segment);
          queue.push(std::move(done));
        }
      }
    }
    for (SegmentId sid : adjacency_[e.node]) {
      if (uses_segment(e.segments, sid)) continue;
      const RoadSegment &seg = segments_[sid];
      const double g2 = e.g + seg.length_m;
      const double h = to_target[seg.to_node];
      if (h >= kUnreachable) continue;
      const double f2 = g2 + h + b.offset_m;
      if (f2 > bound) continue;
      SearchEntry next;
      next.f = f2;
      next.g = g2;
      next.node = seg.to_node;
      next.segments = e.segments;
      next.segments.push_back(sid);
      queue.push(std::move(next));
    }
  }
  return results;
}

std::optional<PathOnNetwork> RoadNetwork::shortest_path(const PointOnSegment &a,
                                                        const PointOnSegment &b) const {
  auto paths = k_shortest_paths(a, b, 1, 0.0);
  if (paths.empty()) return std::nullopt;
  return std::move(paths.front());
}

}  // namespace cellsim
