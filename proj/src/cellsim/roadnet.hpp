/**
 * cellsim
 *
 * Directed road network: loading, spatial candidate lookup, projection,
 * and the path queries map matching needs (point-to-point distance,
 * shortest path, bounded k-shortest loopless paths).
 *
 * The network is immutable once loaded; every query below is const and
 * safe to call from any number of worker threads.
 */

#ifndef CELLSIM_ROADNET_HPP_
#define CELLSIM_ROADNET_HPP_

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cellsim/geom.hpp"

namespace cellsim {

using SegmentId = std::uint32_t;
inline constexpr SegmentId kNoSegment = std::numeric_limits<SegmentId>::max();
inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct RoadNode {
  std::int64_t id = 0;  // id from the input file
  Point position;
};

/**
 * One directed segment. A two-way road in the input becomes two of these
 * with mirrored polylines and opposite direction angles; `twin` links them.
 */
struct RoadSegment {
  SegmentId id = 0;            // dense, assigned in file order
  std::int64_t source_id = 0;  // segment id from the input file
  bool reversed = false;       // back direction of a two-way road
  std::uint32_t from_node = 0;  // dense node indices
  std::uint32_t to_node = 0;
  std::vector<Point> polyline;
  double length_m = 0.0;
  double speed_limit_kmh = 0.0;
  double direction_angle = 0.0;  // chord bearing, [0, 2pi)
  SegmentId twin = kNoSegment;
};

struct PointOnSegment {
  SegmentId segment = 0;
  double offset_m = 0.0;
  Point position;
};

/**
 * A directed path between two points on the network. `segments` is the
 * traversal order; only the first segment is entered at `entry_offset_m`
 * and only the last is left at `exit_offset_m` (full traversal elsewhere).
 * A single-segment path runs from entry to exit on that segment.
 */
struct PathOnNetwork {
  std::vector<SegmentId> segments;
  double entry_offset_m = 0.0;
  double exit_offset_m = 0.0;
  double length_m = 0.0;
};

bool operator==(const PathOnNetwork &a, const PathOnNetwork &b);

struct SegmentCandidate {
  SegmentId segment = 0;
  Point projected;
  double distance_m = 0.0;
  double offset_m = 0.0;
};

/**
 * Search radius around a cell tower as a function of the local tower
 * density: 200 m in dense areas (>= 50 towers/km^2), 1000 m in sparse
 * areas (<= 5/km^2), linear in between.
 */
double search_range_m(double density_per_km2);

struct LoadReport {
  std::vector<std::string> unknown_keys;  // warned and ignored
};

class RoadNetwork {
public:
  RoadNetwork() = default;  // empty; populate via load/from_json_text

  /** Loads the JSON road-network file. Throws Error{parse} with a line
   *  number on malformed input and Error{validation} on dangling node
   *  references or invariant violations. */
  static RoadNetwork load(const std::string &path, LoadReport *report = nullptr);
  static RoadNetwork from_json_text(const std::string &text,
                                    LoadReport *report = nullptr);

  const std::vector<RoadNode> &nodes() const { return nodes_; }
  const std::vector<RoadSegment> &segments() const { return segments_; }
  const RoadSegment &segment(SegmentId id) const { return segments_[id]; }
  const std::vector<SegmentId> &out_segments(std::uint32_t node) const {
    return adjacency_[node];
  }
  const PlanarFrame &frame() const { return frame_; }

  /** Closest point on `seg` (clamped to its endpoints) and the planar
   *  distance to it. */
  SegmentCandidate project_to_segment(const Point &p, SegmentId seg) const;

  PointOnSegment point_on_segment(SegmentId seg, double offset_m) const;

  /** All segments whose geometry intersects the disc. */
  std::vector<SegmentCandidate> candidates_in_disc(const Point &center,
                                                   double radius_m) const;

  /** Segments within the density-driven search range of a tower site. */
  std::vector<SegmentCandidate> candidate_segments(const Point &tower_position,
                                                   double density_per_km2) const;

  /** Length of the shortest directed path a -> b; kUnreachable if none. */
  double network_distance(const PointOnSegment &a, const PointOnSegment &b) const;

  /** Shortest directed path a -> b with the same tie rules as
   *  k_shortest_paths (it is its first entry). */
  std::optional<PathOnNetwork> shortest_path(const PointOnSegment &a,
                                             const PointOnSegment &b) const;

  /**
   * Up to k loopless directed paths a -> b, sorted by length, all within
   * (1+slack) of the shortest. Loopless means no directed segment is
   * traversed twice; the entry segment may reappear as the final partial
   * arc (a path that leaves a segment and comes back onto it).
   */
  std::vector<PathOnNetwork> k_shortest_paths(const PointOnSegment &a,
                                              const PointOnSegment &b, int k,
                                              double slack) const;

  /**
   * Shortest-path lengths from `from` to every entry of `to` (one Dijkstra,
   * early exit once all targets settle). Row layout matches `to`.
   */
  std::vector<double> distances_to_many(const PointOnSegment &from,
                                        std::span<const PointOnSegment> to) const;

private:
  void build_index();
  /** Node-level Dijkstra from `source`; stops once all `targets` are
   *  settled (empty targets = full sweep). */
  std::vector<double> node_distances(std::uint32_t source,
                                     const std::vector<std::uint32_t> &targets) const;

  PlanarFrame frame_;
  std::vector<RoadNode> nodes_;
  std::vector<RoadSegment> segments_;
  std::vector<std::vector<SegmentId>> adjacency_;
  std::vector<std::vector<SegmentId>> incoming_;

  // Uniform grid over segment bounding boxes.
  double cell_size_m_ = 250.0;
  double grid_min_x_ = 0.0, grid_min_y_ = 0.0;
  int grid_cols_ = 0, grid_rows_ = 0;
  std::vector<std::vector<SegmentId>> grid_cells_;
};

}  // namespace cellsim

#endif  // CELLSIM_ROADNET_HPP_
