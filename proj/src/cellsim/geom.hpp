/**
 * cellsim
 *
 * Planar geometry primitives shared by the road network, map matching
 * and the benchmark generator. All distances are meters in a local
 * equirectangular frame fixed at network load time.
 */

#ifndef CELLSIM_GEOM_HPP_
#define CELLSIM_GEOM_HPP_

#include <cmath>
#include <span>
#include <vector>

namespace cellsim {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kEarthRadiusM = 6371000.0;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline bool operator==(const Point &a, const Point &b) {
  return a.x == b.x && a.y == b.y;
}

inline double distance(const Point &a, const Point &b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

/** Bearing of the vector a->b, radians in [0, 2pi). Undefined input (a == b)
 *  maps to 0. */
double bearing(const Point &a, const Point &b);

/** Smallest absolute angular difference between two bearings, in [0, pi]. */
double angle_difference(double a, double b);

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
};

/**
 * Local planar frame: equirectangular projection about a reference point.
 * City-scale error is negligible and geometry stays testable in meters.
 */
class PlanarFrame {
public:
  PlanarFrame() : PlanarFrame(LonLat{0.0, 0.0}) {}
  explicit PlanarFrame(const LonLat &origin);

  static PlanarFrame centered_on(std::span<const LonLat> points);

  Point to_planar(const LonLat &p) const;
  LonLat to_lonlat(const Point &p) const;

  const LonLat &origin() const { return origin_; }

private:
  LonLat origin_;
  double meters_per_deg_lon_;
  double meters_per_deg_lat_;
};

struct Projection {
  Point point;        // closest point on the polyline
  double distance_m = 0.0;
  double offset_m = 0.0;  // arc length from the polyline start to `point`
};

/** Closest point on a polyline, clamped to its endpoints. */
Projection project_to_polyline(std::span<const Point> polyline, const Point &p);

double polyline_length(std::span<const Point> polyline);

/** Point at `offset_m` along the polyline (clamped to [0, length]). */
Point point_at_offset(std::span<const Point> polyline, double offset_m);

/**
 * One-dimensional interval on a directed road segment, used for overlap
 * arithmetic between trajectories.
 */
struct SegmentInterval {
  unsigned segment = 0;
  double lo = 0.0;
  double hi = 0.0;
};

/**
 * Length of the intersection of the union of `a` with the union of `b`,
 * interval-exact. Intervals may repeat segments and overlap each other.
 */
double interval_overlap_length(std::span<const SegmentInterval> a,
                               std::span<const SegmentInterval> b);

/** Measure of the union of the intervals (repeats counted once). */
double interval_union_length(std::span<const SegmentInterval> a);

}  // namespace cellsim

#endif  // CELLSIM_GEOM_HPP_
