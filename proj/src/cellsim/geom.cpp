#include "cellsim/geom.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <utility>

namespace cellsim {

double bearing(const Point &a, const Point &b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  if (dx == 0.0 && dy == 0.0) return 0.0;
  double ang = std::atan2(dy, dx);
  if (ang < 0.0) ang += kTwoPi;
  return ang;
}

double angle_difference(double a, double b) {
  double d = std::fmod(std::fabs(a - b), kTwoPi);
  if (d > kPi) d = kTwoPi - d;
  return d;
}

PlanarFrame::PlanarFrame(const LonLat &origin)
    : origin_(origin),
      meters_per_deg_lon_(kEarthRadiusM * kPi / 180.0 *
                          std::cos(origin.lat * kPi / 180.0)),
      meters_per_deg_lat_(kEarthRadiusM * kPi / 180.0) {}

PlanarFrame PlanarFrame::centered_on(std::span<const LonLat> points) {
  if (points.empty()) return PlanarFrame(LonLat{0.0, 0.0});
  double lon = 0.0, lat = 0.0;
  for (const auto &p : points) {
    lon += p.lon;
    lat += p.lat;
  }
  const double n = static_cast<double>(points.size());
  return PlanarFrame(LonLat{lon / n, lat / n});
}

Point PlanarFrame::to_planar(const LonLat &p) const {
  return Point{(p.lon - origin_.lon) * meters_per_deg_lon_,
               (p.lat - origin_.lat) * meters_per_deg_lat_};
}

LonLat PlanarFrame::to_lonlat(const Point &p) const {
  return LonLat{origin_.lon + p.x / meters_per_deg_lon_,
                origin_.lat + p.y / meters_per_deg_lat_};
}

namespace {

// Projection of p onto the segment [a, b], clamped to the endpoints.
// Returns (point, squared distance, offset along ab).
struct SubProjection {
  Point point;
  double dist2;
  double along;
};

SubProjection project_to_edge(const Point &a, const Point &b, const Point &p) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  const Point q{a.x + t * vx, a.y + t * vy};
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return SubProjection{q, dx * dx + dy * dy, t * std::sqrt(len2)};
}

}  // namespace

Projection project_to_polyline(std::span<const Point> polyline, const Point &p) {
  Projection best;
  if (polyline.empty()) return best;
  if (polyline.size() == 1) {
    best.point = polyline[0];
    best.distance_m = distance(polyline[0], p);
    return best;
  }
  double best_d2 = std::numeric_limits<double>::infinity();
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const SubProjection sp = project_to_edge(polyline[i], polyline[i + 1], p);
    if (sp.dist2 < best_d2) {
      best_d2 = sp.dist2;
      best.point = sp.point;
      best.offset_m = cum + sp.along;
    }
    cum += distance(polyline[i], polyline[i + 1]);
  }
  best.distance_m = std::sqrt(best_d2);
  return best;
}

double polyline_length(std::span<const Point> polyline) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i)
    len += distance(polyline[i], polyline[i + 1]);
  return len;
}

Point point_at_offset(std::span<const Point> polyline, double offset_m) {
  if (polyline.empty()) return Point{};
  if (offset_m <= 0.0) return polyline.front();
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const double d = distance(polyline[i], polyline[i + 1]);
    if (offset_m <= d && d > 0.0) {
      const double t = offset_m / d;
      return Point{polyline[i].x + t * (polyline[i + 1].x - polyline[i].x),
                   polyline[i].y + t * (polyline[i + 1].y - polyline[i].y)};
    }
    offset_m -= d;
  }
  return polyline.back();
}

double interval_union_length(std::span<const SegmentInterval> a) {
  std::map<unsigned, std::vector<std::pair<double, double>>> by_seg;
  for (const auto &iv : a)
    if (iv.hi > iv.lo) by_seg[iv.segment].emplace_back(iv.lo, iv.hi);
  double total = 0.0;
  for (auto &[seg, ivs] : by_seg) {
    std::sort(ivs.begin(), ivs.end());
    double cur_lo = 0.0, cur_hi = -1.0;
    for (const auto &[lo, hi] : ivs) {
      if (cur_hi < cur_lo || lo > cur_hi) {
        if (cur_hi >= cur_lo) total += cur_hi - cur_lo;
        cur_lo = lo;
        cur_hi = hi;
      } else {
        cur_hi = std::max(cur_hi, hi);
      }
    }
    if (cur_hi >= cur_lo) total += cur_hi - cur_lo;
  }
  return total;
}

double interval_overlap_length(std::span<const SegmentInterval> a,
                               std::span<const SegmentInterval> b) {
  // Union per segment, then intersect. Exact interval arithmetic; no grid.
  std::map<unsigned, std::vector<std::pair<double, double>>> by_seg_a, by_seg_b;
  for (const auto &iv : a)
    if (iv.hi > iv.lo) by_seg_a[iv.segment].emplace_back(iv.lo, iv.hi);
  for (const auto &iv : b)
    if (iv.hi > iv.lo) by_seg_b[iv.segment].emplace_back(iv.lo, iv.hi);

  const auto merge = [](std::vector<std::pair<double, double>> &ivs) {
    std::sort(ivs.begin(), ivs.end());
    std::size_t out = 0;
    for (std::size_t i = 0; i < ivs.size(); ++i) {
      if (out > 0 && ivs[i].first <= ivs[out - 1].second) {
        ivs[out - 1].second = std::max(ivs[out - 1].second, ivs[i].second);
      } else {
        ivs[out++] = ivs[i];
      }
    }
    ivs.resize(out);
  };

  double total = 0.0;
  for (auto &[seg, ivs_a] : by_seg_a) {
    auto it = by_seg_b.find(seg);
    if (it == by_seg_b.end()) continue;
    merge(ivs_a);
    merge(it->second);
    std::size_t i = 0, j = 0;
    while (i < ivs_a.size() && j < it->second.size()) {
      const auto &[alo, ahi] = ivs_a[i];
      const auto &[blo, bhi] = it->second[j];
      const double lo = std::max(alo, blo);
      const double hi = std::min(ahi, bhi);
      if (hi > lo) total += hi - lo;
      if (ahi < bhi)
        ++i;
      else
        ++j;
    }
  }
  return total;
}

}  // namespace cellsim
