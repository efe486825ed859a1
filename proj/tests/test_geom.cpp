#include <doctest.h>

#include "cellsim/geom.hpp"

#include <vector>

using namespace cellsim;

TEST_CASE("bearing covers the four quadrants") {
  CHECK(bearing({0, 0}, {1, 0}) == doctest::Approx(0.0));
  CHECK(bearing({0, 0}, {0, 1}) == doctest::Approx(kPi / 2));
  CHECK(bearing({0, 0}, {-1, 0}) == doctest::Approx(kPi));
  CHECK(bearing({0, 0}, {0, -1}) == doctest::Approx(3 * kPi / 2));
}

TEST_CASE("angle_difference is the smallest separation") {
  CHECK(angle_difference(0.1, kTwoPi - 0.1) == doctest::Approx(0.2));
  CHECK(angle_difference(0.0, kPi) == doctest::Approx(kPi));
  CHECK(angle_difference(1.0, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("projection onto a polyline clamps to endpoints") {
  const std::vector<Point> line = {{0, 0}, {100, 0}};

  SUBCASE("point on the segment") {
    const auto pr = project_to_polyline(line, {40, 0});
    CHECK(pr.distance_m == doctest::Approx(0.0));
    CHECK(pr.offset_m == doctest::Approx(40.0));
  }
  SUBCASE("perpendicular foot at the midpoint") {
    const auto pr = project_to_polyline(line, {50, 100});
    CHECK(pr.distance_m == doctest::Approx(100.0));
    CHECK(pr.point.x == doctest::Approx(50.0));
    CHECK(pr.point.y == doctest::Approx(0.0));
  }
  SUBCASE("beyond the end clamps to the endpoint") {
    const auto pr = project_to_polyline(line, {130, 40});
    CHECK(pr.point.x == doctest::Approx(100.0));
    CHECK(pr.distance_m == doctest::Approx(50.0));
    CHECK(pr.offset_m == doctest::Approx(100.0));
  }
}

TEST_CASE("planar frame round-trips coordinates") {
  const PlanarFrame frame(LonLat{108.0, 34.0});
  const Point p{1234.5, -987.25};
  const LonLat ll = frame.to_lonlat(p);
  const Point back = frame.to_planar(ll);
  CHECK(back.x == doctest::Approx(p.x).epsilon(1e-9));
  CHECK(back.y == doctest::Approx(p.y).epsilon(1e-9));
}

TEST_CASE("interval overlap arithmetic") {
  const std::vector<SegmentInterval> a = {{1, 0.0, 50.0}, {2, 10.0, 20.0}};
  const std::vector<SegmentInterval> b = {{1, 25.0, 60.0}, {3, 0.0, 5.0}};
  CHECK(interval_overlap_length(a, b) == doctest::Approx(25.0));

  SUBCASE("union merges overlapping pieces before intersecting") {
    const std::vector<SegmentInterval> c = {{1, 0.0, 30.0}, {1, 20.0, 50.0}};
    const std::vector<SegmentInterval> d = {{1, 0.0, 50.0}};
    CHECK(interval_overlap_length(c, d) == doctest::Approx(50.0));
    CHECK(interval_union_length(c) == doctest::Approx(50.0));
  }
  SUBCASE("disjoint segments overlap nothing") {
    const std::vector<SegmentInterval> c = {{7, 0.0, 10.0}};
    CHECK(interval_overlap_length(a, c) == doctest::Approx(0.0));
  }
}
