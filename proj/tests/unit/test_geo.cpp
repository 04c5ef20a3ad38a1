#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lcmap/geo.hpp"
#include "oracles.hpp"

using namespace lcmap::geo;

TEST_SUITE("geo") {

TEST_CASE("local frame round trip") {
  const LocalFrame f({9.18, 48.78});
  const LonLat p{9.19, 48.785};
  const auto back = f.unproject(f.project(p));
  CHECK(back.lon == doctest::Approx(p.lon).epsilon(1e-12));
  CHECK(back.lat == doctest::Approx(p.lat).epsilon(1e-12));
  const auto v = f.project(p);
  const auto o = oracle::to_xy(p, {9.18, 48.78});
  CHECK(v.x == doctest::Approx(o.x).epsilon(1e-9));
  CHECK(v.y == doctest::Approx(o.y).epsilon(1e-9));
}

TEST_CASE("distance is symmetric and matches the sphere") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-0.005, 0.005);
  for (int i = 0; i < 200; ++i) {
    const LonLat a{9.18 + d(rng), 48.78 + d(rng)};
    const LonLat b{9.18 + d(rng), 48.78 + d(rng)};
    CHECK(distance_m(a, b) == distance_m(b, a));
    CHECK(distance_m(a, b) == doctest::Approx(oracle::haversine(a, b)).epsilon(1e-6));
  }
}

TEST_CASE("tangent frame keeps great-circle distance and bearing from the origin") {
  const LonLat o{9.18, 48.78};
  const TangentFrame f(o);
  for (double b : {0.0, 30.0, 90.0, 181.0, 300.0}) {
    const auto p = oracle::sphere_destination(o, b, 400.0);
    const auto v = f.project(p);
    CHECK(std::hypot(v.x, v.y) == doctest::Approx(400.0).epsilon(1e-10));
    CHECK(heading_difference_deg(rad2deg(std::atan2(v.x, v.y)), b) < 1e-9);
  }
  const auto z = f.project(o);
  CHECK(z.x == 0.0);
  CHECK(z.y == 0.0);
}

TEST_CASE("polyline length does not depend on direction") {
  const auto pts = oracle::arc({9.18, 48.78}, 300.0, 250.0, 1.0, true);
  std::vector<LonLat> rev(pts.rbegin(), pts.rend());
  CHECK(polyline_length_m(pts) == polyline_length_m(rev));
  CHECK(polyline_length_m(pts) == doctest::Approx(250.0).epsilon(1e-4));
}

TEST_CASE("destination travels the requested distance") {
  const LonLat o{9.18, 48.78};
  for (double h : {0.0, 45.0, 90.0, 200.0, 359.0}) {
    const auto p = destination(o, h, 137.5);
    CHECK(distance_m(o, p) == doctest::Approx(137.5).epsilon(1e-9));
    CHECK(heading_difference_deg(bearing_deg(o, p), h) < 1e-6);
  }
}

TEST_CASE("headings wrap and interpolate on the short arc") {
  CHECK(interpolate_heading_deg(350.0, 10.0, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(interpolate_heading_deg(10.0, 350.0, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(heading_difference_deg(350.0, 10.0) == doctest::Approx(20.0));
  CHECK(heading_difference_deg(0.0, 180.0) == doctest::Approx(180.0));
  CHECK(wrap_heading_deg(-90.0) == doctest::Approx(270.0));
  CHECK(wrap_heading_deg(720.0) == doctest::Approx(0.0));
  const double h = interpolate_heading_deg(170.0, 250.0, 0.5);
  CHECK(h == doctest::Approx(oracle::mid_heading(170.0, 250.0)));
}

TEST_CASE("point to segment distance clamps") {
  double t = -1;
  CHECK(point_segment_distance({5, 3}, {0, 0}, {10, 0}, &t) == doctest::Approx(3.0));
  CHECK(t == doctest::Approx(0.5));
  CHECK(point_segment_distance({-4, 3}, {0, 0}, {10, 0}, &t) == doctest::Approx(5.0));
  CHECK(t == 0.0);
}

TEST_CASE("fraction_for_distance inverts lerp") {
  const LonLat a{9.18, 48.78}, b{9.183, 48.781};
  const double f = fraction_for_distance(a, b, 100.0);
  CHECK(distance_m(a, lerp(a, b, f)) == doctest::Approx(100.0).epsilon(1e-9));
}

}  // TEST_SUITE
