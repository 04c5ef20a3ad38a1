#pragma once

// Reference implementations used only by tests. They are deliberately naive
// (brute force, closed-form geometry) and share no code with the library
// beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "lcmap/detect.hpp"
#include "lcmap/geo.hpp"
#include "lcmap/mapmodel.hpp"

namespace oracle {

inline constexpr double kR = 6371008.8;
inline constexpr double kPi = 3.14159265358979323846;

struct XY {
  double x = 0.0;
  double y = 0.0;
};

// Equirectangular plane around `origin`.
inline XY to_xy(lcmap::geo::LonLat p, lcmap::geo::LonLat origin) {
  const double k = kPi / 180.0;
  return {(p.lon - origin.lon) * k * kR * std::cos(origin.lat * k), (p.lat - origin.lat) * k * kR};
}

inline lcmap::geo::LonLat from_xy(XY v, lcmap::geo::LonLat origin) {
  const double k = kPi / 180.0;
  return {origin.lon + v.x / (k * kR * std::cos(origin.lat * k)), origin.lat + v.y / (k * kR)};
}

// Great-circle distance (haversine).
inline double haversine(lcmap::geo::LonLat a, lcmap::geo::LonLat b) {
  const double k = kPi / 180.0;
  const double s1 = std::sin(0.5 * (b.lat - a.lat) * k);
  const double s2 = std::sin(0.5 * (b.lon - a.lon) * k);
  const double h = s1 * s1 + std::cos(a.lat * k) * std::cos(b.lat * k) * s2 * s2;
  return 2.0 * kR * std::asin(std::sqrt(h));
}

// Point at great-circle distance d along initial bearing `bearing` (degrees).
inline lcmap::geo::LonLat sphere_destination(lcmap::geo::LonLat p, double bearing, double d) {
  const double k = kPi / 180.0;
  const double delta = d / kR;
  const double th = bearing * k;
  const double lat1 = p.lat * k;
  const double lat2 = std::asin(std::sin(lat1) * std::cos(delta) + std::cos(lat1) * std::sin(delta) * std::cos(th));
  const double dlon = std::atan2(std::sin(th) * std::sin(delta) * std::cos(lat1),
                                 std::cos(delta) - std::sin(lat1) * std::sin(lat2));
  return {p.lon + dlon / k, lat2 / k};
}

// Circle of geodesic radius r on the sphere, starting at `origin` heading
// east. Vertices every `spacing` meters of arclength plus the end point.
inline std::vector<lcmap::geo::LonLat> arc(lcmap::geo::LonLat origin, double r, double length, double spacing,
                                           bool left) {
  std::vector<lcmap::geo::LonLat> pts;
  const auto center = sphere_destination(origin, left ? 0.0 : 180.0, r);
  const auto n = static_cast<int>(std::ceil(length / spacing - 1e-9));
  for (int i = 0; i <= n; ++i) {
    const double s = std::min(length, i * spacing);
    const double turn = s / r * 180.0 / kPi;
    pts.push_back(sphere_destination(center, left ? 180.0 - turn : turn, r));
  }
  return pts;
}

inline double sagitta_ratio(double r, double l) { return r * (1.0 - std::cos(l / (2.0 * r))) / l; }

// Heading halfway between a and b on the shorter arc, from the mean unit vector.
inline double mid_heading(double a, double b) {
  const double k = kPi / 180.0;
  const double x = std::sin(a * k) + std::sin(b * k);
  const double y = std::cos(a * k) + std::cos(b * k);
  double h = std::atan2(x, y) / k;
  if (h < 0.0) h += 360.0;
  return h;
}

struct Ev {
  double t;
  lcmap::LaneChangeDirection dir;
};

// Label rule applied literally: among crossings 0 <= t_c - t <= horizon pick
// the nearest one.
inline std::vector<lcmap::ManeuverLabel> labels(const std::vector<double>& times, const std::vector<Ev>& events,
                                                double horizon) {
  std::vector<lcmap::ManeuverLabel> out;
  for (double t : times) {
    std::optional<Ev> best;
    for (const auto& e : events) {
      const double lead = e.t - t;
      if (lead >= -1e-9 && lead <= horizon + 1e-9 && (!best || lead < best->t - t)) best = e;
    }
    out.push_back(best ? lcmap::label_for(best->dir) : lcmap::ManeuverLabel::FLW);
  }
  return out;
}

// Nearest link within radius whose nearest edge heading is within tolerance;
// scans every edge of every link.
inline std::optional<std::size_t> brute_match(const std::vector<lcmap::Link>& links, lcmap::geo::LonLat pos,
                                              double heading, double radius, double tol) {
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t i = 0; i < links.size(); ++i) {
    double link_d = INFINITY;
    double link_h = 0.0;
    const auto& pl = links[i].polyline;
    for (std::size_t e = 1; e < pl.size(); ++e) {
      const XY a = to_xy(pl[e - 1], pos);
      const XY b = to_xy(pl[e], pos);
      const double ex = b.x - a.x, ey = b.y - a.y;
      const double len2 = ex * ex + ey * ey;
      const double t = len2 > 0 ? std::clamp(-(a.x * ex + a.y * ey) / len2, 0.0, 1.0) : 0.0;
      const double d = std::hypot(a.x + t * ex, a.y + t * ey);
      if (d < link_d) {
        link_d = d;
        link_h = std::atan2(ex, ey) * 180.0 / kPi;
      }
    }
    double diff = std::fmod(std::fabs(link_h - heading), 360.0);
    if (diff > 180.0) diff = 360.0 - diff;
    if (link_d > radius || diff > tol) continue;
    if (!best || link_d < best_d) {
      best = i;
      best_d = link_d;
    }
  }
  return best;
}

// Stationary Poisson crossings on a long timeline, labeled on a dt grid.
inline std::pair<double, double> monte_carlo_label_fraction(double lambda_left, double lambda_right, double horizon,
                                                            double dt, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(lambda_left + lambda_right);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double span = static_cast<double>(samples) * dt;
  std::vector<Ev> events;
  for (double t = gap(rng); t < span + horizon + 1.0; t += gap(rng)) {
    events.push_back({t, u(rng) * (lambda_left + lambda_right) < lambda_left ? lcmap::LaneChangeDirection::Left
                                                                              : lcmap::LaneChangeDirection::Right});
  }
  std::size_t left = 0, right = 0, next = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    while (next < events.size() && events[next].t < t) ++next;
    if (next < events.size() && events[next].t - t <= horizon) {
      ++(events[next].dir == lcmap::LaneChangeDirection::Left ? left : right);
    }
  }
  return {static_cast<double>(left) / static_cast<double>(samples),
          static_cast<double>(right) / static_cast<double>(samples)};
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
