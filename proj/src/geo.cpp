#include "lcmap/geo.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace lcmap::geo {

LocalFrame::LocalFrame(LonLat origin)
    : origin_(origin),
      meters_per_deg_lon_(kEarthRadiusM * deg2rad(1.0) * std::cos(deg2rad(origin.lat))),
      meters_per_deg_lat_(kEarthRadiusM * deg2rad(1.0)) {}

Vec2 LocalFrame::project(LonLat p) const {
  return {(p.lon - origin_.lon) * meters_per_deg_lon_, (p.lat - origin_.lat) * meters_per_deg_lat_};
}

LonLat LocalFrame::unproject(Vec2 v) const {
  return {origin_.lon + v.x / meters_per_deg_lon_, origin_.lat + v.y / meters_per_deg_lat_};
}

TangentFrame::TangentFrame(LonLat origin)
    : lon_(origin.lon), lat_(deg2rad(origin.lat)), sin_lat_(std::sin(lat_)), cos_lat_(std::cos(lat_)) {}

Vec2 TangentFrame::project(LonLat p) const {
  const double lat = deg2rad(p.lat);
  const double dlon = deg2rad(p.lon - lon_);
  const double cos_lat = std::cos(lat);
  const double h_lat = std::sin(0.5 * (lat - lat_));
  const double h_lon = std::sin(0.5 * dlon);
  const double a = h_lat * h_lat + cos_lat_ * cos_lat * h_lon * h_lon;
  const double d = 2.0 * std::atan2(std::sqrt(a), std::sqrt(std::max(0.0, 1.0 - a))) * kEarthRadiusM;
  // Initial bearing, with the north term rearranged so nearby points don't cancel.
  const double east = std::sin(dlon) * cos_lat;
  const double north = std::sin(lat - lat_) + sin_lat_ * cos_lat * 2.0 * h_lon * h_lon;
  const double norm = std::hypot(east, north);
  if (norm == 0.0) return {0.0, 0.0};
  return {d * east / norm, d * north / norm};
}

double distance_m(LonLat a, LonLat b) {
  const double mean_lat = deg2rad(0.5 * (a.lat + b.lat));
  const double dx = deg2rad(b.lon - a.lon) * std::cos(mean_lat) * kEarthRadiusM;
  const double dy = deg2rad(b.lat - a.lat) * kEarthRadiusM;
  return std::hypot(dx, dy);
}

bool is_canonical_orientation(std::span<const LonLat> pts) {
  if (pts.empty()) return true;
  const auto& f = pts.front();
  const auto& b = pts.back();
  return std::tie(f.lon, f.lat) <= std::tie(b.lon, b.lat);
}

double polyline_length_m(std::span<const LonLat> pts) {
  double total = 0.0;
  if (pts.size() < 2) return total;
  if (is_canonical_orientation(pts)) {
    for (std::size_t i = 1; i < pts.size(); ++i) total += distance_m(pts[i - 1], pts[i]);
  } else {
    for (std::size_t i = pts.size() - 1; i > 0; --i) total += distance_m(pts[i], pts[i - 1]);
  }
  return total;
}

LonLat lerp(LonLat a, LonLat b, double fraction) {
  return {a.lon + (b.lon - a.lon) * fraction, a.lat + (b.lat - a.lat) * fraction};
}

double fraction_for_distance(LonLat a, LonLat b, double target_m) {
  const double full = distance_m(a, b);
  if (full <= 0.0) return 0.0;
  double f = std::clamp(target_m / full, 0.0, 1.0);
  // Newton steps; the derivative is ~full along a straight lon/lat segment.
  for (int i = 0; i < 4; ++i) {
    const double err = distance_m(a, lerp(a, b, f)) - target_m;
    f = std::clamp(f - err / full, 0.0, 1.0);
  }
  return f;
}

double wrap_heading_deg(double h) {
  double w = std::fmod(h, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

double bearing_deg(LonLat from, LonLat to) {
  const double mean_lat = deg2rad(0.5 * (from.lat + to.lat));
  const double east = deg2rad(to.lon - from.lon) * std::cos(mean_lat);
  const double north = deg2rad(to.lat - from.lat);
  return wrap_heading_deg(rad2deg(std::atan2(east, north)));
}

double heading_difference_deg(double a, double b) {
  double d = std::fabs(wrap_heading_deg(a) - wrap_heading_deg(b));
  return d > 180.0 ? 360.0 - d : d;
}

double interpolate_heading_deg(double a, double b, double w) {
  double delta = std::fmod(b - a + 540.0, 360.0);
  if (delta < 0.0) delta += 360.0;
  delta -= 180.0;
  return wrap_heading_deg(a + w * delta);
}

double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b, double* t_out) {
  const double ex = b.x - a.x;
  const double ey = b.y - a.y;
  const double len2 = ex * ex + ey * ey;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - a.x) * ex + (p.y - a.y) * ey) / len2, 0.0, 1.0);
  if (t_out) *t_out = t;
  return std::hypot(p.x - (a.x + t * ex), p.y - (a.y + t * ey));
}

LonLat destination(LonLat from, double heading_deg, double distance) {
  const double h = deg2rad(heading_deg);
  const double north = distance * std::cos(h);
  const double east = distance * std::sin(h);
  const double lat = from.lat + rad2deg(north / kEarthRadiusM);
  const double mean_lat = deg2rad(0.5 * (from.lat + lat));
  const double lon = from.lon + rad2deg(east / (kEarthRadiusM * std::cos(mean_lat)));
  return {lon, lat};
}

}  // namespace lcmap::geo
