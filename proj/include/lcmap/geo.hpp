#pragma once

#include <cstddef>
#include <span>

namespace lcmap::geo {

inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr double kPi = 3.14159265358979323846;

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const LonLat&, const LonLat&) = default;
};

/// Planar east/north coordinates in meters.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Equirectangular projection around a fixed origin. Cheap and invertible;
/// east-west scale drifts by about tan(lat) * dlat away from the origin
/// latitude (1e-5 relative across 200 m at mid latitudes), which is plenty
/// for matching but not for sub-millimeter geometry.
class LocalFrame {
 public:
  explicit LocalFrame(LonLat origin);

  Vec2 project(LonLat p) const;
  LonLat unproject(Vec2 v) const;
  LonLat origin() const { return origin_; }

 private:
  LonLat origin_;
  double meters_per_deg_lon_;
  double meters_per_deg_lat_;
};

/// Azimuthal equidistant projection: great-circle distance and initial
/// bearing from the origin. Distortion is second order in extent/earth radius,
/// so shapes a few hundred meters across keep their proportions to ~1e-9.
class TangentFrame {
 public:
  explicit TangentFrame(LonLat origin);

  Vec2 project(LonLat p) const;

 private:
  double lon_;
  double lat_;
  double sin_lat_;
  double cos_lat_;
};

/// Distance in meters using the equirectangular approximation at the mean
/// latitude of the two points. Symmetric in its arguments.
double distance_m(LonLat a, LonLat b);

/// Polyline arclength. The sum is always taken in a canonical vertex order so
/// that a polyline and its reverse report bit-identical lengths.
double polyline_length_m(std::span<const LonLat> pts);

/// True when the polyline's start sorts before its end (lon, then lat). Used to
/// pick a canonical traversal for direction-sensitive quantities.
bool is_canonical_orientation(std::span<const LonLat> pts);

/// Point reached after moving `fraction` along the straight lon/lat segment.
LonLat lerp(LonLat a, LonLat b, double fraction);

/// Fraction f in [0, 1] such that distance_m(a, lerp(a, b, f)) == target_m.
double fraction_for_distance(LonLat a, LonLat b, double target_m);

/// Compass bearing (clockwise from north) in [0, 360).
double bearing_deg(LonLat from, LonLat to);

/// Absolute heading difference folded into [0, 180].
double heading_difference_deg(double a, double b);

/// Shortest-arc interpolation between two compass headings; result in [0, 360).
double interpolate_heading_deg(double a, double b, double w);

double wrap_heading_deg(double h);

double cross(Vec2 a, Vec2 b);

/// Distance from p to segment [a, b]; `t_out` receives the clamped segment parameter.
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b, double* t_out = nullptr);

/// Moves `distance_m` from `from` along compass heading `heading_deg`.
/// Consistent with distance_m: distance_m(from, result) == distance (to rounding).
LonLat destination(LonLat from, double heading_deg, double distance);

}  // namespace lcmap::geo
