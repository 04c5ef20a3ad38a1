#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcmap/ingest.hpp"

namespace lcmap {

enum class LaneChangeDirection : std::uint8_t { Left, Right };

enum class ManeuverLabel : std::uint8_t { LCL, FLW, LCR };

std::string_view to_string(LaneChangeDirection d);
std::string_view to_string(ManeuverLabel l);
std::optional<LaneChangeDirection> parse_direction(std::string_view s);
std::optional<ManeuverLabel> parse_label(std::string_view s);

inline ManeuverLabel label_for(LaneChangeDirection d) {
  return d == LaneChangeDirection::Left ? ManeuverLabel::LCL : ManeuverLabel::LCR;
}

/// Moment the vehicle center crosses a lane marking.
struct LaneChangeEvent {
  std::string trip_id;
  double t_cross = 0.0;
  LaneChangeDirection direction = LaneChangeDirection::Left;
  double lat = 0.0;
  double lon = 0.0;
};

struct DetectionParams {
  double jump_min = 2.0;       // m
  double jump_max = 5.5;       // m
  double settle_window = 1.0;  // s
  double min_event_gap = 1.0;  // s
};

/// Crossing detection on the marking-distance channels.
///
/// A left crossing starts at the sample where `dist_left` leaves positive
/// territory, either by dropping to <= 0 or by the re-assignment jump that
/// occurs when the camera starts tracking the next marking. The jump
/// (+jump_min..+jump_max) must follow within `settle_window`, and after it the
/// in-lane pattern dist_left > 0 > dist_right has to reappear within the same
/// window. Right crossings are the mirror image on `dist_right`. Anything
/// that does not complete this pattern yields no event.
std::vector<LaneChangeEvent> detect_lane_changes(const UniformTrajectory& traj, const DetectionParams& params = {});

inline constexpr double kDefaultHorizonS = 5.0;

struct LabeledTrajectory {
  UniformTrajectory trajectory;
  std::vector<ManeuverLabel> labels;
  std::vector<std::optional<std::uint32_t>> event_ref;  // index into `events`
  std::vector<LaneChangeEvent> events;
  std::vector<std::size_t> crossing_sample;  // per event: first sample at or after t_cross
};

/// Samples at most `horizon_s` before an upcoming crossing (inclusive) take
/// that crossing's class; with several upcoming crossings the nearest wins.
/// Everything else, including samples after a crossing, is FLW.
LabeledTrajectory label_samples(UniformTrajectory traj, std::span<const LaneChangeEvent> events,
                                double horizon_s = kDefaultHorizonS);

}  // namespace lcmap
