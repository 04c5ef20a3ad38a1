#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lcmap {

/// One fleet measurement. Marking distances are signed lateral offsets in
/// meters: `dist_left` is positive while the left marking is left of the
/// vehicle center, `dist_right` is negative while the right marking is right
/// of it.
struct RawSample {
  double t = 0.0;
  double lat = 0.0;
  double lon = 0.0;
  double dist_left = 0.0;
  double dist_right = 0.0;
  double speed = 0.0;
  double heading = 0.0;  // compass degrees, [0, 360)
};

struct RawTrajectory {
  std::string trip_id;
  std::vector<RawSample> samples;

  double duration() const { return samples.size() < 2 ? 0.0 : samples.back().t - samples.front().t; }
};

/// Samples on a fixed grid: samples[k].t == t0 + k * dt.
struct UniformTrajectory {
  std::string trip_id;
  double t0 = 0.0;
  double dt = 0.05;
  std::vector<RawSample> samples;
};

struct ParseReport {
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t malformed = 0;         // not an object, missing or non-numeric fields
  std::size_t invalid = 0;           // parsed but out of range (|lat| > 90, speed < 0, ...)
  std::size_t duplicate_times = 0;   // repeated timestamp within a trip
  std::size_t rejected_trips = 0;    // longer than the maximum duration
  std::size_t rejected_samples = 0;  // samples belonging to rejected trips

  std::size_t dropped() const { return malformed + invalid; }
};

struct ParseResult {
  std::vector<RawTrajectory> trajectories;  // in order of first appearance
  ParseReport report;
};

inline constexpr double kMaxTrajectoryDurationS = 200.0;

ParseResult parse_trajectory_stream(std::istream& in, double max_duration_s = kMaxTrajectoryDurationS);
ParseResult parse_trajectory_file(const std::filesystem::path& path,
                                  double max_duration_s = kMaxTrajectoryDurationS);

struct ResampleParams {
  double dt = 0.05;
  double gap_limit = 1.0;
};

/// Linear resampling onto the dt grid starting at the first raw timestamp.
/// Gaps longer than gap_limit split the trip; pieces after the first get a
/// "#<n>" suffix on the trip id. Pieces with a single sample are dropped.
std::vector<UniformTrajectory> resample_equidistant(const RawTrajectory& raw, const ResampleParams& params = {});

/// Writes one line-delimited record per sample.
void write_trajectory_records(std::ostream& out, const std::string& trip_id, std::span<const RawSample> samples);

}  // namespace lcmap
