#include "lcmap/detect.hpp"

#include <algorithm>
#include <cmath>

#include "lcmap/error.hpp"

namespace lcmap {

std::string_view to_string(LaneChangeDirection d) { return d == LaneChangeDirection::Left ? "left" : "right"; }

std::string_view to_string(ManeuverLabel l) {
  switch (l) {
    case ManeuverLabel::LCL:
      return "LCL";
    case ManeuverLabel::LCR:
      return "LCR";
    case ManeuverLabel::FLW:
      break;
  }
  return "FLW";
}

std::optional<LaneChangeDirection> parse_direction(std::string_view s) {
  if (s == "left" || s == "L") return LaneChangeDirection::Left;
  if (s == "right" || s == "R") return LaneChangeDirection::Right;
  return std::nullopt;
}

std::optional<ManeuverLabel> parse_label(std::string_view s) {
  if (s == "LCL") return ManeuverLabel::LCL;
  if (s == "FLW") return ManeuverLabel::FLW;
  if (s == "LCR") return ManeuverLabel::LCR;
  return std::nullopt;
}

namespace {

constexpr double kTimeEps = 1e-6;

// Crossing candidates on one side. `primary` is the distance to the marking
// being approached (positive while in lane), `secondary` the other marking.
// Returns sample indices of the crossings.
std::vector<std::size_t> detect_side(std::span<const double> primary, std::span<const double> secondary,
                                     const DetectionParams& p, std::size_t settle_steps) {
  std::vector<std::size_t> hits;
  const std::size_t n = primary.size();
  auto is_jump = [&](std::size_t j) {
    const double d = primary[j] - primary[j - 1];
    return d >= p.jump_min && d <= p.jump_max;
  };
  for (std::size_t k = 1; k < n; ++k) {
    if (!(primary[k - 1] > 0.0)) continue;
    const bool jump_here = is_jump(k);
    if (!(primary[k] <= 0.0) && !jump_here) continue;

    std::size_t jump_at = n;
    if (jump_here) {
      jump_at = k;
    } else {
      for (std::size_t j = k + 1; j < n && j <= k + settle_steps; ++j) {
        if (is_jump(j)) {
          jump_at = j;
          break;
        }
      }
    }
    if (jump_at == n) continue;

    bool settled = false;
    for (std::size_t m = jump_at; m < n && m <= jump_at + settle_steps; ++m) {
      if (primary[m] > 0.0 && secondary[m] < 0.0) {
        settled = true;
        break;
      }
    }
    if (!settled) continue;
    hits.push_back(k);
    k = jump_at;
  }
  return hits;
}

}  // namespace

std::vector<LaneChangeEvent> detect_lane_changes(const UniformTrajectory& traj, const DetectionParams& params) {
  if (!(params.jump_min > 0.0) || !(params.jump_max >= params.jump_min)) {
    throw Error(ErrorKind::InvalidArgument, "detect: require 0 < jump_min <= jump_max");
  }
  if (!(traj.dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "detect: trajectory dt must be positive");
  const auto& s = traj.samples;
  const std::size_t n = s.size();
  std::vector<double> left(n), right(n), neg_left(n), neg_right(n);
  for (std::size_t i = 0; i < n; ++i) {
    left[i] = s[i].dist_left;
    right[i] = s[i].dist_right;
    neg_left[i] = -s[i].dist_left;
    neg_right[i] = -s[i].dist_right;
  }
  const auto settle_steps = static_cast<std::size_t>(std::llround(params.settle_window / traj.dt));

  struct Hit {
    std::size_t index;
    LaneChangeDirection dir;
  };
  std::vector<Hit> hits;
  for (auto k : detect_side(left, right, params, settle_steps)) hits.push_back({k, LaneChangeDirection::Left});
  // Right crossings are left crossings of the mirrored channels.
  for (auto k : detect_side(neg_right, neg_left, params, settle_steps)) hits.push_back({k, LaneChangeDirection::Right});
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.index != b.index ? a.index < b.index : a.dir < b.dir;
  });

  std::vector<LaneChangeEvent> events;
  for (const auto& h : hits) {
    const double t = s[h.index].t;
    if (!events.empty() && t - events.back().t_cross < params.min_event_gap - kTimeEps) continue;
    events.push_back({traj.trip_id, t, h.dir, s[h.index].lat, s[h.index].lon});
  }
  return events;
}

LabeledTrajectory label_samples(UniformTrajectory traj, std::span<const LaneChangeEvent> events, double horizon_s) {
  if (!(horizon_s >= 0.0)) throw Error(ErrorKind::InvalidArgument, "label: horizon must be non-negative");
  LabeledTrajectory out;
  const auto& s = traj.samples;
  const std::size_t n = s.size();
  if (!events.empty()) {
    if (n == 0) throw Error(ErrorKind::Contract, "label: events supplied for an empty trajectory");
    for (std::size_t e = 0; e < events.size(); ++e) {
      const double t = events[e].t_cross;
      if (t < s.front().t - kTimeEps || t > s.back().t + kTimeEps) {
        throw Error(ErrorKind::Contract, "label: event at t=" + std::to_string(t) + " outside trajectory '" +
                                             traj.trip_id + "' time span");
      }
      if (e > 0 && t < events[e - 1].t_cross) {
        throw Error(ErrorKind::Contract, "label: events are not sorted by time");
      }
    }
  }

  out.labels.assign(n, ManeuverLabel::FLW);
  out.event_ref.assign(n, std::nullopt);
  out.events.assign(events.begin(), events.end());
  out.crossing_sample.assign(events.size(), n);

  std::size_t next = 0;  // first event not yet behind the current sample
  for (std::size_t j = 0; j < n; ++j) {
    const double t = s[j].t;
    while (next < events.size() && events[next].t_cross < t - kTimeEps) ++next;
    if (next == events.size()) break;
    const double lead = events[next].t_cross - t;
    if (lead <= horizon_s + kTimeEps) {
      out.labels[j] = label_for(events[next].direction);
      out.event_ref[j] = static_cast<std::uint32_t>(next);
    }
  }
  std::size_t j = 0;
  for (std::size_t e = 0; e < events.size(); ++e) {
    while (j < n && s[j].t < events[e].t_cross - kTimeEps) ++j;
    out.crossing_sample[e] = j;
  }
  out.trajectory = std::move(traj);
  return out;
}

}  // namespace lcmap
