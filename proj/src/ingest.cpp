#include "lcmap/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "lcmap/error.hpp"
#include "lcmap/geo.hpp"
#include "lcmap/io.hpp"

namespace lcmap {
namespace {

using nlohmann::json;

bool read_number(const json& obj, const char* key, double& out) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) return false;
  out = it->get<double>();
  return std::isfinite(out);
}

bool read_trip(const json& obj, std::string& out) {
  auto it = obj.find("trip");
  if (it == obj.end()) return false;
  if (it->is_string()) {
    out = it->get<std::string>();
    return !out.empty();
  }
  if (it->is_number_integer()) {
    out = std::to_string(it->get<long long>());
    return true;
  }
  return false;
}

bool in_range(const RawSample& s) {
  return std::fabs(s.lat) <= 90.0 && std::fabs(s.lon) <= 180.0 && s.speed >= 0.0;
}

}  // namespace

ParseResult parse_trajectory_stream(std::istream& in, double max_duration_s) {
  ParseResult result;
  auto& rep = result.report;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++rep.lines;
    json obj = json::parse(line, nullptr, false);
    RawSample s;
    std::string trip;
    if (obj.is_discarded() || !obj.is_object() || !read_trip(obj, trip) || !read_number(obj, "t", s.t) ||
        !read_number(obj, "lat", s.lat) || !read_number(obj, "lon", s.lon) ||
        !read_number(obj, "dl", s.dist_left) || !read_number(obj, "dr", s.dist_right) ||
        !read_number(obj, "v", s.speed) || !read_number(obj, "hdg", s.heading)) {
      ++rep.malformed;
      continue;
    }
    if (!in_range(s)) {
      ++rep.invalid;
      continue;
    }
    s.heading = geo::wrap_heading_deg(s.heading);
    auto [it, inserted] = slot.try_emplace(trip, result.trajectories.size());
    if (inserted) result.trajectories.push_back(RawTrajectory{trip, {}});
    result.trajectories[it->second].samples.push_back(s);
    ++rep.parsed;
  }
  if (rep.parsed == 0) {
    throw Error(ErrorKind::Format, rep.lines == 0 ? "trajectory input is empty"
                                                  : "no parsable trajectory records in input");
  }

  std::vector<RawTrajectory> kept;
  kept.reserve(result.trajectories.size());
  for (auto& traj : result.trajectories) {
    auto& v = traj.samples;
    std::stable_sort(v.begin(), v.end(), [](const RawSample& a, const RawSample& b) { return a.t < b.t; });
    auto last = std::unique(v.begin(), v.end(), [](const RawSample& a, const RawSample& b) { return a.t == b.t; });
    rep.duplicate_times += static_cast<std::size_t>(v.end() - last);
    v.erase(last, v.end());
    if (traj.duration() > max_duration_s) {
      ++rep.rejected_trips;
      rep.rejected_samples += v.size();
      continue;
    }
    kept.push_back(std::move(traj));
  }
  result.trajectories = std::move(kept);
  return result;
}

ParseResult parse_trajectory_file(const std::filesystem::path& path, double max_duration_s) {
  auto in = io::open_input(path);
  return parse_trajectory_stream(in, max_duration_s);
}

namespace {

RawSample interpolate(const RawSample& a, const RawSample& b, double t) {
  const double w = (t - a.t) / (b.t - a.t);
  auto mix = [w](double x, double y) { return x + (y - x) * w; };
  RawSample s;
  s.t = t;
  s.lat = mix(a.lat, b.lat);
  s.lon = mix(a.lon, b.lon);
  s.dist_left = mix(a.dist_left, b.dist_left);
  s.dist_right = mix(a.dist_right, b.dist_right);
  s.speed = mix(a.speed, b.speed);
  s.heading = geo::interpolate_heading_deg(a.heading, b.heading, w);
  return s;
}

UniformTrajectory resample_piece(std::span<const RawSample> raw, std::string trip_id, double dt) {
  UniformTrajectory out;
  out.trip_id = std::move(trip_id);
  out.t0 = raw.front().t;
  out.dt = dt;
  const double t_last = raw.back().t;
  std::size_t seg = 0;
  for (std::size_t k = 0;; ++k) {
    const double t = out.t0 + static_cast<double>(k) * dt;
    if (t > t_last) break;
    while (seg + 1 < raw.size() && raw[seg + 1].t <= t) ++seg;
    if (raw[seg].t == t || seg + 1 == raw.size()) {
      RawSample s = raw[seg];
      s.t = t;
      out.samples.push_back(s);
    } else {
      out.samples.push_back(interpolate(raw[seg], raw[seg + 1], t));
    }
  }
  return out;
}

}  // namespace

std::vector<UniformTrajectory> resample_equidistant(const RawTrajectory& raw, const ResampleParams& params) {
  if (!(params.dt > 0.0) || !(params.gap_limit > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "resample: dt and gap_limit must be positive");
  }
  if (raw.samples.size() < 2) {
    throw Error(ErrorKind::Degenerate, "resample: trip '" + raw.trip_id + "' has fewer than 2 samples");
  }
  for (std::size_t i = 1; i < raw.samples.size(); ++i) {
    if (!(raw.samples[i].t > raw.samples[i - 1].t)) {
      throw Error(ErrorKind::Contract, "resample: timestamps of trip '" + raw.trip_id + "' not strictly increasing");
    }
  }

  std::vector<UniformTrajectory> pieces;
  std::span<const RawSample> all(raw.samples);
  std::size_t begin = 0;
  auto flush = [&](std::size_t end) {
    if (end - begin >= 2) {
      std::string id = pieces.empty() ? raw.trip_id : raw.trip_id + "#" + std::to_string(pieces.size());
      pieces.push_back(resample_piece(all.subspan(begin, end - begin), std::move(id), params.dt));
    }
    begin = end;
  };
  for (std::size_t i = 1; i < raw.samples.size(); ++i) {
    if (raw.samples[i].t - raw.samples[i - 1].t > params.gap_limit) flush(i);
  }
  flush(raw.samples.size());
  return pieces;
}

void write_trajectory_records(std::ostream& out, const std::string& trip_id, std::span<const RawSample> samples) {
  const std::string trip = json(trip_id).dump();
  std::string line;
  for (const auto& s : samples) {
    line.clear();
    line += "{\"trip\":";
    line += trip;
    line += ",\"t\":" + io::format_double(s.t);
    line += ",\"lat\":" + io::format_double(s.lat);
    line += ",\"lon\":" + io::format_double(s.lon);
    line += ",\"dl\":" + io::format_double(s.dist_left);
    line += ",\"dr\":" + io::format_double(s.dist_right);
    line += ",\"v\":" + io::format_double(s.speed);
    line += ",\"hdg\":" + io::format_double(s.heading);
    line += "}\n";
    out << line;
  }
}

}  // namespace lcmap
