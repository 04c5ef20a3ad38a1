#include "lcmap/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include <json.hpp>

#include "lcmap/analyze.hpp"
#include "lcmap/error.hpp"
#include "lcmap/io.hpp"
#include "lcmap/simulate.hpp"

namespace lcmap {

using nlohmann::json;

PipelineConfig::PipelineConfig()
    : bend_edges(default_bin_edges(Feature::Bend)), slope_edges(default_bin_edges(Feature::SlopePct)) {}

std::string_view to_string(ConfigSource s) {
  switch (s) {
    case ConfigSource::Default:
      return "default";
    case ConfigSource::File:
      return "file";
    case ConfigSource::Env:
      return "env";
    case ConfigSource::Flag:
      break;
  }
  return "flag";
}

namespace {

enum class Kind { Positive, NonNegative, Count, Seed, Threads, Edges };

struct KeySpec {
  const char* key;
  Kind kind;
};

// Keys and their defaults come from a default-constructed PipelineConfig.
constexpr KeySpec kKeys[] = {
    {"dt", Kind::Positive},
    {"gap_limit", Kind::Positive},
    {"horizon_s", Kind::Positive},
    {"jump_min", Kind::Positive},
    {"jump_max", Kind::Positive},
    {"settle_window", Kind::Positive},
    {"min_event_gap_s", Kind::NonNegative},
    {"seg_len_m", Kind::Positive},
    {"density_min", Kind::NonNegative},
    {"match_radius_m", Kind::Positive},
    {"heading_tol_deg", Kind::Positive},
    {"bend_edges", Kind::Edges},
    {"slope_edges", Kind::Edges},
    {"min_bin_count", Kind::Count},
    {"bootstrap_resamples", Kind::Count},
    {"proximity_radius_m", Kind::Positive},
    {"heatmap_cell_m", Kind::Positive},
    {"seed", Kind::Seed},
    {"threads", Kind::Threads},
};

const KeySpec* find_spec(std::string_view key) {
  for (const auto& k : kKeys) {
    if (key == k.key) return &k;
  }
  return nullptr;
}

std::string join_edges(const std::vector<double>& edges) {
  std::string s;
  for (std::size_t i = 0; i < edges.size(); ++i) s += (i ? "," : "") + io::format_double(edges[i]);
  return s;
}

std::string default_value(std::string_view key) {
  const PipelineConfig d;
  if (key == "bend_edges") return join_edges(d.bend_edges);
  if (key == "slope_edges") return join_edges(d.slope_edges);
  if (key == "min_bin_count") return std::to_string(d.min_bin_count);
  if (key == "bootstrap_resamples") return std::to_string(d.bootstrap_resamples);
  if (key == "seed") return std::to_string(d.seed);
  if (key == "threads") return std::to_string(d.threads);
  const std::pair<const char*, double> numbers[] = {
      {"dt", d.dt},
      {"gap_limit", d.gap_limit},
      {"horizon_s", d.horizon_s},
      {"jump_min", d.jump_min},
      {"jump_max", d.jump_max},
      {"settle_window", d.settle_window},
      {"min_event_gap_s", d.min_event_gap_s},
      {"seg_len_m", d.seg_len_m},
      {"density_min", d.density_min},
      {"match_radius_m", d.match_radius_m},
      {"heading_tol_deg", d.heading_tol_deg},
      {"proximity_radius_m", d.proximity_radius_m},
      {"heatmap_cell_m", d.heatmap_cell_m},
  };
  for (const auto& [k, v] : numbers) {
    if (key == k) return io::format_double(v);
  }
  return {};
}

std::string json_to_value(const json& v, const std::string& key, const std::string& where) {
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return io::format_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw Error(ErrorKind::Config, where + ": '" + key + "' must hold numbers only");
      s += (i ? "," : "") + io::format_double(v[i].get<double>());
    }
    return s;
  }
  throw Error(ErrorKind::Config, where + ": '" + key + "' has an unsupported value type");
}

template <class T>
std::optional<T> parse_integer(std::string_view s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

const std::vector<std::string>& ConfigStore::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& s : kKeys) out.emplace_back(s.key);
    return out;
  }();
  return k;
}

std::string ConfigStore::env_name(std::string_view key) {
  std::string name(kEnvPrefix);
  for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

ConfigStore::ConfigStore() {
  for (const auto& k : kKeys) entries_[k.key] = Entry{default_value(k.key), ConfigSource::Default, "default"};
}

const ConfigStore::Entry& ConfigStore::entry(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorKind::Config, "config: unknown key '" + std::string(key) + "'");
  return it->second;
}

void ConfigStore::set(std::string_view key, std::string_view value, ConfigSource source, std::string origin) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorKind::Config, "config: unknown key '" + std::string(key) + "'");
  if (source < it->second.source) return;
  if (origin.empty()) {
    origin = std::string(to_string(source));
    if (source == ConfigSource::Flag) origin += " --" + std::string(key);
    if (source == ConfigSource::Env) origin += " " + env_name(key);
  }
  it->second = Entry{std::string(value), source, std::move(origin)};
}

void ConfigStore::load_file(const std::filesystem::path& path) {
  const auto text = io::read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Format, "config " + path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Format, "config " + path.string() + ": top level must be an object");
  const std::string where = "config " + path.string();
  for (const auto& [key, value] : doc.items()) {
    if (find_spec(key)) {
      set(key, json_to_value(value, key, where), ConfigSource::File, "file " + path.string());
    } else if (key != "scenario" && !sim::is_scenario_key(key)) {
      throw Error(ErrorKind::Config, where + ": unknown key '" + key + "'");
    }
  }
  file_ = path;
}

void ConfigStore::load_env() {
  for (const auto& k : kKeys) {
    const auto name = env_name(k.key);
    if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') {
      set(k.key, v, ConfigSource::Env, "env " + name);
    }
  }
}

std::string ConfigStore::get(std::string_view key) const { return entry(key).value; }

ConfigSource ConfigStore::source_of(std::string_view key) const { return entry(key).source; }

std::string ConfigStore::describe_source(std::string_view key) const { return entry(key).origin; }

PipelineConfig ConfigStore::resolve() const {
  auto fail = [&](std::string_view key, const std::string& why) -> Error {
    return Error(ErrorKind::Config, "config: " + std::string(key) + " = '" + get(key) + "' (" +
                                        describe_source(key) + ") " + why);
  };
  auto number = [&](std::string_view key) {
    const auto& spec = *find_spec(key);
    auto v = io::parse_double(get(key));
    if (!v || !std::isfinite(*v)) throw fail(key, "is not a number");
    if (spec.kind == Kind::Positive && !(*v > 0.0)) throw fail(key, "must be positive");
    if (spec.kind == Kind::NonNegative && !(*v >= 0.0)) throw fail(key, "must be non-negative");
    return *v;
  };
  auto edges = [&](std::string_view key) {
    std::vector<double> out;
    for (const auto& part : io::split(get(key), ',')) {
      auto v = io::parse_double(part);
      if (!v || !std::isfinite(*v)) throw fail(key, "must be a comma-separated list of numbers");
      out.push_back(*v);
    }
    if (out.size() < 2) throw fail(key, "needs at least two edges");
    for (std::size_t i = 1; i < out.size(); ++i) {
      if (!(out[i] > out[i - 1])) throw fail(key, "must be strictly increasing");
    }
    return out;
  };

  PipelineConfig c;
  c.dt = number("dt");
  c.gap_limit = number("gap_limit");
  c.horizon_s = number("horizon_s");
  c.jump_min = number("jump_min");
  c.jump_max = number("jump_max");
  c.settle_window = number("settle_window");
  c.min_event_gap_s = number("min_event_gap_s");
  c.seg_len_m = number("seg_len_m");
  c.density_min = number("density_min");
  c.match_radius_m = number("match_radius_m");
  c.heading_tol_deg = number("heading_tol_deg");
  c.proximity_radius_m = number("proximity_radius_m");
  c.heatmap_cell_m = number("heatmap_cell_m");
  c.bend_edges = edges("bend_edges");
  c.slope_edges = edges("slope_edges");

  auto count = parse_integer<std::size_t>(get("min_bin_count"));
  if (!count || *count == 0) throw fail("min_bin_count", "must be a positive integer");
  c.min_bin_count = *count;
  count = parse_integer<std::size_t>(get("bootstrap_resamples"));
  if (!count || *count == 0) throw fail("bootstrap_resamples", "must be a positive integer");
  c.bootstrap_resamples = *count;
  auto seed = parse_integer<std::uint64_t>(get("seed"));
  if (!seed) throw fail("seed", "must be a non-negative integer");
  c.seed = *seed;
  auto threads = parse_integer<unsigned>(get("threads"));
  if (!threads || *threads > 1024) throw fail("threads", "must be an integer in [0, 1024]");
  c.threads = *threads;

  auto conflict = [&](std::string_view a, std::string_view b, const std::string& why) {
    return Error(ErrorKind::Config, "config conflict: " + std::string(a) + " = " + get(a) + " (" + describe_source(a) +
                                        ") and " + std::string(b) + " = " + get(b) + " (" + describe_source(b) +
                                        "): " + why);
  };
  if (c.jump_min > c.jump_max) throw conflict("jump_min", "jump_max", "jump_min must not exceed jump_max");
  if (c.heading_tol_deg > 180.0) throw fail("heading_tol_deg", "must not exceed 180");
  if (c.gap_limit < c.dt) throw conflict("gap_limit", "dt", "gap_limit must be at least one sample interval");
  if (c.settle_window < c.dt) throw conflict("settle_window", "dt", "settle_window must cover at least one sample");
  return c;
}

}  // namespace lcmap
