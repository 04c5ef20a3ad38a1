#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lcmap/random.hpp"

namespace lcmap {

/// Resolved pipeline parameters. Defaults: 50 ms
/// sampling, 5 s horizon, 200 m links and 10 samples per meter.
struct PipelineConfig {
  double dt = 0.05;
  double gap_limit = 1.0;
  double horizon_s = 5.0;
  double jump_min = 2.0;
  double jump_max = 5.5;
  double settle_window = 1.0;
  double min_event_gap_s = 1.0;
  double seg_len_m = 200.0;
  double density_min = 10.0;
  double match_radius_m = 25.0;
  double heading_tol_deg = 45.0;
  std::vector<double> bend_edges;
  std::vector<double> slope_edges;
  std::size_t min_bin_count = 5;
  std::size_t bootstrap_resamples = 1000;
  double proximity_radius_m = 1000.0;
  double heatmap_cell_m = 500.0;
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 0;  // 0: hardware concurrency

  PipelineConfig();
};

/// Where a value came from. Later enumerators take precedence.
enum class ConfigSource : std::uint8_t { Default, File, Env, Flag };

std::string_view to_string(ConfigSource s);

inline constexpr std::string_view kEnvPrefix = "LCMAP_";

/// Collects parameter values from defaults, a JSON file, LCMAP_* environment
/// variables and command-line flags. Each key resolves to the value from the
/// highest-precedence source that set it, regardless of call order.
class ConfigStore {
 public:
  ConfigStore();

  /// Top-level keys of the file are pipeline parameters; scenario keys (and a
  /// nested "scenario" object) are left to the simulator. Anything else is an
  /// error so that typos do not pass silently.
  void load_file(const std::filesystem::path& path);
  void load_env();
  /// `origin` names the flag for messages, e.g. "--seed".
  void set(std::string_view key, std::string_view value, ConfigSource source = ConfigSource::Flag,
           std::string origin = {});

  std::string get(std::string_view key) const;
  ConfigSource source_of(std::string_view key) const;
  /// Human-readable origin such as "flag --seed" or "file cfg.json".
  std::string describe_source(std::string_view key) const;

  const std::optional<std::filesystem::path>& file() const { return file_; }

  /// Parses and validates every value. Cross-parameter conflicts name the
  /// source of each side.
  PipelineConfig resolve() const;

  static const std::vector<std::string>& keys();
  static std::string env_name(std::string_view key);

 private:
  struct Entry {
    std::string value;
    ConfigSource source = ConfigSource::Default;
    std::string origin;
  };
  const Entry& entry(std::string_view key) const;

  std::map<std::string, Entry, std::less<>> entries_;
  std::optional<std::filesystem::path> file_;
};

}  // namespace lcmap
