#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcmap/detect.hpp"
#include "lcmap/mapmodel.hpp"

namespace lcmap {

/// Per-link sample and event counts. Forms a commutative monoid under merge()
/// with the default-constructed counter as identity.
struct LinkCounter {
  std::uint64_t n_lcl = 0;
  std::uint64_t n_flw = 0;
  std::uint64_t n_lcr = 0;
  std::uint64_t n_events_left = 0;
  std::uint64_t n_events_right = 0;
  double meters = 0.0;  // link length; merge keeps the larger value

  std::uint64_t total() const { return n_lcl + n_flw + n_lcr; }
  LinkCounter& merge(const LinkCounter& other);
  friend bool operator==(const LinkCounter&, const LinkCounter&) = default;
};

using CounterMap = std::map<std::string, LinkCounter>;

void merge_into(CounterMap& dst, const CounterMap& src);

/// One labeled sample after map matching.
struct AssignedSample {
  std::optional<std::string> link_id;
  ManeuverLabel label = ManeuverLabel::FLW;
  std::optional<LaneChangeDirection> crossing;  // set on the sample where a crossing was detected
  double link_length_m = 0.0;
};

struct Accumulation {
  CounterMap counters;
  std::uint64_t matched = 0;
  std::uint64_t unmatched = 0;
};

Accumulation accumulate(std::span<const AssignedSample> samples);

/// Index-addressed accumulator used on the hot path; link indices refer to
/// the span passed at construction.
class LinkAccumulator {
 public:
  explicit LinkAccumulator(std::span<const Link> links);

  void add(std::optional<std::size_t> link, ManeuverLabel label,
           std::optional<LaneChangeDirection> crossing = std::nullopt);
  void merge(const LinkAccumulator& other);

  /// Links that received at least one sample or event.
  CounterMap counters() const;
  std::uint64_t matched() const { return matched_; }
  std::uint64_t unmatched() const { return unmatched_; }

 private:
  std::span<const Link> links_;
  std::vector<LinkCounter> counts_;
  std::uint64_t matched_ = 0;
  std::uint64_t unmatched_ = 0;
};

struct LinkProbability {
  std::string link_id;
  double p_lcl = 0.0;
  double p_flw = 0.0;
  double p_lcr = 0.0;
  double density = 0.0;  // samples per meter
  bool included = false;
};

struct ProbabilityMapMeta {
  double horizon_s = kDefaultHorizonS;
  double seg_len_m = kDefaultSegmentLengthM;
  double density_min = 10.0;
  std::uint64_t total_lcl = 0;
  std::uint64_t total_flw = 0;
  std::uint64_t total_lcr = 0;
  std::size_t links_seen = 0;
  std::size_t links_included = 0;
};

struct ProbabilityMap {
  std::map<std::string, LinkProbability> links;  // included links only
  std::vector<LinkProbability> excluded;         // below the density threshold or empty
  ProbabilityMapMeta meta;
};

inline constexpr double kDefaultDensityMin = 10.0;

/// Class shares per link. Links below `density_min` samples per meter (or
/// with no samples at all) are excluded.
ProbabilityMap finalize(const CounterMap& counters, double density_min = kDefaultDensityMin,
                        double horizon_s = kDefaultHorizonS, double seg_len_m = kDefaultSegmentLengthM);

struct GlobalPriors {
  double p_lcl = 0.03;
  double p_flw = 0.94;
  double p_lcr = 0.03;

  std::array<double, 3> as_array() const { return {p_lcl, p_flw, p_lcr}; }
};

/// Converts posteriors of a classifier trained on a class-balanced set into
/// posteriors under `priors`: out_c ∝ balanced_c * prior_c / (1/3).
std::array<double, 3> reweight_posteriors(const std::array<double, 3>& balanced, const std::array<double, 3>& priors);
std::array<double, 3> reweight_posteriors(const std::array<double, 3>& balanced, const GlobalPriors& priors);
std::array<double, 3> reweight_posteriors(const std::array<double, 3>& balanced, const LinkProbability& local);

/// GeoJSON FeatureCollection of the included links, ordered by descending
/// p_flw and then link id.
void export_probability_map(const std::filesystem::path& path, const ProbabilityMap& pm, std::span<const Link> links);
std::string probability_map_geojson(const ProbabilityMap& pm, std::span<const Link> links);

/// Reads the probabilities back from an exported GeoJSON file.
std::vector<LinkProbability> import_probability_map(const std::filesystem::path& path);

/// Row of link_stats.csv.
struct LinkStatsRow {
  std::string link_id;
  std::uint64_t n_lcl = 0;
  std::uint64_t n_flw = 0;
  std::uint64_t n_lcr = 0;
  double density = 0.0;
  std::optional<double> p_lcl, p_flw, p_lcr;
  std::optional<double> bend, slope_pct;
  bool included = false;
};

std::vector<LinkStatsRow> link_stats_rows(const CounterMap& counters, const ProbabilityMap& pm,
                                          std::span<const Link> links);
void write_link_stats_csv(const std::filesystem::path& path, std::span<const LinkStatsRow> rows);
std::vector<LinkStatsRow> read_link_stats_csv(const std::filesystem::path& path);

/// Rebuilds the included part of a probability map from stats rows.
ProbabilityMap probability_map_from_rows(std::span<const LinkStatsRow> rows, double density_min);

}  // namespace lcmap
