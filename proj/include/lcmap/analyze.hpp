#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcmap/aggregate.hpp"
#include "lcmap/detect.hpp"
#include "lcmap/mapmodel.hpp"
#include "lcmap/random.hpp"

namespace lcmap {

enum class Feature : std::uint8_t { Bend, SlopePct };

std::string_view to_string(Feature f);
std::optional<Feature> parse_feature(std::string_view s);

struct LinkFeatures {
  std::optional<double> bend;
  std::optional<double> slope_pct;
};

using FeatureTable = std::map<std::string, LinkFeatures>;

FeatureTable features_from_links(std::span<const Link> links);
FeatureTable features_from_rows(std::span<const LinkStatsRow> rows);

struct BinStat {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n_links = 0;
  // Present only when n_links >= min_bin_count.
  std::optional<double> median_p_flw;
  std::optional<double> sem;
  std::optional<double> mean_p_flw;
};

struct BinnedStat {
  Feature feature = Feature::Bend;
  std::vector<double> edges;
  std::vector<BinStat> bins;
  std::size_t missing_feature = 0;  // included links without the feature value
  std::size_t excluded_extreme = 0;  // |bend| above the cut-off
  std::size_t out_of_range = 0;      // outside [edges.front(), edges.back()]
};

inline constexpr double kBendAbsMax = 0.07;

struct BinningOptions {
  std::size_t min_bin_count = 5;
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t seed = kDefaultSeed;
  double bend_abs_max = kBendAbsMax;
};

/// Bins 0.01 wide over [-0.07, 0.07] for bend, 1 % wide over [-7, 7] for slope.
std::vector<double> default_bin_edges(Feature f);
std::vector<double> uniform_edges(double lo, double hi, double width);

double median(std::vector<double> values);

/// Bootstrap standard error of the median with a seeded generator.
double bootstrap_median_se(std::span<const double> values, std::size_t resamples, std::uint64_t seed);

/// Median lane-following probability of the included links per feature bin.
/// Bins are left-closed and right-open except the last, which is closed.
BinnedStat bin_median_pflw(const ProbabilityMap& pm, const FeatureTable& features, Feature feature,
                           std::span<const double> edges, const BinningOptions& opts = {});

void write_binned_csv(const std::filesystem::path& path, const BinnedStat& stat);

struct HeatmapGrid {
  double cell_size_m = 500.0;
  geo::LonLat origin;  // south-west corner
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint64_t> counts;  // row-major, row 0 is the southernmost

  std::uint64_t at(std::size_t row, std::size_t col) const { return counts[row * cols + col]; }
  std::uint64_t total() const;
  geo::LonLat cell_center(std::size_t row, std::size_t col) const;
};

HeatmapGrid build_heatmap(std::span<const LaneChangeEvent> events, double cell_size_m = 500.0);
void write_heatmap_csv(const std::filesystem::path& path, const HeatmapGrid& grid);
void write_heatmap_geojson(const std::filesystem::path& path, const HeatmapGrid& grid);

enum class ProximityKind : std::uint8_t { NearMerger, NearDivider, Plain };
std::string_view to_string(ProximityKind k);

struct ProximityTag {
  std::string link_id;
  ProximityKind tag = ProximityKind::Plain;
  std::optional<double> distance_m;  // to the nearest node in the relevant direction
};

/// Direction-aware interchange tagging. A divider counts for links upstream
/// of it (node ahead of the link end, or alongside the link); a merger counts
/// for links downstream of it (node behind the link start, or alongside).
std::vector<ProximityTag> tag_interchange_proximity(std::span<const Link> links,
                                                    std::span<const InterchangeNode> nodes,
                                                    double radius_m = 1000.0);

struct ExclusionResult {
  BinnedStat with;
  BinnedStat without;
  std::vector<std::optional<double>> median_delta;  // without - with, where both exist
};

ExclusionResult exclusion_experiment(const ProbabilityMap& pm, const FeatureTable& features,
                                     const std::set<std::string>& excluded_ids, Feature feature,
                                     std::span<const double> edges, const BinningOptions& opts = {});

void write_exclusion_csv(const std::filesystem::path& path, const ExclusionResult& result);

}  // namespace lcmap
