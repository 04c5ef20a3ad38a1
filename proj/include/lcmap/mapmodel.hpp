#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lcmap/geo.hpp"

namespace lcmap {

enum class RoadClass : std::uint8_t { Motorway, Trunk, Primary, Secondary, Other };

/// Which way traffic moves relative to the stored polyline order.
enum class TravelDirection : std::uint8_t { Forward, Backward, Both };

std::string_view to_string(RoadClass c);
RoadClass parse_road_class(std::string_view s);
std::string_view to_string(TravelDirection d);
std::optional<TravelDirection> parse_travel_direction(std::string_view s);

struct SourceLink {
  std::string id;
  std::vector<geo::LonLat> polyline;
  std::optional<std::vector<double>> elevation;  // one value per polyline point
  RoadClass road_class = RoadClass::Motorway;
  std::optional<double> speed_limit_kmh;  // nullopt: unlimited
  TravelDirection direction = TravelDirection::Forward;
};

enum class InterchangeKind : std::uint8_t { Merger, Divider };

struct InterchangeNode {
  std::string id;
  geo::LonLat pos;
  InterchangeKind kind = InterchangeKind::Divider;
};

/// Equal-length piece of a source link in one travel direction. The polyline
/// is stored in travel order.
struct Link {
  std::string id;  // "<source>:<segment>:<F|B>"
  std::string source_id;
  std::size_t segment = 0;
  bool reversed = false;  // true when travel runs against the source polyline
  std::vector<geo::LonLat> polyline;
  std::optional<std::vector<double>> elevation;
  double length_m = 0.0;
  std::optional<double> bend;       // undefined for closed polylines
  std::optional<double> slope_pct;  // undefined without elevation
  RoadClass road_class = RoadClass::Motorway;
  std::optional<double> speed_limit_kmh;
};

struct MapLoadReport {
  std::size_t links_read = 0;
  std::size_t links_skipped = 0;
  std::size_t nodes_skipped = 0;
  std::vector<std::string> warnings;
};

struct MapData {
  std::vector<SourceLink> links;
  std::vector<InterchangeNode> nodes;
  MapLoadReport report;
};

/// Reads the JSON link map. Invalid links are skipped with a warning; an
/// unreadable or unparsable document throws.
MapData load_map(const std::filesystem::path& path);
MapData parse_map(std::string_view json_text);
void write_source_map(const std::filesystem::path& path, std::span<const SourceLink> links,
                      std::span<const InterchangeNode> nodes);

inline constexpr double kDefaultSegmentLengthM = 200.0;

/// Cuts every source polyline into pieces of exactly `seg_len_m`. A remainder
/// shorter than seg_len_m / 2 is merged into the last piece; otherwise it is
/// kept as a short terminal piece. Bidirectional sources produce a reversed
/// twin of each piece. Bend and slope are filled in.
std::vector<Link> resegment(std::span<const SourceLink> links, double seg_len_m = kDefaultSegmentLengthM);

/// Maximum deviation from the start-end secant divided by arclength. Positive
/// for left turns, negative for right turns; nullopt for a closed polyline.
std::optional<double> compute_bend(std::span<const geo::LonLat> polyline);
inline std::optional<double> compute_bend(const Link& link) { return compute_bend(link.polyline); }

/// Grade in percent along the polyline order; nullopt without elevations.
std::optional<double> compute_slope(std::span<const geo::LonLat> polyline, std::span<const double> elevation);
std::optional<double> compute_slope(const Link& link);

inline constexpr double kMaxAbsSlopePct = 20.0;

struct ResegmentedMap {
  double seg_len_m = kDefaultSegmentLengthM;
  std::vector<Link> links;
  std::vector<InterchangeNode> nodes;
};

void write_resegmented_map(const std::filesystem::path& path, const ResegmentedMap& map);
ResegmentedMap load_resegmented_map(const std::filesystem::path& path);

struct MatchParams {
  double radius_m = 25.0;
  double heading_tol_deg = 45.0;
};

/// Result of a nearest-link query.
struct LinkMatch {
  std::size_t link = 0;
  double distance_m = 0.0;
};

/// Grid index over link edges. Immutable after construction, so concurrent
/// queries are safe.
class LinkIndex {
 public:
  LinkIndex(std::span<const Link> links, MatchParams params = {});

  /// Nearest link within the radius whose local tangent heading is within the
  /// tolerance of `heading_deg`. Ties go to the lower link index.
  std::optional<LinkMatch> match(geo::LonLat pos, double heading_deg) const;

  std::size_t size() const { return link_ids_.size(); }
  const std::string& link_id(std::size_t i) const { return link_ids_[i]; }
  const MatchParams& params() const { return params_; }

 private:
  struct Edge {
    std::uint32_t link;
    geo::LonLat a;
    geo::LonLat b;
    double heading;
  };

  std::int64_t cell_key(std::int64_t ix, std::int64_t iy) const;

  MatchParams params_;
  std::vector<std::string> link_ids_;
  std::vector<Edge> edges_;
  geo::LocalFrame frame_;
  double cell_m_ = 50.0;
  double min_cos_lat_ = 1.0;
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> cells_;
};

/// Id of the matched link, or nullopt.
std::optional<std::string> map_match(geo::LonLat pos, double heading_deg, const LinkIndex& index);

}  // namespace lcmap
