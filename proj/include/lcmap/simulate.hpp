#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcmap/detect.hpp"
#include "lcmap/ingest.hpp"
#include "lcmap/mapmodel.hpp"
#include "lcmap/random.hpp"

namespace lcmap::sim {

struct RoadPiece {
  enum class Kind { Straight, Arc } kind = Kind::Straight;
  double length_m = 200.0;
  double radius_m = 0.0;  // arcs only
  bool left_turn = true;  // arcs only
  double slope_pct = 0.0;
};

struct NodeSpec {
  std::string id;
  double at_m = 0.0;  // arclength along the road from its start
  InterchangeKind kind = InterchangeKind::Divider;
};

/// A single generated road, built from consecutive pieces.
struct RoadSpec {
  std::string id = "road";
  geo::LonLat origin{9.18, 48.78};
  double heading_deg = 90.0;
  double elevation_m = 300.0;
  double vertex_spacing_m = 5.0;
  TravelDirection direction = TravelDirection::Forward;
  std::vector<RoadPiece> pieces;
  std::vector<NodeSpec> nodes;
};

/// Lane changes per kilometer driven.
struct RateSpec {
  double lcl_per_km = 0.0;
  double lcr_per_km = 0.0;
};

/// Location effects applied multiplicatively to the base rates.
struct Effects {
  double interchange_boost = 1.0;  // r_lcr upstream of dividers, r_lcl downstream of mergers
  double interchange_radius_m = 1000.0;
  double bend_dampening = 0.0;  // rates *= exp(-bend_dampening * |bend|)
  double slope_effect = 0.0;    // rates *= exp(slope_effect * slope_pct)
};

struct ScenarioConfig {
  std::vector<RoadSpec> roads;
  std::optional<std::filesystem::path> map_file;
  double seg_len_m = kDefaultSegmentLengthM;
  RateSpec rates;
  std::map<std::string, RateSpec> link_rates;  // by resegmented link id or source link id
  Effects effects;
  std::size_t fleet_size = 10;
  std::size_t trips_per_vehicle = 10;
  double trip_duration_s = 200.0;
  double speed_mps = 30.0;
  double sample_dt = 0.05;
  double lane_width_m = 3.5;
  double noise_sigma_m = 0.0;
  double horizon_s = kDefaultHorizonS;
  double min_event_gap_s = 1.0;
  std::uint64_t seed = kDefaultSeed;
};

/// Keys understood by parse_scenario. The pipeline config shares a file with
/// the scenario, so each side needs to know the other's keys.
bool is_scenario_key(std::string_view key);

/// Reads a JSON scenario file; relative map paths resolve against its directory.
ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir = {});

/// Per-second hazard of each crossing direction on one link.
struct LinkRates {
  double left = 0.0;
  double right = 0.0;
};

/// Expected class shares (LCL, FLW, LCR) for a stationary Poisson crossing
/// process: a sample is labeled by the first crossing within `horizon_s`, so
/// p_lcl = λ_L / λ · (1 − exp(−λ·T_H)). Reduces to λ_L·T_H for sparse events.
std::array<double, 3> expected_proportions(double lambda_left, double lambda_right, double horizon_s);

/// Average of the per-sample label probabilities over one trip of `samples`
/// grid points under constant rates; accounts for the truncated horizon near
/// the trip end and the one-sample detection latency.
std::array<double, 3> trip_expected_proportions(double lambda_left, double lambda_right, double horizon_s, double dt,
                                                std::size_t samples);

struct Route {
  std::vector<std::size_t> links;  // indices into the resegmented links, in travel order
  std::vector<double> link_start;  // route arclength where each link begins
  std::vector<geo::LonLat> polyline;
  std::vector<double> cum;  // arclength at each polyline vertex
  double length_m = 0.0;
};

struct LinkTruth {
  double expected_lcl = 0.0;  // sums of per-sample label probabilities
  double expected_flw = 0.0;
  double expected_lcr = 0.0;
  std::uint64_t samples = 0;
  LinkRates rates;
  std::array<double, 3> stationary{0.0, 1.0, 0.0};

  std::array<double, 3> proportions() const;
  LinkTruth& merge(const LinkTruth& o);
};

struct SimulatedTrip {
  RawTrajectory trajectory;
  std::vector<LaneChangeEvent> events;
};

struct GroundTruth {
  std::vector<LaneChangeEvent> events;
  std::map<std::string, LinkTruth> links;
};

/// Synthetic fleet over a generated or loaded map. Each trip draws from its
/// own seed derived from (seed, vehicle, trip), so output does not depend on
/// the order or thread in which trips are produced.
class FleetSimulator {
 public:
  explicit FleetSimulator(ScenarioConfig cfg);

  const ScenarioConfig& config() const { return cfg_; }
  const std::vector<SourceLink>& sources() const { return sources_; }
  const std::vector<InterchangeNode>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<LinkRates>& rates() const { return rates_; }
  const std::vector<Route>& routes() const { return routes_; }

  std::size_t trip_count() const { return cfg_.fleet_size * cfg_.trips_per_vehicle; }

  /// Trip number `index` (vehicle = index / trips_per_vehicle). Adds the
  /// label probabilities of its samples to `truth` (indexed like links())
  /// when given.
  SimulatedTrip generate_trip(std::size_t index, std::vector<LinkTruth>* truth = nullptr) const;

  /// Empty per-link truth table with rates and stationary expectations filled in.
  std::vector<LinkTruth> truth_table() const;
  GroundTruth collect(std::span<const SimulatedTrip> trips, std::span<const LinkTruth> table) const;

  /// Closed-form stationary expectation for one link.
  std::array<double, 3> expected_proportions(std::size_t link) const;

 private:
  void build_map();
  void build_routes();
  void assign_rates();

  ScenarioConfig cfg_;
  std::vector<SourceLink> sources_;
  std::vector<InterchangeNode> nodes_;
  std::vector<Link> links_;
  std::vector<LinkRates> rates_;
  std::vector<Route> routes_;
  double total_route_length_ = 0.0;
};

/// Builds the source polyline (and nodes) of a generated road. Arc vertices
/// lie on the circle and every piece's polyline length equals length_m.
SourceLink build_road(const RoadSpec& spec, std::vector<InterchangeNode>* nodes = nullptr);

struct GenerateSummary {
  std::size_t trips = 0;
  std::size_t samples = 0;
  std::size_t events = 0;
  std::size_t links = 0;
};

/// Writes trajectories (ingest format), ground truth JSON, and the source map.
GenerateSummary generate(const ScenarioConfig& cfg, const std::filesystem::path& traj_path,
                         const std::filesystem::path& truth_path, const std::filesystem::path& map_path,
                         unsigned threads = 1);

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);
std::vector<LaneChangeEvent> read_events(const std::filesystem::path& path);
void write_events(std::ostream& out, std::span<const LaneChangeEvent> events);

}  // namespace lcmap::sim
