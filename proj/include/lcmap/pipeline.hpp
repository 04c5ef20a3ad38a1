#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcmap/aggregate.hpp"
#include "lcmap/analyze.hpp"
#include "lcmap/config.hpp"
#include "lcmap/detect.hpp"
#include "lcmap/simulate.hpp"

namespace lcmap::pipeline {

/// Ordered key/value report printed after each stage.
class RunSummary {
 public:
  void add(std::string key, std::string value);
  void add(std::string key, std::uint64_t value) { add(std::move(key), std::to_string(value)); }
  void add(std::string key, double value);
  void append(const RunSummary& other, const std::string& prefix = {});

  std::optional<std::string> find(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }
  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

DetectionParams detection_params(const PipelineConfig& cfg);
MatchParams match_params(const PipelineConfig& cfg);
BinningOptions binning_options(const PipelineConfig& cfg);

/// Overrides the scenario's shared keys (seed, dt, horizon, link length,
/// event gap) with the resolved pipeline values.
sim::ScenarioConfig apply_pipeline(sim::ScenarioConfig scenario, const PipelineConfig& cfg);

/// Labeled records are trajectory records with "label" and, on the sample
/// where a crossing was detected, "cross".
void write_labeled_records(std::ostream& out, const LabeledTrajectory& lt);
std::vector<LabeledTrajectory> read_labeled_records(const std::filesystem::path& path);

RunSummary run_simulate(const PipelineConfig& cfg, const sim::ScenarioConfig& scenario,
                        const std::filesystem::path& traj_out, const std::filesystem::path& truth_out,
                        const std::filesystem::path& map_out);
RunSummary run_ingest(const PipelineConfig& cfg, const std::filesystem::path& in, const std::filesystem::path& out);
RunSummary run_detect(const PipelineConfig& cfg, const std::filesystem::path& in,
                      const std::filesystem::path& labeled_out, const std::filesystem::path& events_out = {});
RunSummary run_mapprep(const PipelineConfig& cfg, const std::filesystem::path& map_in,
                       const std::filesystem::path& map_out);
RunSummary run_aggregate(const PipelineConfig& cfg, const std::filesystem::path& labeled_in,
                         const std::filesystem::path& map_in, const std::filesystem::path& geojson_out,
                         const std::filesystem::path& csv_out);
RunSummary run_analyze_bins(const PipelineConfig& cfg, const std::filesystem::path& stats_csv, Feature feature,
                            const std::filesystem::path& out_csv);
RunSummary run_analyze_heatmap(const PipelineConfig& cfg, const std::filesystem::path& events_in,
                               const std::filesystem::path& out_csv, const std::filesystem::path& out_geojson);
RunSummary run_analyze_proximity(const PipelineConfig& cfg, const std::filesystem::path& map_in,
                                 const std::filesystem::path& out_csv);
/// Bins with and without the links tagged near an interchange.
RunSummary run_analyze_exclude(const PipelineConfig& cfg, const std::filesystem::path& stats_csv,
                               const std::filesystem::path& map_in, Feature feature,
                               const std::filesystem::path& out_csv);
/// Same comparison with the excluded link ids read from a file, one per line
/// ('#' starts a comment line).
RunSummary run_analyze_exclude_ids(const PipelineConfig& cfg, const std::filesystem::path& stats_csv,
                                   const std::filesystem::path& ids_file, Feature feature,
                                   const std::filesystem::path& out_csv);
RunSummary run_export(const PipelineConfig& cfg, const std::filesystem::path& stats_csv,
                      const std::filesystem::path& map_in, const std::filesystem::path& geojson_out);

/// simulate, ingest, detect, mapprep, aggregate, analyze and export, with
/// every intermediate file written to `out_dir`.
RunSummary run_all(const PipelineConfig& cfg, const sim::ScenarioConfig& scenario,
                   const std::filesystem::path& out_dir);

struct DetectionScore {
  std::uint64_t truth = 0;
  std::uint64_t detected = 0;
  std::uint64_t true_positive = 0;

  double recall() const { return truth ? static_cast<double>(true_positive) / static_cast<double>(truth) : 1.0; }
  double precision() const {
    return detected ? static_cast<double>(true_positive) / static_cast<double>(detected) : 1.0;
  }
};

/// Greedy one-to-one matching of detections to truth: same direction and
/// |Δt| <= tolerance_s.
DetectionScore score_detections(std::span<const LaneChangeEvent> truth, std::span<const LaneChangeEvent> detected,
                                double tolerance_s = 0.1);

struct SimulationRun {
  std::vector<Link> links;
  std::vector<InterchangeNode> nodes;
  std::vector<sim::LinkRates> rates;
  std::vector<sim::LinkTruth> truth;  // indexed like links
  Accumulation accumulation;
  DetectionScore detection;
  std::vector<LaneChangeEvent> detected_events;  // filled when requested
  std::uint64_t samples = 0;
  std::uint64_t trips = 0;
};

/// The whole pipeline on simulator output without touching the disk:
/// generate, resample, detect, label, match and accumulate, trip by trip.
SimulationRun simulate_and_aggregate(const PipelineConfig& cfg, const sim::ScenarioConfig& scenario,
                                     bool keep_events = false);

}  // namespace lcmap::pipeline
