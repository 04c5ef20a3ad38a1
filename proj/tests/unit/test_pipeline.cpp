#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lcmap/pipeline.hpp"

using namespace lcmap;
using namespace lcmap::pipeline;
namespace fs = std::filesystem;

namespace {

sim::ScenarioConfig scenario() {
  sim::ScenarioConfig c;
  sim::RoadSpec r;
  r.direction = TravelDirection::Both;
  r.pieces = {sim::RoadPiece{sim::RoadPiece::Kind::Straight, 1000.0, 0.0, true, 3.0},
              sim::RoadPiece{sim::RoadPiece::Kind::Arc, 600.0, 700.0, true, 0.0},
              sim::RoadPiece{sim::RoadPiece::Kind::Straight, 1000.0, 0.0, true, -2.0}};
  r.nodes = {{"d", 1800.0, InterchangeKind::Divider}};
  c.roads.push_back(r);
  c.rates = {0.6, 0.6};
  c.effects.interchange_boost = 2.0;
  c.fleet_size = 6;
  c.trips_per_vehicle = 6;
  c.trip_duration_s = 80.0;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("summary text") {
  RunSummary s;
  s.add("a", std::uint64_t{3});
  s.add("b", std::string("x"));
  RunSummary t;
  t.append(s, "pre.");
  CHECK(t.find("pre.a") == "3");
  CHECK_FALSE(t.find("a").has_value());
  CHECK(s.to_text() == "a: 3\nb: x\n");
}

TEST_CASE("shared keys override the scenario") {
  PipelineConfig cfg;
  cfg.seed = 4;
  cfg.horizon_s = 3.0;
  const auto s = apply_pipeline(scenario(), cfg);
  CHECK(s.seed == 4);
  CHECK(s.horizon_s == 3.0);
  CHECK(s.sample_dt == cfg.dt);
}

TEST_CASE("detection scoring") {
  const std::vector<LaneChangeEvent> truth{{"a", 10.0, LaneChangeDirection::Left, 0, 0},
                                           {"a", 20.0, LaneChangeDirection::Right, 0, 0},
                                           {"b", 5.0, LaneChangeDirection::Left, 0, 0}};
  const std::vector<LaneChangeEvent> det{{"a", 10.05, LaneChangeDirection::Left, 0, 0},
                                         {"a", 20.0, LaneChangeDirection::Left, 0, 0},
                                         {"b", 5.3, LaneChangeDirection::Left, 0, 0}};
  const auto s = score_detections(truth, det);
  CHECK(s.true_positive == 1);
  CHECK(s.recall() == doctest::Approx(1.0 / 3));
  CHECK(s.precision() == doctest::Approx(1.0 / 3));
}

TEST_CASE("labeled records round trip") {
  const sim::FleetSimulator simulator(scenario());
  auto trip = simulator.generate_trip(2);
  auto piece = resample_equidistant(trip.trajectory).at(0);
  const auto events = detect_lane_changes(piece);
  const auto lt = label_samples(piece, events, 5.0);
  const auto dir = fresh_dir("lcmap_unit_labeled");
  {
    std::ofstream out(dir / "l.ndjson");
    write_labeled_records(out, lt);
  }
  const auto back = read_labeled_records(dir / "l.ndjson");
  REQUIRE(back.size() == 1);
  CHECK(back[0].labels == lt.labels);
  CHECK(back[0].trajectory.samples.size() == lt.trajectory.samples.size());
  CHECK(back[0].trajectory.samples[17].lat == lt.trajectory.samples[17].lat);
  REQUIRE(back[0].events.size() == lt.events.size());
  for (std::size_t e = 0; e < lt.events.size(); ++e) {
    CHECK(back[0].crossing_sample[e] == lt.crossing_sample[e]);
    CHECK(back[0].events[e].direction == lt.events[e].direction);
  }
  fs::remove_all(dir);
}

TEST_CASE("separate stages reproduce the all command") {
  PipelineConfig cfg;
  cfg.threads = 2;
  const auto all_dir = fresh_dir("lcmap_unit_all");
  const auto sum = run_all(cfg, scenario(), all_dir);
  CHECK(sum.find("aggregate.links_included").has_value());

  const auto d = fresh_dir("lcmap_unit_stages");
  run_simulate(cfg, scenario(), d / "traj.ndjson", d / "truth.json", d / "map.json");
  run_ingest(cfg, d / "traj.ndjson", d / "res.ndjson");
  run_detect(cfg, d / "res.ndjson", d / "lab.ndjson", d / "ev.ndjson");
  run_mapprep(cfg, d / "map.json", d / "links.json");
  run_aggregate(cfg, d / "lab.ndjson", d / "links.json", d / "agg.geojson", d / "stats.csv");
  run_analyze_bins(cfg, d / "stats.csv", Feature::SlopePct, d / "bins.csv");
  run_export(cfg, d / "stats.csv", d / "links.json", d / "pm.geojson");

  CHECK(slurp(d / "traj.ndjson") == slurp(all_dir / "trajectories.ndjson"));
  CHECK(slurp(d / "lab.ndjson") == slurp(all_dir / "labeled.ndjson"));
  CHECK(slurp(d / "stats.csv") == slurp(all_dir / "link_stats.csv"));
  CHECK(slurp(d / "bins.csv") == slurp(all_dir / "bins_slope.csv"));
  CHECK(slurp(d / "pm.geojson") == slurp(all_dir / "probability_map.geojson"));
  CHECK(slurp(d / "agg.geojson") == slurp(d / "pm.geojson"));
  fs::remove_all(all_dir);
  fs::remove_all(d);
}

TEST_CASE("file outputs do not depend on the thread count") {
  const char* files[] = {"trajectories.ndjson", "truth.json", "labeled.ndjson", "link_stats.csv",
                         "bins_bend.csv",       "heatmap.csv", "proximity.csv", "probability_map.geojson"};
  PipelineConfig one;
  one.threads = 1;
  PipelineConfig three;
  three.threads = 3;
  const auto a = fresh_dir("lcmap_unit_t1");
  const auto b = fresh_dir("lcmap_unit_t3");
  run_all(one, scenario(), a);
  run_all(three, scenario(), b);
  for (const char* f : files) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("in-memory run recovers the simulated per-link probabilities") {
  auto sc = scenario();
  sc.fleet_size = 20;
  sc.trips_per_vehicle = 20;
  PipelineConfig cfg;
  const auto run = simulate_and_aggregate(cfg, sc);
  CHECK(run.detection.recall() == 1.0);
  CHECK(run.detection.precision() == 1.0);
  CHECK(run.accumulation.unmatched == 0);
  // Samples within one horizon share their label, so the effective sample
  // size is smaller by about horizon/dt + 1.
  const double m = cfg.horizon_s / cfg.dt + 1.0;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < run.links.size(); ++i) {
    auto it = run.accumulation.counters.find(run.links[i].id);
    if (it == run.accumulation.counters.end() || it->second.total() < 20000) continue;
    const double n = static_cast<double>(it->second.total());
    const auto want = run.truth[i].proportions();
    const double got = static_cast<double>(it->second.n_lcl) / n;
    const double se = std::sqrt(std::max(want[0] * (1 - want[0]), 1e-6) * m / n);
    CAPTURE(run.links[i].id);
    CHECK(std::fabs(got - want[0]) < 5.0 * se);
    ++checked;
  }
  CHECK(checked > 10);

  PipelineConfig threaded = cfg;
  threaded.threads = 4;
  const auto again = simulate_and_aggregate(threaded, sc);
  CHECK(again.accumulation.counters == run.accumulation.counters);
}

}  // TEST_SUITE
