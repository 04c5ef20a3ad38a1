#include "lcmap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "lcmap/error.hpp"
#include "lcmap/io.hpp"
#include "parallel.hpp"

namespace lcmap::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

void RunSummary::add(std::string key, std::string value) { items_.emplace_back(std::move(key), std::move(value)); }

void RunSummary::add(std::string key, double value) { add(std::move(key), io::format_double(value)); }

void RunSummary::append(const RunSummary& other, const std::string& prefix) {
  for (const auto& [k, v] : other.items_) items_.emplace_back(prefix + k, v);
}

std::optional<std::string> RunSummary::find(const std::string& key) const {
  for (const auto& [k, v] : items_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string RunSummary::to_text() const {
  std::string s;
  for (const auto& [k, v] : items_) s += k + ": " + v + "\n";
  return s;
}

DetectionParams detection_params(const PipelineConfig& cfg) {
  return {cfg.jump_min, cfg.jump_max, cfg.settle_window, cfg.min_event_gap_s};
}

MatchParams match_params(const PipelineConfig& cfg) { return {cfg.match_radius_m, cfg.heading_tol_deg}; }

BinningOptions binning_options(const PipelineConfig& cfg) {
  BinningOptions o;
  o.min_bin_count = cfg.min_bin_count;
  o.bootstrap_resamples = cfg.bootstrap_resamples;
  o.seed = cfg.seed;
  return o;
}

sim::ScenarioConfig apply_pipeline(sim::ScenarioConfig scenario, const PipelineConfig& cfg) {
  scenario.seed = cfg.seed;
  scenario.sample_dt = cfg.dt;
  scenario.horizon_s = cfg.horizon_s;
  scenario.seg_len_m = cfg.seg_len_m;
  scenario.min_event_gap_s = cfg.min_event_gap_s;
  return scenario;
}

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fixed3(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(3);
  s << v;
  return s.str();
}

// Fixed chunking keeps the merge order, and with it every floating-point
// sum, independent of the thread count.
constexpr std::size_t kTripsPerChunk = 16;

std::size_t chunk_count(std::size_t n) { return (n + kTripsPerChunk - 1) / kTripsPerChunk; }

void accumulate_trip(const LabeledTrajectory& lt, const LinkIndex& index, LinkAccumulator& acc) {
  const auto& s = lt.trajectory.samples;
  std::vector<std::optional<LaneChangeDirection>> crossing(s.size());
  for (std::size_t e = 0; e < lt.events.size(); ++e) {
    if (lt.crossing_sample[e] < s.size()) crossing[lt.crossing_sample[e]] = lt.events[e].direction;
  }
  for (std::size_t j = 0; j < s.size(); ++j) {
    const auto m = index.match({s[j].lon, s[j].lat}, s[j].heading);
    acc.add(m ? std::optional<std::size_t>(m->link) : std::nullopt, lt.labels[j], crossing[j]);
  }
}

std::vector<UniformTrajectory> resample_all(const std::vector<RawTrajectory>& raw, const PipelineConfig& cfg,
                                            std::size_t& too_short) {
  std::vector<std::vector<UniformTrajectory>> per(raw.size());
  std::vector<char> short_flag(raw.size(), 0);
  detail::parallel_for(raw.size(), cfg.threads, [&](std::size_t i) {
    if (raw[i].samples.size() < 2) {
      short_flag[i] = 1;
      return;
    }
    per[i] = resample_equidistant(raw[i], {cfg.dt, cfg.gap_limit});
  });
  std::vector<UniformTrajectory> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    too_short += short_flag[i];
    for (auto& p : per[i]) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

void write_labeled_records(std::ostream& out, const LabeledTrajectory& lt) {
  const auto& s = lt.trajectory.samples;
  std::vector<std::optional<LaneChangeDirection>> crossing(s.size());
  for (std::size_t e = 0; e < lt.events.size(); ++e) {
    if (lt.crossing_sample[e] < s.size()) crossing[lt.crossing_sample[e]] = lt.events[e].direction;
  }
  const std::string trip = json(lt.trajectory.trip_id).dump();
  std::string line;
  for (std::size_t j = 0; j < s.size(); ++j) {
    line.clear();
    line += "{\"trip\":" + trip;
    line += ",\"t\":" + io::format_double(s[j].t);
    line += ",\"lat\":" + io::format_double(s[j].lat);
    line += ",\"lon\":" + io::format_double(s[j].lon);
    line += ",\"dl\":" + io::format_double(s[j].dist_left);
    line += ",\"dr\":" + io::format_double(s[j].dist_right);
    line += ",\"v\":" + io::format_double(s[j].speed);
    line += ",\"hdg\":" + io::format_double(s[j].heading);
    line += ",\"label\":\"" + std::string(to_string(lt.labels[j])) + "\"";
    if (crossing[j]) line += ",\"cross\":\"" + std::string(to_string(*crossing[j])) + "\"";
    line += "}\n";
    out << line;
  }
}

std::vector<LabeledTrajectory> read_labeled_records(const fs::path& path) {
  auto in = io::open_input(path);
  std::vector<LabeledTrajectory> out;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  std::size_t lineno = 0;
  auto bad = [&](const std::string& why) {
    return Error(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw bad("invalid JSON record");
    RawSample s;
    std::string trip;
    ManeuverLabel label{};
    std::optional<LaneChangeDirection> cross;
    try {
      trip = j.at("trip").get<std::string>();
      s.t = j.at("t").get<double>();
      s.lat = j.at("lat").get<double>();
      s.lon = j.at("lon").get<double>();
      s.dist_left = j.at("dl").get<double>();
      s.dist_right = j.at("dr").get<double>();
      s.speed = j.at("v").get<double>();
      s.heading = j.at("hdg").get<double>();
      auto l = parse_label(j.at("label").get<std::string>());
      if (!l) throw bad("unknown label");
      label = *l;
      if (auto c = j.find("cross"); c != j.end()) {
        cross = parse_direction(c->get<std::string>());
        if (!cross) throw bad("unknown crossing direction");
      }
    } catch (const json::exception& e) {
      throw bad(std::string("missing or mistyped field: ") + e.what());
    }
    auto [it, inserted] = slot.try_emplace(trip, out.size());
    if (inserted) {
      out.emplace_back();
      out.back().trajectory.trip_id = trip;
      out.back().trajectory.t0 = s.t;
    }
    auto& lt = out[it->second];
    auto& samples = lt.trajectory.samples;
    if (!samples.empty() && !(s.t > samples.back().t)) throw bad("timestamps not increasing within trip " + trip);
    if (samples.size() == 1) lt.trajectory.dt = s.t - samples.front().t;
    if (cross) {
      lt.events.push_back({trip, s.t, *cross, s.lat, s.lon});
      lt.crossing_sample.push_back(samples.size());
    }
    samples.push_back(s);
    lt.labels.push_back(label);
    lt.event_ref.emplace_back();
  }
  return out;
}

DetectionScore score_detections(std::span<const LaneChangeEvent> truth, std::span<const LaneChangeEvent> detected,
                                double tolerance_s) {
  DetectionScore score;
  score.truth = truth.size();
  score.detected = detected.size();
  std::map<std::string, std::vector<std::size_t>> by_trip;
  for (std::size_t i = 0; i < detected.size(); ++i) by_trip[detected[i].trip_id].push_back(i);
  std::vector<char> used(detected.size(), 0);
  for (const auto& t : truth) {
    auto it = by_trip.find(t.trip_id);
    if (it == by_trip.end()) continue;
    std::optional<std::size_t> best;
    for (auto i : it->second) {
      const auto& d = detected[i];
      if (used[i] || d.direction != t.direction) continue;
      const double err = std::fabs(d.t_cross - t.t_cross);
      if (err > tolerance_s + 1e-9) continue;
      if (!best || err < std::fabs(detected[*best].t_cross - t.t_cross)) best = i;
    }
    if (best) {
      used[*best] = 1;
      ++score.true_positive;
    }
  }
  return score;
}

RunSummary run_simulate(const PipelineConfig& cfg, const sim::ScenarioConfig& scenario, const fs::path& traj_out,
                        const fs::path& truth_out, const fs::path& map_out) {
  Stopwatch sw;
  const auto s = sim::generate(apply_pipeline(scenario, cfg), traj_out, truth_out, map_out, cfg.threads);
  RunSummary r;
  r.add("stage", std::string("simulate"));
  r.add("trips", std::uint64_t{s.trips});
  r.add("samples", std::uint64_t{s.samples});
  r.add("events", std::uint64_t{s.events});
  r.add("links", std::uint64_t{s.links});
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

RunSummary run_ingest(const PipelineConfig& cfg, const fs::path& in, const fs::path& out_path) {
  Stopwatch sw;
  const auto parsed = parse_trajectory_file(in);
  std::size_t too_short = 0;
  const auto pieces = resample_all(parsed.trajectories, cfg, too_short);
  auto out = io::open_output(out_path);
  std::size_t samples = 0;
  for (const auto& p : pieces) {
    write_trajectory_records(out, p.trip_id, p.samples);
    samples += p.samples.size();
  }
  io::finish_output(out, out_path);

  const auto& rep = parsed.report;
  RunSummary r;
  r.add("stage", std::string("ingest"));
  r.add("lines", std::uint64_t{rep.lines});
  r.add("parsed", std::uint64_t{rep.parsed});
  r.add("malformed", std::uint64_t{rep.malformed});
  r.add("invalid", std::uint64_t{rep.invalid});
  r.add("duplicate_times", std::uint64_t{rep.duplicate_times});
  r.add("rejected_trips", std::uint64_t{rep.rejected_trips});
  r.add("rejected_samples", std::uint64_t{rep.rejected_samples});
  r.add("single_sample_trips", std::uint64_t{too_short});
  r.add("trips", std::uint64_t{parsed.trajectories.size()});
  r.add("pieces", std::uint64_t{pieces.size()});
  r.add("samples_out", std::uint64_t{samples});
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

RunSummary run_detect(const PipelineConfig& cfg, const fs::path& in, const fs::path& labeled_out,
                      const fs::path& events_out) {
  Stopwatch sw;
  const auto parsed = parse_trajectory_file(in);
  std::size_t too_short = 0;
  auto pieces = resample_all(parsed.trajectories, cfg, too_short);
  const auto params = detection_params(cfg);
  std::vector<LabeledTrajectory> labeled(pieces.size());
  detail::parallel_for(pieces.size(), cfg.threads, [&](std::size_t i) {
    auto events = detect_lane_changes(pieces[i], params);
    labeled[i] = label_samples(std::move(pieces[i]), events, cfg.horizon_s);
  });

  auto out = io::open_output(labeled_out);
  std::uint64_t counts[3] = {0, 0, 0};
  std::uint64_t left = 0;
  std::uint64_t right = 0;
  for (const auto& lt : labeled) {
    write_labeled_records(out, lt);
    for (auto l : lt.labels) ++counts[static_cast<int>(l)];
    for (const auto& e : lt.events) ++(e.direction == LaneChangeDirection::Left ? left : right);
  }
  io::finish_output(out, labeled_out);
  if (!events_out.empty()) {
    auto ev = io::open_output(events_out);
    for (const auto& lt : labeled) sim::write_events(ev, lt.events);
    io::finish_output(ev, events_out);
  }

  RunSummary r;
  r.add("stage", std::string("detect"));
  r.add("trips", std::uint64_t{labeled.size()});
  r.add("events_left", left);
  r.add("events_right", right);
  r.add("samples_lcl", counts[0]);
  r.add("samples_flw", counts[1]);
  r.add("samples_lcr", counts[2]);
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

RunSummary run_mapprep(const PipelineConfig& cfg, const fs::path& map_in, const fs::path& map_out) {
  Stopwatch sw;
  const auto data = load_map(map_in);
  ResegmentedMap rm;
  rm.seg_len_m = cfg.seg_len_m;
  rm.links = resegment(data.links, cfg.seg_len_m);
  rm.nodes = data.nodes;
  write_resegmented_map(map_out, rm);
  const auto no_bend = std::count_if(rm.links.begin(), rm.links.end(), [](const Link& l) { return !l.bend; });
  const auto no_slope = std::count_if(rm.links.begin(), rm.links.end(), [](const Link& l) { return !l.slope_pct; });

  RunSummary r;
  r.add("stage", std::string("mapprep"));
  r.add("source_links", std::uint64_t{data.report.links_read});
  r.add("source_links_skipped", std::uint64_t{data.report.links_skipped});
  r.add("nodes", std::uint64_t{data.nodes.size()});
  r.add("nodes_skipped", std::uint64_t{data.report.nodes_skipped});
  r.add("links", std::uint64_t{rm.links.size()});
  r.add("links_without_bend", static_cast<std::uint64_t>(no_bend));
  r.add("links_without_slope", static_cast<std::uint64_t>(no_slope));
  for (const auto& w : data.report.warnings) r.add("warning", w);
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

RunSummary run_aggregate(const PipelineConfig& cfg, const fs::path& labeled_in, const fs::path& map_in,
                         const fs::path& geojson_out, const fs::path& csv_out) {
  Stopwatch sw;
  const auto map = load_resegmented_map(map_in);
  const LinkIndex index(map.links, match_params(cfg));
  const auto labeled = read_labeled_records(labeled_in);

  const std::size_t chunks = chunk_count(labeled.size());
  std::vector<LinkAccumulator> partial(chunks, LinkAccumulator(map.links));
  detail::parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    const std::size_t end = std::min(labeled.size(), (c + 1) * kTripsPerChunk);
    for (std::size_t i = c * kTripsPerChunk; i < end; ++i) accumulate_trip(labeled[i], index, partial[c]);
  });
  LinkAccumulator total(map.links);
  for (const auto& p : partial) total.merge(p);

  const auto counters = total.counters();
  const auto pm = finalize(counters, cfg.density_min, cfg.horizon_s, map.seg_len_m);
  export_probability_map(geojson_out, pm, map.links);
  const auto rows = link_stats_rows(counters, pm, map.links);
  write_link_stats_csv(csv_out, rows);

  RunSummary r;
  r.add("stage", std::string("aggregate"));
  r.add("trips", std::uint64_t{labeled.size()});
  r.add("samples_matched", total.matched());
  r.add("samples_unmatched", total.unmatched());
  r.add("links_seen", std::uint64_t{pm.meta.links_seen});
  r.add("links_included", std::uint64_t{pm.meta.links_included});
  r.add("links_excluded", std::uint64_t{pm.excluded.size()});
  r.add("total_lcl", pm.meta.total_lcl);
  r.add("total_flw", pm.meta.total_flw);
  r.add("total_lcr", pm.meta.total_lcr);
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

namespace {

struct StatsInput {
  std::vector<LinkStatsRow> rows;
  ProbabilityMap pm;
  FeatureTable features;
};

StatsInput read_stats(const PipelineConfig& cfg, const fs::path& stats_csv) {
  StatsInput s;
  s.rows = read_link_stats_csv(stats_csv);
  s.pm = probability_map_from_rows(s.rows, cfg.density_min);
  s.features = features_from_rows(s.rows);
  return s;
}

const std::vector<double>& edges_for(const PipelineConfig& cfg, Feature f) {
  return f == Feature::Bend ? cfg.bend_edges : cfg.slope_edges;
}

void add_bins(RunSummary& r, const BinnedStat& b) {
  std::size_t with_stats = 0;
  for (const auto& bin : b.bins) with_stats += bin.median_p_flw ? 1 : 0;
  r.add("bins", std::uint64_t{b.bins.size()});
  r.add("bins_with_stats", std::uint64_t{with_stats});
  r.add("links_missing_feature", std::uint64_t{b.missing_feature});
  r.add("links_excluded_extreme", std::uint64_t{b.excluded_extreme});
  r.add("links_out_of_range", std::uint64_t{b.out_of_range});
}

}  // namespace

RunSummary run_analyze_bins(const PipelineConfig& cfg, const fs::path& stats_csv, Feature feature,
                            const fs::path& out_csv) {
  Stopwatch sw;
  const auto in = read_stats(cfg, stats_csv);
  const auto stat = bin_median_pflw(in.pm, in.features, feature, edges_for(cfg, feature), binning_options(cfg));
  write_binned_csv(out_csv, stat);
  RunSummary r;
  r.add("stage", "analyze " + std::string(to_string(feature)));
  r.add("links_included", std::uint64_t{in.pm.links.size()});
  add_bins(r, stat);
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

RunSummary run_analyze_heatmap(const PipelineConfig& cfg, const fs::path& events_in, const fs::path& out_csv,
                               const fs::path& out_geojson) {
  Stopwatch sw;
  const auto events = sim::read_events(events_in);
  const auto grid = build_heatmap(events, cfg.heatmap_cell_m);
  if (!out_csv.empty()) write_heatmap_csv(out_csv, grid);
  if (!out_geojson.empty()) write_heatmap_geojson(out_geojson, grid);
  RunSummary r;
  r.add("stage", std::string("analyze heatmap"));
  r.add("events", std::uint64_t{events.size()});
  r.add("rows", std::uint64_t{grid.rows});
  r.add("cols", std::uint64_t{grid.cols});
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

namespace {

std::vector<ProximityTag> proximity_tags(const PipelineConfig& cfg, const ResegmentedMap& map) {
  return tag_interchange_proximity(map.links, map.nodes, cfg.proximity_radius_m);
}

}  // namespace

RunSummary run_analyze_proximity(const PipelineConfig& cfg, const fs::path& map_in, const fs::path& out_csv) {
  Stopwatch sw;
  const auto map = load_resegmented_map(map_in);
  const auto tags = proximity_tags(cfg, map);
  auto out = io::open_output(out_csv);
  out << "link_id,tag,distance_m\n";
  std::uint64_t counts[3] = {0, 0, 0};
  for (const auto& t : tags) {
    out << t.link_id << ',' << to_string(t.tag) << ',' << io::format_optional(t.distance_m) << '\n';
    ++counts[static_cast<int>(t.tag)];
  }
  io::finish_output(out, out_csv);
  RunSummary r;
  r.add("stage", std::string("analyze proximity"));
  r.add("near_merger", counts[static_cast<int>(ProximityKind::NearMerger)]);
  r.add("near_divider", counts[static_cast<int>(ProximityKind::NearDivider)]);
  r.add("plain", counts[static_cast<int>(ProximityKind::Plain)]);
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

namespace {

RunSummary exclusion_summary(const PipelineConfig& cfg, const StatsInput& in, const std::set<std::string>& excluded,
                             Feature feature, const fs::path& out_csv, const Stopwatch& sw) {
  const auto res =
      exclusion_experiment(in.pm, in.features, excluded, feature, edges_for(cfg, feature), binning_options(cfg));
  write_exclusion_csv(out_csv, res);
  RunSummary r;
  r.add("stage", "analyze exclude " + std::string(to_string(feature)));
  r.add("links_excluded", std::uint64_t{excluded.size()});
  add_bins(r, res.without);
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

}  // namespace

RunSummary run_analyze_exclude(const PipelineConfig& cfg, const fs::path& stats_csv, const fs::path& map_in,
                               Feature feature, const fs::path& out_csv) {
  Stopwatch sw;
  const auto in = read_stats(cfg, stats_csv);
  const auto map = load_resegmented_map(map_in);
  std::set<std::string> excluded;
  for (const auto& t : proximity_tags(cfg, map)) {
    // Links never driven have no row and nothing to exclude.
    if (t.tag != ProximityKind::Plain && in.features.contains(t.link_id)) excluded.insert(t.link_id);
  }
  return exclusion_summary(cfg, in, excluded, feature, out_csv, sw);
}

RunSummary run_analyze_exclude_ids(const PipelineConfig& cfg, const fs::path& stats_csv, const fs::path& ids_file,
                                   Feature feature, const fs::path& out_csv) {
  Stopwatch sw;
  const auto in = read_stats(cfg, stats_csv);
  std::set<std::string> excluded;
  for (auto line : io::split(io::read_file(ids_file), '\n')) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    excluded.insert(line.substr(first));
  }
  return exclusion_summary(cfg, in, excluded, feature, out_csv, sw);
}

RunSummary run_export(const PipelineConfig& cfg, const fs::path& stats_csv, const fs::path& map_in,
                      const fs::path& geojson_out) {
  Stopwatch sw;
  const auto in = read_stats(cfg, stats_csv);
  const auto map = load_resegmented_map(map_in);
  export_probability_map(geojson_out, in.pm, map.links);
  RunSummary r;
  r.add("stage", std::string("export"));
  r.add("links_exported", std::uint64_t{in.pm.links.size()});
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

RunSummary run_all(const PipelineConfig& cfg, const sim::ScenarioConfig& scenario, const fs::path& out_dir) {
  Stopwatch sw;
  fs::create_directories(out_dir);
  const auto p = [&](const char* name) { return out_dir / name; };
  RunSummary r;
  r.append(run_simulate(cfg, scenario, p("trajectories.ndjson"), p("truth.json"), p("map.json")), "simulate.");
  r.append(run_ingest(cfg, p("trajectories.ndjson"), p("resampled.ndjson")), "ingest.");
  r.append(run_detect(cfg, p("resampled.ndjson"), p("labeled.ndjson"), p("events.ndjson")), "detect.");
  r.append(run_mapprep(cfg, p("map.json"), p("links.json")), "mapprep.");
  r.append(run_aggregate(cfg, p("labeled.ndjson"), p("links.json"), p("aggregate.geojson"), p("link_stats.csv")),
           "aggregate.");
  r.append(run_analyze_bins(cfg, p("link_stats.csv"), Feature::Bend, p("bins_bend.csv")), "analyze_bend.");
  r.append(run_analyze_bins(cfg, p("link_stats.csv"), Feature::SlopePct, p("bins_slope.csv")), "analyze_slope.");
  r.append(run_analyze_heatmap(cfg, p("events.ndjson"), p("heatmap.csv"), p("heatmap.geojson")), "heatmap.");
  r.append(run_analyze_proximity(cfg, p("links.json"), p("proximity.csv")), "proximity.");
  r.append(run_analyze_exclude(cfg, p("link_stats.csv"), p("links.json"), Feature::Bend, p("exclusion_bend.csv")),
           "exclude_bend.");
  r.append(run_analyze_exclude(cfg, p("link_stats.csv"), p("links.json"), Feature::SlopePct,
                               p("exclusion_slope.csv")),
           "exclude_slope.");
  r.append(run_export(cfg, p("link_stats.csv"), p("links.json"), p("probability_map.geojson")), "export.");
  r.add("elapsed_s", fixed3(sw.seconds()));
  return r;
}

SimulationRun simulate_and_aggregate(const PipelineConfig& cfg, const sim::ScenarioConfig& scenario,
                                     bool keep_events) {
  const sim::FleetSimulator simulator(apply_pipeline(scenario, cfg));
  const auto& links = simulator.links();
  const LinkIndex index(links, match_params(cfg));
  const auto params = detection_params(cfg);

  struct Chunk {
    explicit Chunk(std::span<const Link> l) : acc(l) {}
    LinkAccumulator acc;
    std::vector<sim::LinkTruth> truth;
    DetectionScore score;
    std::vector<LaneChangeEvent> events;
    std::uint64_t samples = 0;
  };
  const std::size_t trips = simulator.trip_count();
  const std::size_t chunks = chunk_count(trips);
  std::vector<Chunk> partial(chunks, Chunk(links));
  detail::parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    auto& ch = partial[c];
    ch.truth.assign(links.size(), {});
    const std::size_t end = std::min(trips, (c + 1) * kTripsPerChunk);
    for (std::size_t i = c * kTripsPerChunk; i < end; ++i) {
      auto trip = simulator.generate_trip(i, &ch.truth);
      std::vector<LaneChangeEvent> detected;
      for (auto& piece : resample_equidistant(trip.trajectory, {cfg.dt, cfg.gap_limit})) {
        auto events = detect_lane_changes(piece, params);
        detected.insert(detected.end(), events.begin(), events.end());
        const auto lt = label_samples(std::move(piece), events, cfg.horizon_s);
        ch.samples += lt.labels.size();
        accumulate_trip(lt, index, ch.acc);
      }
      const auto s = score_detections(trip.events, detected);
      ch.score.truth += s.truth;
      ch.score.detected += s.detected;
      ch.score.true_positive += s.true_positive;
      if (keep_events) ch.events.insert(ch.events.end(), detected.begin(), detected.end());
    }
  });

  SimulationRun run;
  run.links = links;
  run.nodes = simulator.nodes();
  run.rates = simulator.rates();
  run.truth = simulator.truth_table();
  run.trips = trips;
  LinkAccumulator total(links);
  for (auto& ch : partial) {
    total.merge(ch.acc);
    for (std::size_t l = 0; l < links.size(); ++l) run.truth[l].merge(ch.truth[l]);
    run.detection.truth += ch.score.truth;
    run.detection.detected += ch.score.detected;
    run.detection.true_positive += ch.score.true_positive;
    run.samples += ch.samples;
    run.detected_events.insert(run.detected_events.end(), ch.events.begin(), ch.events.end());
  }
  run.accumulation.counters = total.counters();
  run.accumulation.matched = total.matched();
  run.accumulation.unmatched = total.unmatched();
  return run;
}

}  // namespace lcmap::pipeline
