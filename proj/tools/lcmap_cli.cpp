// Command-line front end. Talks to the pipeline exclusively through the C API.

#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcmap/lcmap.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

using ConfigPtr = std::unique_ptr<lcmap_config, decltype(&lcmap_config_destroy)>;

std::string dashed(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

int report(lcmap_status st) {
  std::fprintf(stderr, "lcmap: %s: %s\n", lcmap_status_name(st), lcmap_last_error());
  // Bad flag values and config conflicts are usage problems; the rest happened at run time.
  return st == LCMAP_ERR_CONFIG || st == LCMAP_ERR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
}

int finish(lcmap_status st, lcmap_summary* summary) {
  if (st != LCMAP_OK) return report(st);
  for (size_t i = 0; i < lcmap_summary_count(summary); ++i) {
    std::printf("%s: %s\n", lcmap_summary_key(summary, i), lcmap_summary_value(summary, i));
  }
  lcmap_summary_destroy(summary);
  return kExitOk;
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lane-change probability maps from fleet trajectories"};
  app.set_version_flag("--version", lcmap_version());
  app.require_subcommand(1);
  app.fallthrough();
  app.footer("Parameters resolve as flag > environment (LCMAP_<KEY>) > config file > default.");

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (pipeline keys and scenario)");
  // Short spellings for the parameters people type most.
  const std::map<std::string, std::string> aliases = {
      {"horizon_s", "--horizon"}, {"seg_len_m", "--seg-len"}, {"heatmap_cell_m", "--cell"}};
  std::map<std::string, std::string> flag_values;
  for (size_t i = 0; i < lcmap_config_key_count(); ++i) {
    const std::string key = lcmap_config_key(i);
    std::string names = "--" + dashed(key);
    if (auto a = aliases.find(key); a != aliases.end()) names += "," + a->second;
    app.add_option(names, flag_values[key], "override '" + key + "'");
  }

  std::function<lcmap_status(const lcmap_config*, lcmap_summary**)> action;

  std::string scenario, out_traj, out_truth, out_map;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic fleet");
  simulate->add_option("--scenario", scenario, "scenario file (default: the --config file)");
  simulate->add_option("--out-traj", out_traj, "trajectory output")->required();
  simulate->add_option("--out-truth", out_truth, "ground-truth output")->required();
  simulate->add_option("--out-map", out_map, "source map output");
  simulate->callback([&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) {
      return lcmap_run_simulate(c, opt(scenario), out_traj.c_str(), out_truth.c_str(), opt(out_map), s);
    };
  });

  std::string in, out, out_events;
  auto* ingest = app.add_subcommand("ingest", "parse and resample raw trajectories");
  ingest->add_option("--in", in, "raw trajectory records")->required();
  ingest->add_option("--out", out, "resampled trajectory records")->required();
  ingest->callback([&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) { return lcmap_run_ingest(c, in.c_str(), out.c_str(), s); };
  });

  auto* detect = app.add_subcommand("detect", "detect lane changes and label samples");
  detect->add_option("--in", in, "trajectory records")->required();
  detect->add_option("--out", out, "labeled records")->required();
  detect->add_option("--out-events", out_events, "detected events");
  detect->callback([&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) {
      return lcmap_run_detect(c, in.c_str(), out.c_str(), opt(out_events), s);
    };
  });

  auto* mapprep = app.add_subcommand("mapprep", "cut the road map into equal-length links");
  mapprep->add_option("--in,--map", in, "source map")->required();
  mapprep->add_option("--out", out, "link map")->required();
  mapprep->callback([&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) { return lcmap_run_mapprep(c, in.c_str(), out.c_str(), s); };
  });

  std::string labeled, map, out_geojson, out_csv;
  auto* aggregate = app.add_subcommand("aggregate", "map-match labeled samples and build the probability map");
  aggregate->add_option("--labeled", labeled, "labeled records")->required();
  aggregate->add_option("--map", map, "link map")->required();
  aggregate->add_option("--out-geojson", out_geojson, "probability map")->required();
  aggregate->add_option("--out-csv", out_csv, "per-link statistics")->required();
  aggregate->callback([&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) {
      return lcmap_run_aggregate(c, labeled.c_str(), map.c_str(), out_geojson.c_str(), out_csv.c_str(), s);
    };
  });

  std::string stats, feature = "bend", events, bins_spec, ids;
  // `analyze` on its own computes the binned medians, like `analyze bins`.
  auto add_bin_options = [&](CLI::App* sub) {
    sub->add_option("--stats", stats, "link statistics CSV");
    sub->add_option("--feature", feature, "bend or slope")->check(CLI::IsMember({"bend", "slope"}));
    sub->add_option("--bins", bins_spec, "comma-separated bin edges, or 'auto' for the configured edges");
    sub->add_option("--out", out, "binned CSV");
  };
  auto bins_action = [&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) {
      return lcmap_run_analyze_bins(c, opt(stats), feature.c_str(), opt(out), s);
    };
  };
  auto* analyze = app.add_subcommand("analyze", "binned statistics, heatmaps and interchange analysis");
  analyze->require_subcommand(0, 1);
  add_bin_options(analyze);
  analyze->callback([&] {
    if (!action) bins_action();
  });
  auto* bins = analyze->add_subcommand("bins", "median lane-following probability per feature bin");
  add_bin_options(bins);
  bins->callback(bins_action);
  auto* heatmap = analyze->add_subcommand("heatmap", "lane-change counts on a square grid");
  heatmap->add_option("--events", events, "detected events")->required();
  heatmap->add_option("--out-csv", out_csv, "grid CSV");
  heatmap->add_option("--out-geojson", out_geojson, "grid GeoJSON");
  heatmap->callback([&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) {
      return lcmap_run_analyze_heatmap(c, events.c_str(), opt(out_csv), opt(out_geojson), s);
    };
  });
  auto* exclude = analyze->add_subcommand("exclude", "bins with and without interchange-adjacent links");
  exclude->add_option("--stats", stats, "link statistics CSV")->required();
  exclude->add_option("--map", map, "link map; links it tags near an interchange are excluded");
  exclude->add_option("--ids", ids, "file of link ids to exclude instead, one per line");
  exclude->add_option("--feature", feature, "bend or slope")->check(CLI::IsMember({"bend", "slope"}));
  exclude->add_option("--bins", bins_spec, "comma-separated bin edges, or 'auto' for the configured edges");
  exclude->add_option("--out", out, "comparison CSV")->required();
  exclude->callback([&] {
    if (map.empty() == ids.empty()) throw CLI::ValidationError("analyze exclude", "give exactly one of --map and --ids");
    action = [&](const lcmap_config* c, lcmap_summary** s) {
      if (!ids.empty()) {
        return lcmap_run_analyze_exclude_ids(c, stats.c_str(), ids.c_str(), feature.c_str(), out.c_str(), s);
      }
      return lcmap_run_analyze_exclude(c, stats.c_str(), map.c_str(), feature.c_str(), out.c_str(), s);
    };
  });
  auto* proximity = analyze->add_subcommand("proximity", "tag links near mergers and dividers");
  proximity->add_option("--map", map, "link map")->required();
  proximity->add_option("--out", out, "tag CSV")->required();
  proximity->callback([&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) {
      return lcmap_run_analyze_proximity(c, map.c_str(), out.c_str(), s);
    };
  });

  auto* exporter = app.add_subcommand("export", "write the probability map GeoJSON from link statistics");
  exporter->add_option("--stats", stats, "link statistics CSV")->required();
  exporter->add_option("--map", map, "link map")->required();
  exporter->add_option("--out", out, "GeoJSON output")->required();
  exporter->callback([&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) {
      return lcmap_run_export(c, stats.c_str(), map.c_str(), out.c_str(), s);
    };
  });

  std::string out_dir = "lcmap-out";
  auto* all = app.add_subcommand("all", "simulate and run every stage");
  all->add_option("--scenario", scenario, "scenario file (default: the --config file)");
  all->add_option("--out-dir", out_dir, "directory for all outputs")->capture_default_str();
  all->callback([&] {
    action = [&](const lcmap_config* c, lcmap_summary** s) { return lcmap_run_all(c, opt(scenario), out_dir.c_str(), s); };
  });

  for (auto* sub : {simulate, ingest, detect, mapprep, aggregate, analyze, bins, heatmap, exclude, proximity, exporter, all}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return kExitOk;
    std::fputs("Usage: lcmap [OPTIONS] SUBCOMMAND ... (see --help)\n", stderr);
    return kExitUsage;
  }

  lcmap_config* raw = nullptr;
  if (lcmap_config_create(&raw) != LCMAP_OK) return report(LCMAP_ERR_INTERNAL);
  ConfigPtr cfg(raw, &lcmap_config_destroy);
  if (!config_path.empty()) {
    if (auto st = lcmap_config_load_file(cfg.get(), config_path.c_str()); st != LCMAP_OK) return report(st);
  }
  if (auto st = lcmap_config_load_env(cfg.get()); st != LCMAP_OK) return report(st);
  for (const auto& [key, value] : flag_values) {
    if (value.empty()) continue;
    const std::string origin = "flag --" + dashed(key);
    if (auto st = lcmap_config_set(cfg.get(), key.c_str(), value.c_str(), origin.c_str()); st != LCMAP_OK) {
      return report(st);
    }
  }
  if (!bins_spec.empty() && bins_spec != "auto") {
    const std::string key = feature == "slope" ? "slope_edges" : "bend_edges";
    if (auto st = lcmap_config_set(cfg.get(), key.c_str(), bins_spec.c_str(), "flag --bins"); st != LCMAP_OK) {
      return report(st);
    }
  }
  if (!action) {
    std::fputs(app.help().c_str(), stderr);
    return kExitUsage;
  }
  lcmap_summary* summary = nullptr;
  const auto st = action(cfg.get(), &summary);
  return finish(st, summary);
}
