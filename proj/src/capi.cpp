#include "lcmap/lcmap.h"

#include <array>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "lcmap/error.hpp"
#include "lcmap/mapmodel.hpp"
#include "lcmap/pipeline.hpp"

struct lcmap_config {
  lcmap::ConfigStore store;
};

struct lcmap_summary {
  lcmap::pipeline::RunSummary summary;
};

namespace {

thread_local std::string g_last_error;

lcmap_status status_for(lcmap::ErrorKind k) {
  switch (k) {
    case lcmap::ErrorKind::InvalidArgument:
      return LCMAP_ERR_INVALID_ARGUMENT;
    case lcmap::ErrorKind::Io:
      return LCMAP_ERR_IO;
    case lcmap::ErrorKind::Format:
      return LCMAP_ERR_FORMAT;
    case lcmap::ErrorKind::Config:
      return LCMAP_ERR_CONFIG;
    case lcmap::ErrorKind::Contract:
      return LCMAP_ERR_CONTRACT;
    case lcmap::ErrorKind::Degenerate:
      return LCMAP_ERR_DEGENERATE;
  }
  return LCMAP_ERR_INTERNAL;
}

lcmap_status fail(lcmap_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <class Fn>
lcmap_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return LCMAP_OK;
  } catch (const lcmap::Error& e) {
    return fail(status_for(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(LCMAP_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LCMAP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LCMAP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LCMAP_ERR_INTERNAL, "unknown error");
  }
}

std::filesystem::path opt_path(const char* p) { return p ? std::filesystem::path(p) : std::filesystem::path(); }

void require(const void* p, const char* what) {
  if (!p) throw lcmap::Error(lcmap::ErrorKind::InvalidArgument, std::string(what) + " must not be NULL");
}

lcmap::sim::ScenarioConfig scenario_for(const lcmap_config* cfg, const char* scenario_path) {
  if (scenario_path) return lcmap::sim::load_scenario(scenario_path);
  if (cfg->store.file()) return lcmap::sim::load_scenario(*cfg->store.file());
  throw lcmap::Error(lcmap::ErrorKind::Config, "no scenario: pass a scenario file or load a config file with one");
}

lcmap::Feature feature_for(const char* name) {
  require(name, "feature");
  auto f = lcmap::parse_feature(name);
  if (!f) throw lcmap::Error(lcmap::ErrorKind::InvalidArgument, std::string("unknown feature '") + name + "'");
  return *f;
}

void emit(lcmap_summary** out, lcmap::pipeline::RunSummary s) {
  if (out) *out = new lcmap_summary{std::move(s)};
}

template <class Fn>
lcmap_status run(const lcmap_config* cfg, lcmap_summary** summary, Fn&& fn) {
  if (summary) *summary = nullptr;
  return guarded([&] {
    require(cfg, "config");
    const auto resolved = cfg->store.resolve();
    emit(summary, fn(resolved));
  });
}

}  // namespace

extern "C" {

const char* lcmap_last_error(void) { return g_last_error.c_str(); }

const char* lcmap_status_name(lcmap_status status) {
  switch (status) {
    case LCMAP_OK:
      return "ok";
    case LCMAP_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case LCMAP_ERR_IO:
      return "i/o error";
    case LCMAP_ERR_FORMAT:
      return "format error";
    case LCMAP_ERR_CONFIG:
      return "config error";
    case LCMAP_ERR_CONTRACT:
      return "contract violation";
    case LCMAP_ERR_DEGENERATE:
      return "degenerate input";
    case LCMAP_ERR_INTERNAL:
      break;
  }
  return "internal error";
}

const char* lcmap_version(void) { return "0.1.0"; }

lcmap_status lcmap_config_create(lcmap_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lcmap_config{};
  });
}

void lcmap_config_destroy(lcmap_config* cfg) { delete cfg; }

lcmap_status lcmap_config_load_file(lcmap_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    require(path, "path");
    cfg->store.load_file(path);
  });
}

lcmap_status lcmap_config_load_env(lcmap_config* cfg) {
  return guarded([&] {
    require(cfg, "config");
    cfg->store.load_env();
  });
}

lcmap_status lcmap_config_set(lcmap_config* cfg, const char* key, const char* value, const char* origin) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->store.set(key, value, lcmap::ConfigSource::Flag, origin ? origin : "");
  });
}

lcmap_status lcmap_config_get(const lcmap_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    const auto v = cfg->store.get(key);
    if (needed) *needed = v.size();
    if (buf && cap > 0) {
      const size_t n = v.size() < cap - 1 ? v.size() : cap - 1;
      std::memcpy(buf, v.data(), n);
      buf[n] = '\0';
    }
  });
}

lcmap_status lcmap_config_validate(const lcmap_config* cfg) {
  return guarded([&] {
    require(cfg, "config");
    (void)cfg->store.resolve();
  });
}

size_t lcmap_config_key_count(void) { return lcmap::ConfigStore::keys().size(); }

const char* lcmap_config_key(size_t index) {
  const auto& k = lcmap::ConfigStore::keys();
  return index < k.size() ? k[index].c_str() : nullptr;
}

lcmap_status lcmap_run_simulate(const lcmap_config* cfg, const char* scenario_path, const char* traj_out,
                                const char* truth_out, const char* map_out, lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(traj_out, "traj_out");
    require(truth_out, "truth_out");
    return lcmap::pipeline::run_simulate(c, scenario_for(cfg, scenario_path), traj_out, truth_out, opt_path(map_out));
  });
}

lcmap_status lcmap_run_ingest(const lcmap_config* cfg, const char* in, const char* out, lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(in, "in");
    require(out, "out");
    return lcmap::pipeline::run_ingest(c, in, out);
  });
}

lcmap_status lcmap_run_detect(const lcmap_config* cfg, const char* in, const char* labeled_out, const char* events_out,
                              lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(in, "in");
    require(labeled_out, "labeled_out");
    return lcmap::pipeline::run_detect(c, in, labeled_out, opt_path(events_out));
  });
}

lcmap_status lcmap_run_mapprep(const lcmap_config* cfg, const char* map_in, const char* map_out,
                               lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(map_in, "map_in");
    require(map_out, "map_out");
    return lcmap::pipeline::run_mapprep(c, map_in, map_out);
  });
}

lcmap_status lcmap_run_aggregate(const lcmap_config* cfg, const char* labeled_in, const char* map_in,
                                 const char* geojson_out, const char* csv_out, lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(labeled_in, "labeled_in");
    require(map_in, "map_in");
    require(geojson_out, "geojson_out");
    require(csv_out, "csv_out");
    return lcmap::pipeline::run_aggregate(c, labeled_in, map_in, geojson_out, csv_out);
  });
}

lcmap_status lcmap_run_analyze_bins(const lcmap_config* cfg, const char* stats_csv, const char* feature,
                                    const char* out_csv, lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(stats_csv, "stats_csv");
    require(out_csv, "out_csv");
    return lcmap::pipeline::run_analyze_bins(c, stats_csv, feature_for(feature), out_csv);
  });
}

lcmap_status lcmap_run_analyze_heatmap(const lcmap_config* cfg, const char* events_in, const char* out_csv,
                                       const char* out_geojson, lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(events_in, "events_in");
    if (!out_csv && !out_geojson) throw lcmap::Error(lcmap::ErrorKind::InvalidArgument, "heatmap: no output requested");
    return lcmap::pipeline::run_analyze_heatmap(c, events_in, opt_path(out_csv), opt_path(out_geojson));
  });
}

lcmap_status lcmap_run_analyze_proximity(const lcmap_config* cfg, const char* map_in, const char* out_csv,
                                         lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(map_in, "map_in");
    require(out_csv, "out_csv");
    return lcmap::pipeline::run_analyze_proximity(c, map_in, out_csv);
  });
}

lcmap_status lcmap_run_analyze_exclude(const lcmap_config* cfg, const char* stats_csv, const char* map_in,
                                       const char* feature, const char* out_csv, lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(stats_csv, "stats_csv");
    require(map_in, "map_in");
    require(out_csv, "out_csv");
    return lcmap::pipeline::run_analyze_exclude(c, stats_csv, map_in, feature_for(feature), out_csv);
  });
}

lcmap_status lcmap_run_analyze_exclude_ids(const lcmap_config* cfg, const char* stats_csv, const char* ids_file,
                                           const char* feature, const char* out_csv, lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(stats_csv, "stats_csv");
    require(ids_file, "ids_file");
    require(out_csv, "out_csv");
    return lcmap::pipeline::run_analyze_exclude_ids(c, stats_csv, ids_file, feature_for(feature), out_csv);
  });
}

lcmap_status lcmap_run_export(const lcmap_config* cfg, const char* stats_csv, const char* map_in,
                              const char* geojson_out, lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(stats_csv, "stats_csv");
    require(map_in, "map_in");
    require(geojson_out, "geojson_out");
    return lcmap::pipeline::run_export(c, stats_csv, map_in, geojson_out);
  });
}

lcmap_status lcmap_run_all(const lcmap_config* cfg, const char* scenario_path, const char* out_dir,
                           lcmap_summary** summary) {
  return run(cfg, summary, [&](const lcmap::PipelineConfig& c) {
    require(out_dir, "out_dir");
    return lcmap::pipeline::run_all(c, scenario_for(cfg, scenario_path), out_dir);
  });
}

size_t lcmap_summary_count(const lcmap_summary* s) { return s ? s->summary.items().size() : 0; }

const char* lcmap_summary_key(const lcmap_summary* s, size_t index) {
  if (!s || index >= s->summary.items().size()) return nullptr;
  return s->summary.items()[index].first.c_str();
}

const char* lcmap_summary_value(const lcmap_summary* s, size_t index) {
  if (!s || index >= s->summary.items().size()) return nullptr;
  return s->summary.items()[index].second.c_str();
}

void lcmap_summary_destroy(lcmap_summary* s) { delete s; }

lcmap_status lcmap_reweight_posteriors(const double balanced[3], const double priors[3], double out[3]) {
  return guarded([&] {
    require(balanced, "balanced");
    require(priors, "priors");
    require(out, "out");
    const std::array<double, 3> b{balanced[0], balanced[1], balanced[2]};
    const std::array<double, 3> p{priors[0], priors[1], priors[2]};
    const auto r = lcmap::reweight_posteriors(b, p);
    for (int i = 0; i < 3; ++i) out[i] = r[static_cast<size_t>(i)];
  });
}

lcmap_status lcmap_bend(const double* lonlat, size_t n, double* out, int* defined) {
  return guarded([&] {
    require(lonlat, "lonlat");
    require(out, "out");
    require(defined, "defined");
    if (n < 2) throw lcmap::Error(lcmap::ErrorKind::InvalidArgument, "bend: need at least 2 points");
    std::vector<lcmap::geo::LonLat> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i] = {lonlat[2 * i], lonlat[2 * i + 1]};
    const auto b = lcmap::compute_bend(pts);
    *defined = b ? 1 : 0;
    *out = b.value_or(0.0);
  });
}

}  // extern "C"
