#ifndef LCMAP_LCMAP_H
#define LCMAP_LCMAP_H

#include <stddef.h>

#if defined(_WIN32)
#if defined(LCMAP_BUILDING_LIBRARY)
#define LCMAP_API __declspec(dllexport)
#else
#define LCMAP_API __declspec(dllimport)
#endif
#else
#define LCMAP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lcmap_status {
  LCMAP_OK = 0,
  LCMAP_ERR_INVALID_ARGUMENT = 1,
  LCMAP_ERR_IO = 2,
  LCMAP_ERR_FORMAT = 3,
  LCMAP_ERR_CONFIG = 4,
  LCMAP_ERR_CONTRACT = 5,
  LCMAP_ERR_DEGENERATE = 6,
  LCMAP_ERR_INTERNAL = 7
} lcmap_status;

typedef struct lcmap_config lcmap_config;
typedef struct lcmap_summary lcmap_summary;

/* Message of the last failed call on this thread; never NULL. */
LCMAP_API const char* lcmap_last_error(void);
LCMAP_API const char* lcmap_status_name(lcmap_status status);
LCMAP_API const char* lcmap_version(void);

/* Configuration. Values resolve as flag > environment (LCMAP_*) > file > default. */
LCMAP_API lcmap_status lcmap_config_create(lcmap_config** out);
LCMAP_API void lcmap_config_destroy(lcmap_config* cfg);
LCMAP_API lcmap_status lcmap_config_load_file(lcmap_config* cfg, const char* path);
LCMAP_API lcmap_status lcmap_config_load_env(lcmap_config* cfg);
/* Sets a value with flag precedence; `origin` (may be NULL) names it in messages. */
LCMAP_API lcmap_status lcmap_config_set(lcmap_config* cfg, const char* key, const char* value, const char* origin);
/* Copies the current value into buf (NUL-terminated) and its length into *needed. */
LCMAP_API lcmap_status lcmap_config_get(const lcmap_config* cfg, const char* key, char* buf, size_t cap,
                                        size_t* needed);
LCMAP_API lcmap_status lcmap_config_validate(const lcmap_config* cfg);
LCMAP_API size_t lcmap_config_key_count(void);
LCMAP_API const char* lcmap_config_key(size_t index);

/* Stage runners. `summary` may be NULL; otherwise it receives a handle that
   must be released with lcmap_summary_destroy. Optional paths may be NULL. */

/* Scenario from `scenario_path`, or from the loaded config file when NULL. */
LCMAP_API lcmap_status lcmap_run_simulate(const lcmap_config* cfg, const char* scenario_path, const char* traj_out,
                                          const char* truth_out, const char* map_out, lcmap_summary** summary);
LCMAP_API lcmap_status lcmap_run_ingest(const lcmap_config* cfg, const char* in, const char* out,
                                        lcmap_summary** summary);
LCMAP_API lcmap_status lcmap_run_detect(const lcmap_config* cfg, const char* in, const char* labeled_out,
                                        const char* events_out, lcmap_summary** summary);
LCMAP_API lcmap_status lcmap_run_mapprep(const lcmap_config* cfg, const char* map_in, const char* map_out,
                                         lcmap_summary** summary);
LCMAP_API lcmap_status lcmap_run_aggregate(const lcmap_config* cfg, const char* labeled_in, const char* map_in,
                                           const char* geojson_out, const char* csv_out, lcmap_summary** summary);
/* feature: "bend" or "slope". */
LCMAP_API lcmap_status lcmap_run_analyze_bins(const lcmap_config* cfg, const char* stats_csv, const char* feature,
                                              const char* out_csv, lcmap_summary** summary);
LCMAP_API lcmap_status lcmap_run_analyze_heatmap(const lcmap_config* cfg, const char* events_in, const char* out_csv,
                                                 const char* out_geojson, lcmap_summary** summary);
LCMAP_API lcmap_status lcmap_run_analyze_proximity(const lcmap_config* cfg, const char* map_in, const char* out_csv,
                                                   lcmap_summary** summary);
LCMAP_API lcmap_status lcmap_run_analyze_exclude(const lcmap_config* cfg, const char* stats_csv, const char* map_in,
                                                 const char* feature, const char* out_csv, lcmap_summary** summary);
/* Like lcmap_run_analyze_exclude, with the excluded link ids listed in a text file. */
LCMAP_API lcmap_status lcmap_run_analyze_exclude_ids(const lcmap_config* cfg, const char* stats_csv,
                                                     const char* ids_file, const char* feature, const char* out_csv,
                                                     lcmap_summary** summary);
LCMAP_API lcmap_status lcmap_run_export(const lcmap_config* cfg, const char* stats_csv, const char* map_in,
                                        const char* geojson_out, lcmap_summary** summary);
LCMAP_API lcmap_status lcmap_run_all(const lcmap_config* cfg, const char* scenario_path, const char* out_dir,
                                     lcmap_summary** summary);

LCMAP_API size_t lcmap_summary_count(const lcmap_summary* s);
LCMAP_API const char* lcmap_summary_key(const lcmap_summary* s, size_t index);
LCMAP_API const char* lcmap_summary_value(const lcmap_summary* s, size_t index);
LCMAP_API void lcmap_summary_destroy(lcmap_summary* s);

/* Converts class-balanced posteriors (LCL, FLW, LCR) to the given priors. */
LCMAP_API lcmap_status lcmap_reweight_posteriors(const double balanced[3], const double priors[3], double out[3]);

/* Bend of a polyline given as n (lon, lat) pairs; *defined is 0 for closed polylines. */
LCMAP_API lcmap_status lcmap_bend(const double* lonlat, size_t n, double* out, int* defined);

#ifdef __cplusplus
}
#endif

#endif
