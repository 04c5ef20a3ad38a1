/* Exercises the shared library through its C header only. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/stat.h>

#include "lcmap/lcmap.h"

static int failures = 0;

#define EXPECT(cond)                                             \
  do {                                                           \
    if (!(cond)) {                                               \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                \
    }                                                            \
  } while (0)

static void path_join(char* out, size_t cap, const char* dir, const char* name) {
  if (snprintf(out, cap, "%s/%s", dir, name) >= (int)cap) {
    fprintf(stderr, "path too long: %s/%s\n", dir, name);
    exit(2);
  }
}

static void test_config(void) {
  lcmap_config* cfg = NULL;
  char buf[64];
  size_t needed = 0;
  EXPECT(lcmap_config_create(&cfg) == LCMAP_OK);
  EXPECT(lcmap_config_key_count() >= 19);
  EXPECT(strcmp(lcmap_config_key(0), "dt") == 0);
  EXPECT(lcmap_config_key(1000) == NULL);

  EXPECT(lcmap_config_get(cfg, "density_min", buf, sizeof buf, &needed) == LCMAP_OK);
  EXPECT(strcmp(buf, "10") == 0);
  EXPECT(needed == 2);
  EXPECT(lcmap_config_set(cfg, "seed", "12345", "--seed") == LCMAP_OK);
  EXPECT(lcmap_config_get(cfg, "seed", buf, 3, &needed) == LCMAP_OK);
  EXPECT(strcmp(buf, "12") == 0); /* truncated to the buffer */
  EXPECT(needed == 5);
  EXPECT(lcmap_config_validate(cfg) == LCMAP_OK);

  EXPECT(lcmap_config_set(cfg, "bogus", "1", NULL) == LCMAP_ERR_CONFIG);
  EXPECT(strstr(lcmap_last_error(), "bogus") != NULL);
  EXPECT(lcmap_config_set(cfg, "jump_min", "9", "flag --jump-min") == LCMAP_OK);
  EXPECT(lcmap_config_validate(cfg) == LCMAP_ERR_CONFIG);
  EXPECT(strstr(lcmap_last_error(), "flag --jump-min") != NULL);
  EXPECT(strstr(lcmap_last_error(), "jump_max") != NULL);

  EXPECT(lcmap_config_load_file(cfg, "/nonexistent/cfg.json") == LCMAP_ERR_IO);
  EXPECT(strstr(lcmap_last_error(), "/nonexistent/cfg.json") != NULL);
  EXPECT(lcmap_config_set(NULL, "seed", "1", NULL) == LCMAP_ERR_INVALID_ARGUMENT);
  EXPECT(lcmap_config_create(NULL) == LCMAP_ERR_INVALID_ARGUMENT);
  lcmap_config_destroy(cfg);
}

static void test_helpers(void) {
  const double balanced[3] = {0.5, 0.4, 0.1};
  const double priors[3] = {0.03, 0.94, 0.03};
  const double bad[3] = {0.9, 0.9, 0.9};
  double out[3];
  EXPECT(lcmap_reweight_posteriors(balanced, priors, out) == LCMAP_OK);
  EXPECT(fabs(out[0] - 0.038071) < 1e-6);
  EXPECT(fabs(out[1] - 0.954315) < 1e-6);
  EXPECT(fabs(out[2] - 0.007614) < 1e-6);
  EXPECT(lcmap_reweight_posteriors(bad, priors, out) == LCMAP_ERR_INVALID_ARGUMENT);

  /* Three points of a right-angle corner: deviation 50/sqrt(2) over 100 m. */
  const double corner[6] = {9.18, 48.78, 9.18 + 50.0 / 73490.0, 48.78 + 50.0 / 111195.0, 9.18 + 100.0 / 73490.0, 48.78};
  double b = 0.0;
  int defined = -1;
  EXPECT(lcmap_bend(corner, 3, &b, &defined) == LCMAP_OK);
  EXPECT(defined == 1);
  EXPECT(b < 0.0); /* bulges left of an eastbound secant: a right turn */
  const double loop[6] = {9.18, 48.78, 9.19, 48.78, 9.18, 48.78};
  EXPECT(lcmap_bend(loop, 3, &b, &defined) == LCMAP_OK);
  EXPECT(defined == 0);
  EXPECT(lcmap_bend(loop, 1, &b, &defined) == LCMAP_ERR_INVALID_ARGUMENT);
  EXPECT(strcmp(lcmap_status_name(LCMAP_ERR_IO), "i/o error") == 0);
  EXPECT(strlen(lcmap_version()) > 0);
}

static void test_runs(const char* dir) {
  char scen[512], out_dir[512], missing[512], bins[512], stats[512];
  lcmap_config* cfg = NULL;
  lcmap_summary* summary = NULL;
  FILE* f;
  size_t i;
  int found = 0;

  mkdir(dir, 0755);
  path_join(scen, sizeof scen, dir, "scenario.json");
  path_join(out_dir, sizeof out_dir, dir, "out");
  path_join(missing, sizeof missing, dir, "does-not-exist.ndjson");
  f = fopen(scen, "w");
  fputs("{\"roads\":[{\"pieces\":[{\"length_m\":1500}]}],\"rates\":{\"lcl_per_km\":0.5,\"lcr_per_km\":0.5},"
        "\"fleet_size\":2,\"trips_per_vehicle\":3,\"trip_duration_s\":40}\n",
        f);
  fclose(f);

  EXPECT(lcmap_config_create(&cfg) == LCMAP_OK);
  EXPECT(lcmap_run_all(cfg, NULL, out_dir, NULL) == LCMAP_ERR_CONFIG); /* no scenario anywhere */
  EXPECT(lcmap_run_all(cfg, scen, out_dir, &summary) == LCMAP_OK);
  EXPECT(summary != NULL);
  for (i = 0; i < lcmap_summary_count(summary); ++i) {
    if (strcmp(lcmap_summary_key(summary, i), "simulate.trips") == 0) {
      EXPECT(strcmp(lcmap_summary_value(summary, i), "6") == 0);
      found = 1;
    }
  }
  EXPECT(found);
  EXPECT(lcmap_summary_key(summary, 100000) == NULL);
  lcmap_summary_destroy(summary);

  path_join(stats, sizeof stats, out_dir, "link_stats.csv");
  path_join(bins, sizeof bins, dir, "bins.csv");
  EXPECT(lcmap_run_analyze_bins(cfg, stats, "slope", bins, NULL) == LCMAP_OK);
  EXPECT(lcmap_run_analyze_bins(cfg, stats, "speed", bins, NULL) == LCMAP_ERR_INVALID_ARGUMENT);
  EXPECT(lcmap_run_analyze_exclude_ids(cfg, stats, NULL, "bend", bins, NULL) == LCMAP_ERR_INVALID_ARGUMENT);
  EXPECT(lcmap_run_analyze_exclude_ids(cfg, stats, missing, "bend", bins, NULL) == LCMAP_ERR_IO);

  summary = (lcmap_summary*)1;
  EXPECT(lcmap_run_ingest(cfg, missing, bins, &summary) == LCMAP_ERR_IO);
  EXPECT(summary == NULL);
  EXPECT(strstr(lcmap_last_error(), "does-not-exist.ndjson") != NULL);
  EXPECT(lcmap_run_ingest(cfg, NULL, bins, NULL) == LCMAP_ERR_INVALID_ARGUMENT);
  lcmap_config_destroy(cfg);
}

int main(int argc, char** argv) {
  const char* dir = argc > 1 ? argv[1] : "capi_work";
  test_config();
  test_helpers();
  test_runs(dir);
  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  puts("capi: all checks passed");
  return 0;
}
