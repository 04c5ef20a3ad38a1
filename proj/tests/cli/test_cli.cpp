// Drives the lcmap executable as a user would and checks exit codes and output.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void expect(bool ok, const std::string& what) {
  if (!ok) {
    std::cerr << "FAILED: " << what << '\n';
    ++failures;
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run(const fs::path& work, const std::string& args, const std::string& env = "") {
  const auto out = work / "stdout.txt";
  const auto err = work / "stderr.txt";
  const std::string cmd = env + " \"" LCMAP_CLI_PATH "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = fs::absolute(argc > 1 ? argv[1] : "cli_work");
  fs::remove_all(work);
  fs::create_directories(work);
  const auto cfg = work / "config.json";
  std::ofstream(cfg) << R"({"seed": 7, "density_min": 5,
    "roads": [{"pieces": [{"length_m": 1200}, {"type": "arc", "radius_m": 900, "length_m": 400}],
               "direction": "both", "nodes": [{"at_m": 900, "kind": "divider"}]}],
    "rates": {"lcl_per_km": 0.5, "lcr_per_km": 0.5}, "fleet_size": 3, "trips_per_vehicle": 4,
    "trip_duration_s": 40})";
  const std::string c = "--config \"" + cfg.string() + "\" ";

  auto r = run(work, "frobnicate");
  expect(r.code == 2, "unknown subcommand exits 2");
  expect(contains(r.err + r.out, "Usage") || contains(r.err + r.out, "usage"), "unknown subcommand prints usage");

  r = run(work, "");
  expect(r.code == 2, "missing subcommand exits 2");

  r = run(work, "--help");
  expect(r.code == 0, "--help exits 0");
  expect(contains(r.out, "simulate") && contains(r.out, "aggregate"), "help lists subcommands");

  r = run(work, "ingest --in \"" + (work / "nope.ndjson").string() + "\" --out x.ndjson");
  expect(r.code == 1, "missing input exits 1");
  expect(contains(r.err, "nope.ndjson"), "missing input names the path");

  r = run(work, "--threads many all --out-dir \"" + (work / "bad").string() + "\" " + c);
  expect(r.code == 2, "bad flag value exits 2");
  expect(contains(r.err, "threads"), "bad flag value names the key");

  r = run(work, c + "--jump-min 7 all --out-dir \"" + (work / "bad").string() + "\"");
  expect(r.code == 2, "config conflict exits 2");
  expect(contains(r.err, "flag --jump-min") && contains(r.err, "jump_max"), "conflict names both sources");

  const auto all_dir = work / "all";
  r = run(work, c + "all --out-dir \"" + all_dir.string() + "\"");
  expect(r.code == 0, "all exits 0: " + r.err);
  expect(contains(r.out, "simulate.trips: 12"), "all prints its summary");
  expect(fs::exists(all_dir / "probability_map.geojson"), "all writes the probability map");

  // Environment beats the file, flags beat the environment.
  r = run(work, c + "simulate --out-traj \"" + (work / "e.ndjson").string() + "\" --out-truth \"" +
                    (work / "e.json").string() + "\"",
          "LCMAP_SEED=99");
  expect(r.code == 0, "simulate with env seed");
  r = run(work, c + "--seed 99 simulate --out-traj \"" + (work / "f.ndjson").string() + "\" --out-truth \"" +
                    (work / "f.json").string() + "\"",
          "LCMAP_SEED=5");
  expect(r.code == 0, "simulate with flag seed");
  expect(slurp(work / "e.ndjson") == slurp(work / "f.ndjson"), "flag and env seeds give the same trajectories");
  expect(slurp(work / "e.ndjson") != slurp(all_dir / "trajectories.ndjson"), "seed 99 differs from the file seed");

  // The stage chain reproduces the all outputs.
  const auto d = work / "stages";
  fs::create_directories(d);
  auto q = [&](const char* n) { return "\"" + (d / n).string() + "\""; };
  const std::string steps[] = {
      c + "simulate --out-traj " + q("t.ndjson") + " --out-truth " + q("truth.json") + " --out-map " + q("map.json"),
      c + "ingest --in " + q("t.ndjson") + " --out " + q("r.ndjson"),
      c + "detect --in " + q("r.ndjson") + " --out " + q("l.ndjson") + " --out-events " + q("ev.ndjson"),
      c + "mapprep --in " + q("map.json") + " --out " + q("links.json"),
      c + "aggregate --labeled " + q("l.ndjson") + " --map " + q("links.json") + " --out-geojson " + q("agg.geojson") +
          " --out-csv " + q("stats.csv"),
      c + "analyze bins --stats " + q("stats.csv") + " --feature bend --out " + q("bins.csv"),
      c + "analyze heatmap --events " + q("ev.ndjson") + " --out-csv " + q("heat.csv"),
      c + "analyze proximity --map " + q("links.json") + " --out " + q("prox.csv"),
      c + "analyze exclude --stats " + q("stats.csv") + " --map " + q("links.json") + " --feature slope --out " +
          q("excl.csv"),
      c + "export --stats " + q("stats.csv") + " --map " + q("links.json") + " --out " + q("pm.geojson"),
  };
  for (const auto& s : steps) {
    r = run(work, s);
    expect(r.code == 0, "stage exits 0: " + s + "\n" + r.err);
  }
  expect(slurp(d / "stats.csv") == slurp(all_dir / "link_stats.csv"), "stage chain link stats match all");
  expect(slurp(d / "bins.csv") == slurp(all_dir / "bins_bend.csv"), "stage chain bins match all");
  expect(slurp(d / "heat.csv") == slurp(all_dir / "heatmap.csv"), "stage chain heatmap matches all");
  expect(slurp(d / "prox.csv") == slurp(all_dir / "proximity.csv"), "stage chain proximity matches all");
  expect(slurp(d / "excl.csv") == slurp(all_dir / "exclusion_slope.csv"), "stage chain exclusion matches all");
  expect(slurp(d / "pm.geojson") == slurp(all_dir / "probability_map.geojson"), "stage chain map matches all");

  r = run(work, c + "analyze bins --stats " + q("stats.csv") + " --feature speed --out " + q("x.csv"));
  expect(r.code == 2, "invalid feature exits 2");

  // Alternate spellings.
  r = run(work, c + "analyze --stats " + q("stats.csv") + " --feature bend --bins auto --out " + q("bins2.csv"));
  expect(r.code == 0 && slurp(d / "bins2.csv") == slurp(d / "bins.csv"), "bare analyze with auto bins equals analyze bins");
  r = run(work, c + "analyze --stats " + q("stats.csv") + " --feature bend --bins=-0.02,0,0.02 --out " + q("bins3.csv"));
  expect(r.code == 0, "explicit bin edges accepted");
  {
    std::ifstream in(d / "bins3.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    expect(rows == 3, "two bins plus a header");
  }
  r = run(work, c + "analyze --stats " + q("stats.csv") + " --feature bend --bins 0.1,0 --out " + q("bins4.csv"));
  expect(r.code == 2 && contains(r.err, "flag --bins"), "bad bin edges name the flag");
  r = run(work, c + "mapprep --map " + q("map.json") + " --seg-len 200 --out " + q("links2.json"));
  expect(r.code == 0 && slurp(d / "links2.json") == slurp(d / "links.json"), "mapprep --map/--seg-len spelling");
  r = run(work, c + "--horizon 4 detect --in " + q("r.ndjson") + " --out " + q("l4.ndjson"));
  expect(r.code == 0, "--horizon accepted");
  r = run(work, c + "--horizon-s 4 detect --in " + q("r.ndjson") + " --out " + q("l4b.ndjson"));
  expect(slurp(d / "l4.ndjson") == slurp(d / "l4b.ndjson") && slurp(d / "l4.ndjson") != slurp(d / "l.ndjson"),
         "--horizon is --horizon-s");
  {
    // Excluding exactly the proximity-tagged links by id reproduces the map-based run.
    std::ifstream in(d / "prox.csv");
    std::ofstream ids(d / "ids.txt");
    ids << "# links near interchanges\n";
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto a = line.find(',');
      const auto b = line.find(',', a + 1);
      if (line.substr(a + 1, b - a - 1) != "plain") ids << line.substr(0, a) << '\n';
    }
  }
  r = run(work, c + "analyze exclude --stats " + q("stats.csv") + " --ids " + q("ids.txt") + " --feature slope --out " +
                    q("excl2.csv"));
  expect(r.code == 0 && slurp(d / "excl2.csv") == slurp(d / "excl.csv"), "exclude --ids matches exclude --map");
  r = run(work, c + "analyze exclude --stats " + q("stats.csv") + " --feature slope --out " + q("excl3.csv"));
  expect(r.code == 2, "exclude needs --map or --ids");

  std::ofstream(work / "garbage.ndjson") << "not json\n";
  r = run(work, "ingest --in \"" + (work / "garbage.ndjson").string() + "\" --out " + q("g.ndjson"));
  expect(r.code == 1, "unparsable input exits 1");
  expect(contains(r.err, "format error"), "unparsable input reports a format error");

  if (failures) {
    std::cerr << failures << " CLI check(s) failed\n";
    return 1;
  }
  std::cout << "cli: all checks passed\n";
  return 0;
}
