#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "lcmap/error.hpp"
#include "lcmap/mapmodel.hpp"
#include "oracles.hpp"

using namespace lcmap;
using geo::LonLat;

namespace {

const LonLat kOrigin{9.18, 48.78};

SourceLink straight(const std::string& id, double length, double heading = 90.0, double spacing = 10.0) {
  SourceLink s;
  s.id = id;
  for (double d = 0.0; d < length - 1e-9; d += spacing) s.polyline.push_back(geo::destination(kOrigin, heading, d));
  s.polyline.push_back(geo::destination(kOrigin, heading, length));
  return s;
}

}  // namespace

TEST_SUITE("mapmodel") {

TEST_CASE("resegment piece lengths") {
  auto lengths = [](double total) {
    std::vector<double> out;
    const SourceLink src = straight("s", total);
    for (const auto& l : resegment(std::span(&src, 1), 200.0)) out.push_back(std::round(l.length_m * 1e6) / 1e6);
    return out;
  };
  CHECK(lengths(500.0) == std::vector<double>{200.0, 200.0, 100.0});
  CHECK(lengths(400.0) == std::vector<double>{200.0, 200.0});
  CHECK(lengths(190.0) == std::vector<double>{190.0});
  CHECK(lengths(450.0) == std::vector<double>{200.0, 250.0});
}

TEST_CASE("bidirectional sources get reversed twins in travel order") {
  SourceLink src = straight("s", 600.0);
  src.direction = TravelDirection::Both;
  const auto links = resegment(std::span(&src, 1), 200.0);
  REQUIRE(links.size() == 6);
  CHECK(links[0].id == "s:0:F");
  CHECK(links[3].id == "s:0:B");
  CHECK(links[3].reversed);
  // B piece 0 is the last forward piece driven backwards.
  CHECK(links[3].polyline.front() == links[2].polyline.back());
  CHECK(links[3].polyline.back() == links[2].polyline.front());
  CHECK(links[5].polyline.back() == links[0].polyline.front());
}

TEST_CASE("piece endpoints chain and lie on the source") {
  const SourceLink src = straight("s", 1000.0, 33.0, 7.0);
  const auto links = resegment(std::span(&src, 1), 200.0);
  REQUIRE(links.size() == 5);
  for (std::size_t i = 1; i < links.size(); ++i) CHECK(links[i].polyline.front() == links[i - 1].polyline.back());
  CHECK(links.front().polyline.front() == src.polyline.front());
  CHECK(links.back().polyline.back() == src.polyline.back());
}

TEST_CASE("bend matches the sagitta ratio of circular arcs") {
  for (double r : {250.0, 500.0, 1000.0, 2000.0}) {
    const auto pts = oracle::arc(kOrigin, r, 200.0, 1.0, true);
    const auto b = compute_bend(pts);
    REQUIRE(b.has_value());
    CHECK(std::fabs(*b - oracle::sagitta_ratio(r, 200.0)) < 1e-4);
  }
  CHECK(std::fabs(*compute_bend(oracle::arc(kOrigin, 1000.0, 200.0, 1.0, true)) - 0.02498) < 1e-5);
}

TEST_CASE("semicircle bend is one over pi") {
  const double r = 100.0;
  const auto pts = oracle::arc(kOrigin, r, oracle::kPi * r, oracle::kPi * r / 2000.0, true);
  CHECK(std::fabs(*compute_bend(pts) - 1.0 / oracle::kPi) < 1e-6);
}

TEST_CASE("bend sign follows the turn and flips on reversal") {
  const auto left = oracle::arc(kOrigin, 500.0, 200.0, 1.0, true);
  const auto right = oracle::arc(kOrigin, 500.0, 200.0, 1.0, false);
  CHECK(*compute_bend(left) > 0.0);
  CHECK(*compute_bend(right) < 0.0);
  std::vector<LonLat> rev(left.rbegin(), left.rend());
  CHECK(*compute_bend(rev) == -*compute_bend(left));
}

TEST_CASE("closed polyline has no bend") {
  const double r = 50.0;
  auto pts = oracle::arc(kOrigin, r, 2 * oracle::kPi * r, 1.0, true);
  pts.back() = pts.front();
  CHECK_FALSE(compute_bend(pts).has_value());
  // Great circles are straight; a parallel of latitude is not.
  std::vector<LonLat> line;
  for (int i = 0; i <= 200; ++i) line.push_back(oracle::sphere_destination(kOrigin, 90.0, i));
  CHECK(std::fabs(*compute_bend(line)) < 1e-9);
  const auto parallel = straight("s", 200.0);
  const double lat = kOrigin.lat * oracle::kPi / 180.0;
  CHECK(*compute_bend(parallel.polyline) == doctest::Approx(200.0 * std::tan(lat) / (8.0 * oracle::kR)).epsilon(1e-3));
}

TEST_CASE("slope from elevations") {
  SourceLink src = straight("s", 400.0, 90.0, 100.0);
  src.elevation = std::vector<double>{300, 305, 310, 315, 320};
  const auto links = resegment(std::span(&src, 1), 200.0);
  REQUIRE(links.size() == 2);
  CHECK(*links[0].slope_pct == doctest::Approx(5.0).epsilon(1e-6));
  src.direction = TravelDirection::Backward;
  const auto back = resegment(std::span(&src, 1), 200.0);
  CHECK(*back[0].slope_pct == doctest::Approx(-5.0).epsilon(1e-6));
  src.elevation = std::vector<double>{300, 330, 360, 390, 420};  // 30 %
  CHECK_FALSE(resegment(std::span(&src, 1), 200.0)[0].slope_pct.has_value());
  src.elevation.reset();
  CHECK_FALSE(resegment(std::span(&src, 1), 200.0)[0].slope_pct.has_value());
}

TEST_CASE("map parsing skips bad links") {
  const auto m = parse_map(R"({"links":[
    {"id":"a","points":[[9.18,48.78,300],[9.19,48.78,301]],"dir":"both","speed_limit":120},
    {"id":"b","points":[[9.18,48.78]]},
    {"id":"c","points":[[9.18,48.78],[9.19,99]]},
    {"id":"d","points":[[9.18,48.78],[9.19,48.78]],"dir":"sideways"},
    {"id":7,"points":[[9.18,48.78],[9.19,48.78,5]]}],
    "nodes":[{"id":"n","lon":9.185,"lat":48.78,"kind":"divider"},{"id":"x","kind":"roundabout","lon":0,"lat":0}]})");
  REQUIRE(m.links.size() == 2);
  CHECK(m.links[0].direction == TravelDirection::Both);
  CHECK(m.links[0].elevation.has_value());
  CHECK(m.links[0].speed_limit_kmh == 120.0);
  CHECK(m.links[1].id == "7");
  CHECK_FALSE(m.links[1].elevation.has_value());
  CHECK(m.report.links_skipped == 3);
  CHECK(m.nodes.size() == 1);
  CHECK(m.report.nodes_skipped == 1);
  CHECK_THROWS_AS(parse_map("[1,2]"), Error);
  CHECK_THROWS_AS(parse_map("{\"nodes\":[]}"), Error);
}

TEST_CASE("resegmented map round trip") {
  SourceLink src = straight("s", 500.0);
  src.direction = TravelDirection::Both;
  src.elevation = std::vector<double>(src.polyline.size(), 300.0);
  ResegmentedMap m;
  m.links = resegment(std::span(&src, 1), 200.0);
  m.nodes.push_back({"n1", kOrigin, InterchangeKind::Merger});
  const auto path = std::filesystem::temp_directory_path() / "lcmap_unit_links.json";
  write_resegmented_map(path, m);
  const auto back = load_resegmented_map(path);
  std::filesystem::remove(path);
  REQUIRE(back.links.size() == m.links.size());
  for (std::size_t i = 0; i < m.links.size(); ++i) {
    CHECK(back.links[i].id == m.links[i].id);
    CHECK(back.links[i].polyline == m.links[i].polyline);
    CHECK(back.links[i].bend == m.links[i].bend);
    CHECK(back.links[i].length_m == m.links[i].length_m);
    CHECK(back.links[i].slope_pct == m.links[i].slope_pct);
  }
  CHECK(back.nodes.at(0).kind == InterchangeKind::Merger);
}

TEST_CASE("matching agrees with a brute-force scan") {
  std::vector<SourceLink> srcs;
  for (int i = 0; i < 4; ++i) {
    SourceLink s = straight("r" + std::to_string(i), 1000.0, 90.0 + 30.0 * i, 20.0);
    s.direction = TravelDirection::Both;
    srcs.push_back(s);
  }
  const auto links = resegment(srcs, 200.0);
  const MatchParams mp{25.0, 45.0};
  const LinkIndex index(links, mp);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> off(-0.012, 0.012), hd(0.0, 360.0);
  int matched = 0;
  for (int q = 0; q < 3000; ++q) {
    const LonLat p{kOrigin.lon + off(rng), kOrigin.lat + off(rng) * 0.6};
    const double h = hd(rng);
    const auto got = index.match(p, h);
    const auto want = oracle::brute_match(links, p, h, mp.radius_m, mp.heading_tol_deg);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(got->link == *want);
      ++matched;
    }
  }
  CHECK(matched > 50);
}

TEST_CASE("heading decides between twins") {
  SourceLink s = straight("s", 400.0);
  s.direction = TravelDirection::Both;
  const auto links = resegment(std::span(&s, 1), 200.0);
  const LinkIndex index(links);
  const LonLat p = geo::destination(kOrigin, 90.0, 100.0);
  CHECK(map_match(p, 90.0, index) == "s:0:F");
  CHECK(map_match(p, 270.0, index) == "s:1:B");
  CHECK_FALSE(map_match(p, 0.0, index).has_value());
  CHECK_FALSE(map_match(geo::destination(p, 0.0, 30.0), 90.0, index).has_value());
}

}  // TEST_SUITE
