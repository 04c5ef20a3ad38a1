#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lcmap/detect.hpp"
#include "lcmap/error.hpp"
#include "oracles.hpp"

using namespace lcmap;

namespace {

// Marking distances seen by a camera while the vehicle center follows u(t)
// across 3.5 m lanes; the tracked markings switch when a marking is crossed.
UniformTrajectory lateral(const std::function<double(double)>& u, double duration, double dt = 0.05) {
  UniformTrajectory tr;
  tr.trip_id = "syn";
  tr.dt = dt;
  const double w = 3.5;
  for (std::size_t k = 0; k * dt <= duration + 1e-9; ++k) {
    RawSample s;
    s.t = static_cast<double>(k) * dt;
    const double x = u(s.t);
    const double local = x - w * std::floor((x + w / 2) / w);
    s.dist_left = w / 2 - local;
    s.dist_right = -w / 2 - local;
    s.lat = 48.78;
    s.lon = 9.18 + 1e-5 * k;
    tr.samples.push_back(s);
  }
  return tr;
}

// Smooth lateral move of `dy` meters centered at t_mid, taking 4 s.
double move(double t, double t_mid, double dy) {
  const double x = std::clamp((t - t_mid) / 4.0 + 0.5, 0.0, 1.0);
  return dy * (0.5 - 0.5 * std::cos(oracle::kPi * x));
}

}  // namespace

TEST_SUITE("detect") {

TEST_CASE("left and right crossings are found at the first sample past the marking") {
  auto tr = lateral([](double t) { return move(t, 10.01, 3.5) + move(t, 20.01, -3.5); }, 30.0);
  const auto ev = detect_lane_changes(tr);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].direction == LaneChangeDirection::Left);
  CHECK(ev[1].direction == LaneChangeDirection::Right);
  // The markings are crossed just after t_mid, between grid points.
  CHECK(ev[0].t_cross == doctest::Approx(10.05));
  CHECK(ev[1].t_cross == doctest::Approx(20.05));
  CHECK(ev[0].trip_id == "syn");
  CHECK(ev[0].lon == tr.samples[201].lon);
}

TEST_CASE("touching the marking without crossing is not an event") {
  auto tr = lateral([](double t) { return 1.74 * std::exp(-(t - 5.0) * (t - 5.0)); }, 10.0);
  CHECK(detect_lane_changes(tr).empty());
}

TEST_CASE("zero crossing without re-assignment is rejected") {
  UniformTrajectory tr;
  tr.trip_id = "z";
  for (int k = 0; k < 100; ++k) {
    RawSample s;
    s.t = k * 0.05;
    s.dist_left = 1.0 - k * 0.03;  // drifts to -2 and never jumps
    s.dist_right = -2.5 - k * 0.03;
    tr.samples.push_back(s);
  }
  CHECK(detect_lane_changes(tr).empty());
}

TEST_CASE("jump outside the window is rejected") {
  UniformTrajectory tr;
  tr.trip_id = "j";
  for (int k = 0; k < 40; ++k) {
    RawSample s;
    s.t = k * 0.05;
    s.dist_left = k < 20 ? 1.0 : 7.0;  // +6 m exceeds jump_max
    s.dist_right = -2.5;
    tr.samples.push_back(s);
  }
  CHECK(detect_lane_changes(tr).empty());
}

TEST_CASE("events closer than the minimum gap keep the first") {
  // Left change at 10 s, then an abrupt return crossing at 10.6 s.
  auto tr = lateral([](double t) { return move(t, 10.0, 3.5) - 3.5 * std::clamp((t - 10.5) / 0.2, 0.0, 1.0); },
                    15.0);
  const auto all = detect_lane_changes(tr, {2.0, 5.5, 1.0, 0.0});
  REQUIRE(all.size() == 2);
  const auto merged = detect_lane_changes(tr, {2.0, 5.5, 1.0, 1.0});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].t_cross == all[0].t_cross);
}

TEST_CASE("invalid parameters throw") {
  auto tr = lateral([](double) { return 0.0; }, 1.0);
  CHECK_THROWS_AS(detect_lane_changes(tr, {6.0, 5.5, 1.0, 1.0}), Error);
}

TEST_CASE("horizon boundary is inclusive") {
  auto tr = lateral([](double) { return 0.0; }, 20.0);
  const std::vector<LaneChangeEvent> ev{{"syn", 12.0, LaneChangeDirection::Right, 0, 0}};
  const auto lt = label_samples(tr, ev, 5.0);
  CHECK(lt.labels[140] == ManeuverLabel::LCR);  // t = 7.00
  CHECK(lt.labels[139] == ManeuverLabel::FLW);  // t = 6.95
  CHECK(lt.labels[240] == ManeuverLabel::LCR);  // the crossing sample itself
  CHECK(lt.labels[241] == ManeuverLabel::FLW);
  CHECK(lt.crossing_sample[0] == 240);
  CHECK(lt.event_ref[200].value() == 0);
}

TEST_CASE("labels agree with the brute-force rule") {
  std::mt19937_64 rng(11);
  auto tr = lateral([](double) { return 0.0; }, 60.0);
  std::vector<double> times;
  for (const auto& s : tr.samples) times.push_back(s.t);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> count(0, 8);
    std::uniform_int_distribution<int> idx(0, static_cast<int>(times.size()) - 1);
    std::vector<LaneChangeEvent> ev;
    std::vector<oracle::Ev> ref;
    const int n = count(rng);
    std::vector<int> at;
    for (int i = 0; i < n; ++i) at.push_back(idx(rng));
    std::sort(at.begin(), at.end());
    for (int i : at) {
      const auto d = rng() % 2 ? LaneChangeDirection::Left : LaneChangeDirection::Right;
      ev.push_back({"syn", times[i], d, 0, 0});
      ref.push_back({times[i], d});
    }
    const auto lt = label_samples(tr, ev, 5.0);
    CHECK(lt.labels == oracle::labels(times, ref, 5.0));
  }
}

TEST_CASE("label contract violations") {
  auto tr = lateral([](double) { return 0.0; }, 5.0);
  const std::vector<LaneChangeEvent> outside{{"syn", 9.0, LaneChangeDirection::Left, 0, 0}};
  CHECK_THROWS_AS(label_samples(tr, outside), Error);
  const std::vector<LaneChangeEvent> unsorted{{"syn", 3.0, LaneChangeDirection::Left, 0, 0},
                                              {"syn", 1.0, LaneChangeDirection::Left, 0, 0}};
  CHECK_THROWS_AS(label_samples(tr, unsorted), Error);
}

TEST_CASE("names round trip") {
  for (auto l : {ManeuverLabel::LCL, ManeuverLabel::FLW, ManeuverLabel::LCR}) CHECK(parse_label(to_string(l)) == l);
  for (auto d : {LaneChangeDirection::Left, LaneChangeDirection::Right}) CHECK(parse_direction(to_string(d)) == d);
  CHECK_FALSE(parse_label("lcl").has_value());
}

}  // TEST_SUITE
