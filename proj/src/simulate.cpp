#include "lcmap/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lcmap/error.hpp"
#include "lcmap/io.hpp"
#include "parallel.hpp"

namespace lcmap::sim {

using nlohmann::json;

namespace {

constexpr double kRampHalfWidthS = 1.5;
constexpr double kNodeSnapM = 50.0;
constexpr double kMaxLaneChangeFraction = 0.5;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::Config, "scenario: " + msg); }

double number(const json& obj, const char* key, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) config_error(std::string("'") + key + "' must be a number");
  return it->get<double>();
}

std::size_t count(const json& obj, const char* key, std::size_t fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    config_error(std::string("'") + key + "' must be a non-negative integer");
  }
  return static_cast<std::size_t>(it->get<long long>());
}

std::string text(const json& obj, const char* key, const std::string& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) config_error(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

RateSpec parse_rates(const json& obj, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  return {number(obj, "lcl_per_km", 0.0), number(obj, "lcr_per_km", 0.0)};
}

RoadPiece parse_piece(const json& obj) {
  if (!obj.is_object()) config_error("road piece must be an object");
  RoadPiece p;
  const auto type = text(obj, "type", "straight");
  if (type == "straight") {
    p.kind = RoadPiece::Kind::Straight;
  } else if (type == "arc") {
    p.kind = RoadPiece::Kind::Arc;
  } else {
    config_error("unknown piece type '" + type + "'");
  }
  p.length_m = number(obj, "length_m", p.length_m);
  p.radius_m = number(obj, "radius_m", 0.0);
  const auto turn = text(obj, "turn", "left");
  if (turn != "left" && turn != "right") config_error("piece turn must be 'left' or 'right'");
  p.left_turn = turn == "left";
  p.slope_pct = number(obj, "slope_pct", 0.0);
  return p;
}

RoadSpec parse_road(const json& obj, std::size_t index) {
  if (!obj.is_object()) config_error("road entry must be an object");
  RoadSpec r;
  r.id = text(obj, "id", "road" + std::to_string(index));
  // Roads without an explicit origin are stacked north so they never overlap.
  r.origin.lat += 0.05 * static_cast<double>(index);
  if (auto o = obj.find("origin"); o != obj.end()) {
    if (!o->is_array() || o->size() != 2 || !(*o)[0].is_number() || !(*o)[1].is_number()) {
      config_error("road origin must be [lon, lat]");
    }
    r.origin = {(*o)[0].get<double>(), (*o)[1].get<double>()};
  }
  r.heading_deg = number(obj, "heading_deg", r.heading_deg);
  r.elevation_m = number(obj, "elevation_m", r.elevation_m);
  r.vertex_spacing_m = number(obj, "vertex_spacing_m", r.vertex_spacing_m);
  const auto dir = parse_travel_direction(text(obj, "direction", "forward"));
  if (!dir) config_error("road direction must be forward, backward or both");
  r.direction = *dir;
  auto pieces = obj.find("pieces");
  if (pieces == obj.end() || !pieces->is_array() || pieces->empty()) config_error("road " + r.id + " has no pieces");
  for (const auto& p : *pieces) {
    const auto piece = parse_piece(p);
    const std::size_t repeat = count(p, "repeat", 1);
    for (std::size_t k = 0; k < repeat; ++k) r.pieces.push_back(piece);
  }
  if (auto nodes = obj.find("nodes"); nodes != obj.end()) {
    if (!nodes->is_array()) config_error("road nodes must be an array");
    for (const auto& n : *nodes) {
      NodeSpec spec;
      spec.id = text(n, "id", r.id + "-n" + std::to_string(r.nodes.size()));
      spec.at_m = number(n, "at_m", 0.0);
      const auto kind = text(n, "kind", "divider");
      if (kind == "divider") {
        spec.kind = InterchangeKind::Divider;
      } else if (kind == "merger") {
        spec.kind = InterchangeKind::Merger;
      } else {
        config_error("node kind must be 'divider' or 'merger'");
      }
      r.nodes.push_back(spec);
    }
  }
  return r;
}

void validate(const ScenarioConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) config_error(std::string(name) + " must be positive");
  };
  auto non_negative = [](double v, const std::string& name) {
    if (!(v >= 0.0) || !std::isfinite(v)) config_error(name + " must be non-negative");
  };
  positive(c.seg_len_m, "seg_len_m");
  positive(c.trip_duration_s, "trip_duration_s");
  positive(c.speed_mps, "speed_mps");
  positive(c.sample_dt, "dt");
  positive(c.lane_width_m, "lane_width_m");
  positive(c.horizon_s, "horizon_s");
  non_negative(c.noise_sigma_m, "noise_sigma_m");
  non_negative(c.min_event_gap_s, "min_event_gap_s");
  if (c.trip_duration_s > kMaxTrajectoryDurationS) {
    config_error("trip_duration_s exceeds the " + io::format_double(kMaxTrajectoryDurationS) + " s ingest limit");
  }
  non_negative(c.rates.lcl_per_km, "rates.lcl_per_km");
  non_negative(c.rates.lcr_per_km, "rates.lcr_per_km");
  for (const auto& [id, r] : c.link_rates) {
    non_negative(r.lcl_per_km, "link_rates." + id + ".lcl_per_km");
    non_negative(r.lcr_per_km, "link_rates." + id + ".lcr_per_km");
  }
  non_negative(c.effects.interchange_boost, "effects.interchange_boost");
  non_negative(c.effects.interchange_radius_m, "effects.interchange_radius_m");
  non_negative(c.effects.bend_dampening, "effects.bend_dampening");
  if (!std::isfinite(c.effects.slope_effect)) config_error("effects.slope_effect must be finite");
  if (c.roads.empty() && !c.map_file) config_error("either roads or map_file is required");
  if (!c.roads.empty() && c.map_file) config_error("roads and map_file are mutually exclusive");
  for (const auto& r : c.roads) {
    positive(r.vertex_spacing_m, "vertex_spacing_m");
    for (const auto& p : r.pieces) {
      positive(p.length_m, "piece length_m");
      if (p.kind == RoadPiece::Kind::Arc) {
        positive(p.radius_m, "arc radius_m");
        if (p.length_m >= 2.0 * geo::kPi * p.radius_m) config_error("arc longer than its full circle");
      }
      if (std::fabs(p.slope_pct) > kMaxAbsSlopePct) config_error("piece slope_pct beyond +-20");
    }
  }
}

// Uniform double in [0, 1) from the top 53 bits; unlike the standard
// distributions this is identical across standard library implementations.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double exponential(std::mt19937_64& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

double normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * geo::kPi * u2);
}

double ramp(double x) { return x < 1.0 ? 1.0 - std::sin(0.5 * geo::kPi * x) : 0.0; }

double sign_of(LaneChangeDirection d) { return d == LaneChangeDirection::Left ? 1.0 : -1.0; }

// Piece of the trip during which rates are constant.
struct RateSpan {
  double t_begin;
  double t_end;
  double left;
  double right;
};

// Probability that the first crossing in (a, b] exists and goes left/right.
std::pair<double, double> first_crossing(std::span<const RateSpan> spans, std::size_t from, double a, double b) {
  double survive = 1.0;
  double pl = 0.0;
  double pr = 0.0;
  for (std::size_t i = from; i < spans.size() && spans[i].t_begin < b; ++i) {
    const double lo = std::max(a, spans[i].t_begin);
    const double hi = std::min(b, spans[i].t_end);
    if (!(hi > lo)) continue;
    const double lambda = spans[i].left + spans[i].right;
    if (lambda <= 0.0) continue;
    const double hit = -std::expm1(-lambda * (hi - lo));
    pl += survive * spans[i].left / lambda * hit;
    pr += survive * spans[i].right / lambda * hit;
    survive *= 1.0 - hit;
  }
  return {pl, pr};
}

}  // namespace

bool is_scenario_key(std::string_view key) {
  static constexpr std::string_view keys[] = {
      "roads",          "map_file",        "rates",        "link_rates",   "effects",
      "fleet_size",     "trips_per_vehicle", "trip_duration_s", "speed_mps", "lane_width_m",
      "noise_sigma_m",  "dt",              "horizon_s",    "seg_len_m",    "min_event_gap_s",
      "seed"};
  return std::find(std::begin(keys), std::end(keys), key) != std::end(keys);
}

ScenarioConfig parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Format, std::string("scenario: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Format, "scenario: top level must be an object");
  if (auto sc = doc.find("scenario"); sc != doc.end()) {
    // Combined pipeline + scenario file: shared keys live at the top level.
    json merged = *sc;
    for (const char* k : {"dt", "horizon_s", "seg_len_m", "min_event_gap_s", "seed"}) {
      if (doc.contains(k) && !merged.contains(k)) merged[k] = doc[k];
    }
    doc = std::move(merged);
    if (!doc.is_object()) throw Error(ErrorKind::Format, "scenario: 'scenario' must be an object");
  }

  ScenarioConfig c;
  if (auto roads = doc.find("roads"); roads != doc.end()) {
    if (!roads->is_array()) config_error("roads must be an array");
    for (std::size_t i = 0; i < roads->size(); ++i) c.roads.push_back(parse_road((*roads)[i], i));
  }
  if (auto mf = doc.find("map_file"); mf != doc.end()) {
    if (!mf->is_string()) config_error("map_file must be a string");
    std::filesystem::path p = mf->get<std::string>();
    c.map_file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (auto r = doc.find("rates"); r != doc.end()) c.rates = parse_rates(*r, "rates");
  if (auto lr = doc.find("link_rates"); lr != doc.end()) {
    if (!lr->is_object()) config_error("link_rates must be an object");
    for (const auto& [id, v] : lr->items()) c.link_rates[id] = parse_rates(v, "link_rates." + id);
  }
  if (auto e = doc.find("effects"); e != doc.end()) {
    if (!e->is_object()) config_error("effects must be an object");
    c.effects.interchange_boost = number(*e, "interchange_boost", c.effects.interchange_boost);
    c.effects.interchange_radius_m = number(*e, "interchange_radius_m", c.effects.interchange_radius_m);
    c.effects.bend_dampening = number(*e, "bend_dampening", c.effects.bend_dampening);
    c.effects.slope_effect = number(*e, "slope_effect", c.effects.slope_effect);
  }
  c.fleet_size = count(doc, "fleet_size", c.fleet_size);
  c.trips_per_vehicle = count(doc, "trips_per_vehicle", c.trips_per_vehicle);
  c.trip_duration_s = number(doc, "trip_duration_s", c.trip_duration_s);
  c.speed_mps = number(doc, "speed_mps", c.speed_mps);
  c.lane_width_m = number(doc, "lane_width_m", c.lane_width_m);
  c.noise_sigma_m = number(doc, "noise_sigma_m", c.noise_sigma_m);
  c.sample_dt = number(doc, "dt", c.sample_dt);
  c.horizon_s = number(doc, "horizon_s", c.horizon_s);
  c.seg_len_m = number(doc, "seg_len_m", c.seg_len_m);
  c.min_event_gap_s = number(doc, "min_event_gap_s", c.min_event_gap_s);
  if (auto s = doc.find("seed"); s != doc.end()) {
    if (!s->is_number_unsigned()) config_error("seed must be a non-negative integer");
    c.seed = s->get<std::uint64_t>();
  }
  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return parse_scenario(io::read_file(path), path.parent_path());
}

std::array<double, 3> expected_proportions(double lambda_left, double lambda_right, double horizon_s) {
  if (!(lambda_left >= 0.0) || !(lambda_right >= 0.0) || !(horizon_s >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "expected_proportions: rates and horizon must be non-negative");
  }
  const double lambda = lambda_left + lambda_right;
  if (lambda == 0.0) return {0.0, 1.0, 0.0};
  const double hit = -std::expm1(-lambda * horizon_s);
  const double pl = lambda_left / lambda * hit;
  const double pr = lambda_right / lambda * hit;
  return {pl, 1.0 - pl - pr, pr};
}

std::array<double, 3> trip_expected_proportions(double lambda_left, double lambda_right, double horizon_s, double dt,
                                                std::size_t samples) {
  if (samples == 0) return {0.0, 1.0, 0.0};
  const double t_last = static_cast<double>(samples - 1) * dt;
  const RateSpan span{0.0, t_last, lambda_left, lambda_right};
  double sl = 0.0;
  double sr = 0.0;
  for (std::size_t j = 0; j < samples; ++j) {
    const double t = static_cast<double>(j) * dt;
    const auto [pl, pr] = first_crossing({&span, 1}, 0, std::max(0.0, t - dt), std::min(t + horizon_s, t_last));
    sl += pl;
    sr += pr;
  }
  const double n = static_cast<double>(samples);
  return {sl / n, 1.0 - (sl + sr) / n, sr / n};
}

std::array<double, 3> LinkTruth::proportions() const {
  if (samples == 0) return {0.0, 1.0, 0.0};
  const double n = static_cast<double>(samples);
  return {expected_lcl / n, expected_flw / n, expected_lcr / n};
}

LinkTruth& LinkTruth::merge(const LinkTruth& o) {
  expected_lcl += o.expected_lcl;
  expected_flw += o.expected_flw;
  expected_lcr += o.expected_lcr;
  samples += o.samples;
  return *this;
}

SourceLink build_road(const RoadSpec& spec, std::vector<InterchangeNode>* nodes) {
  SourceLink src;
  src.id = spec.id;
  src.direction = spec.direction;
  src.road_class = RoadClass::Motorway;
  std::vector<double> elev{spec.elevation_m};
  std::vector<double> cum{0.0};
  src.polyline.push_back(spec.origin);
  double heading = spec.heading_deg;
  for (const auto& p : spec.pieces) {
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(p.length_m / spec.vertex_spacing_m - 1e-9)));
    const double chord = p.length_m / static_cast<double>(steps);
    double turn = 0.0;
    if (p.kind == RoadPiece::Kind::Arc) {
      // Equal chords of a circle of radius R each turn the tangent by 2 asin(c / 2R).
      turn = geo::rad2deg(2.0 * std::asin(std::min(1.0, chord / (2.0 * p.radius_m))));
      if (p.left_turn) turn = -turn;
    }
    for (std::size_t k = 0; k < steps; ++k) {
      const auto next = geo::destination(src.polyline.back(), heading + 0.5 * turn, chord);
      cum.push_back(cum.back() + geo::distance_m(src.polyline.back(), next));
      src.polyline.push_back(next);
      elev.push_back(elev.back() + p.slope_pct / 100.0 * chord);
      heading += turn;
    }
  }
  src.elevation = std::move(elev);

  if (nodes) {
    const double total = cum.back();
    for (const auto& n : spec.nodes) {
      const double s = std::clamp(n.at_m, 0.0, total);
      auto it = std::upper_bound(cum.begin(), cum.end(), s);
      const std::size_t i = it == cum.end() ? cum.size() - 2 : static_cast<std::size_t>(it - cum.begin()) - 1;
      const double len = cum[i + 1] - cum[i];
      const double f = len > 0.0 ? (s - cum[i]) / len : 0.0;
      nodes->push_back({n.id, geo::lerp(src.polyline[i], src.polyline[i + 1], std::clamp(f, 0.0, 1.0)), n.kind});
    }
  }
  return src;
}

FleetSimulator::FleetSimulator(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  build_map();
  build_routes();
  assign_rates();
}

void FleetSimulator::build_map() {
  if (cfg_.map_file) {
    auto data = load_map(*cfg_.map_file);
    sources_ = std::move(data.links);
    nodes_ = std::move(data.nodes);
  } else {
    for (const auto& r : cfg_.roads) sources_.push_back(build_road(r, &nodes_));
  }
  links_ = resegment(sources_, cfg_.seg_len_m);
  if (links_.empty()) config_error("map has no usable links");
}

void FleetSimulator::build_routes() {
  // One route per (source, travel direction), links in travel order.
  std::map<std::pair<std::string, bool>, std::size_t> route_of;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const auto key = std::make_pair(links_[i].source_id, links_[i].reversed);
    auto [it, inserted] = route_of.emplace(key, members.size());
    if (inserted) members.emplace_back();
    members[it->second].push_back(i);
  }
  for (auto& m : members) {
    // Segment numbers follow travel order in both directions.
    std::sort(m.begin(), m.end(), [&](std::size_t a, std::size_t b) { return links_[a].segment < links_[b].segment; });
    Route r;
    r.links = m;
    for (auto li : m) {
      const auto& pl = links_[li].polyline;
      const bool first = r.polyline.empty();
      if (first) {
        r.polyline.push_back(pl.front());
        r.cum.push_back(0.0);
      }
      r.link_start.push_back(r.cum.back());
      for (std::size_t k = 1; k < pl.size(); ++k) {
        r.cum.push_back(r.cum.back() + geo::distance_m(r.polyline.back(), pl[k]));
        r.polyline.push_back(pl[k]);
      }
    }
    r.length_m = r.cum.back();
    total_route_length_ += r.length_m;
    routes_.push_back(std::move(r));
  }
}

void FleetSimulator::assign_rates() {
  rates_.assign(links_.size(), {});
  const double per_km_to_per_s = cfg_.speed_mps / 1000.0;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const auto& l = links_[i];
    const RateSpec* spec = &cfg_.rates;
    if (auto it = cfg_.link_rates.find(l.id); it != cfg_.link_rates.end()) {
      spec = &it->second;
    } else if (auto is = cfg_.link_rates.find(l.source_id); is != cfg_.link_rates.end()) {
      spec = &is->second;
    }
    double mult = 1.0;
    if (l.bend) mult *= std::exp(-cfg_.effects.bend_dampening * std::fabs(*l.bend));
    if (l.slope_pct) mult *= std::exp(cfg_.effects.slope_effect * *l.slope_pct);
    rates_[i] = {spec->lcl_per_km * per_km_to_per_s * mult, spec->lcr_per_km * per_km_to_per_s * mult};
  }

  // Interchange boost: right changes upstream of dividers, left changes
  // downstream of mergers, for links overlapping the radius along the route.
  const double radius = cfg_.effects.interchange_radius_m;
  for (const auto& route : routes_) {
    for (const auto& node : nodes_) {
      const geo::LocalFrame frame(node.pos);
      double best = std::numeric_limits<double>::infinity();
      double at = 0.0;
      for (std::size_t k = 0; k + 1 < route.polyline.size(); ++k) {
        double t = 0.0;
        const double d = geo::point_segment_distance({0.0, 0.0}, frame.project(route.polyline[k]),
                                                     frame.project(route.polyline[k + 1]), &t);
        if (d < best) {
          best = d;
          at = route.cum[k] + t * (route.cum[k + 1] - route.cum[k]);
        }
      }
      if (best > kNodeSnapM) continue;
      for (std::size_t j = 0; j < route.links.size(); ++j) {
        const double a = route.link_start[j];
        const double b = j + 1 < route.links.size() ? route.link_start[j + 1] : route.length_m;
        auto& r = rates_[route.links[j]];
        if (node.kind == InterchangeKind::Divider && b > at - radius && a < at) {
          r.right *= cfg_.effects.interchange_boost;
        } else if (node.kind == InterchangeKind::Merger && b > at && a < at + radius) {
          r.left *= cfg_.effects.interchange_boost;
        }
      }
    }
  }

  for (std::size_t i = 0; i < links_.size(); ++i) {
    const auto p = expected_proportions(i);
    if (p[0] + p[2] > kMaxLaneChangeFraction) {
      config_error("link " + links_[i].id + " has an expected lane-change label fraction of " +
                   io::format_double(p[0] + p[2]) + " (> 0.5); rates are unreachable");
    }
  }
}

std::array<double, 3> FleetSimulator::expected_proportions(std::size_t link) const {
  return sim::expected_proportions(rates_.at(link).left, rates_.at(link).right, cfg_.horizon_s);
}

std::vector<LinkTruth> FleetSimulator::truth_table() const {
  std::vector<LinkTruth> t(links_.size());
  for (std::size_t i = 0; i < links_.size(); ++i) {
    t[i].rates = rates_[i];
    t[i].stationary = expected_proportions(i);
  }
  return t;
}

SimulatedTrip FleetSimulator::generate_trip(std::size_t index, std::vector<LinkTruth>* truth) const {
  if (index >= trip_count()) throw Error(ErrorKind::InvalidArgument, "generate_trip: index out of range");
  if (truth && truth->size() != links_.size()) {
    throw Error(ErrorKind::InvalidArgument, "generate_trip: truth table size does not match the link count");
  }
  const std::size_t vehicle = index / cfg_.trips_per_vehicle;
  const std::size_t trip = index % cfg_.trips_per_vehicle;
  std::mt19937_64 rng(derive_seed(cfg_.seed, {vehicle, trip}));

  // Route weighted by length, then a uniform start offset.
  std::size_t ri = 0;
  {
    double pick = uniform01(rng) * total_route_length_;
    while (ri + 1 < routes_.size() && pick >= routes_[ri].length_m) pick -= routes_[ri++].length_m;
  }
  const Route& route = routes_[ri];
  const double v = cfg_.speed_mps;
  const double dt = cfg_.sample_dt;
  const double trip_len = std::min(route.length_m, v * cfg_.trip_duration_s);
  const double s0 = uniform01(rng) * (route.length_m - trip_len);
  const auto n = static_cast<std::size_t>(std::floor(trip_len / (v * dt) + 1e-9)) + 1;
  const double t_last = static_cast<double>(n - 1) * dt;

  std::vector<RateSpan> spans;
  for (std::size_t j = 0; j < route.links.size(); ++j) {
    const double a = route.link_start[j];
    const double b = j + 1 < route.links.size() ? route.link_start[j + 1] : route.length_m;
    const double ta = std::max(0.0, (a - s0) / v);
    const double tb = j + 1 < route.links.size() ? std::min(t_last, (b - s0) / v) : t_last;
    if (tb <= ta) continue;
    const auto& r = rates_[route.links[j]];
    spans.push_back({ta, tb, r.left, r.right});
  }

  SimulatedTrip out;
  out.trajectory.trip_id = "v" + std::to_string(vehicle) + "-t" + std::to_string(trip);

  struct Crossing {
    double t;
    LaneChangeDirection dir;
  };
  std::vector<Crossing> crossings;
  for (const auto& sp : spans) {
    const double lambda = sp.left + sp.right;
    if (lambda <= 0.0) continue;
    double t = sp.t_begin;
    for (;;) {
      t += exponential(rng, lambda);
      if (t > sp.t_end) break;
      const bool left = uniform01(rng) * lambda < sp.left;
      if (t <= 0.0) continue;
      // Crossings closer than the detector's merge gap cannot be resolved.
      if (!crossings.empty() && t - crossings.back().t < cfg_.min_event_gap_s) continue;
      crossings.push_back({t, left ? LaneChangeDirection::Left : LaneChangeDirection::Right});
    }
  }

  auto position = [&](double s, std::size_t& seg) {
    s = std::clamp(s, 0.0, route.length_m);
    while (seg + 2 < route.cum.size() && route.cum[seg + 1] <= s) ++seg;
    const double len = route.cum[seg + 1] - route.cum[seg];
    const double f = len > 0.0 ? std::clamp((s - route.cum[seg]) / len, 0.0, 1.0) : 0.0;
    return geo::lerp(route.polyline[seg], route.polyline[seg + 1], f);
  };

  {
    std::size_t seg = 0;
    while (seg + 2 < route.cum.size() && route.cum[seg + 1] <= s0) ++seg;
    for (const auto& c : crossings) {
      std::size_t local = seg;
      const auto p = position(s0 + v * c.t, local);
      out.events.push_back({out.trajectory.trip_id, c.t, c.dir, p.lat, p.lon});
    }
  }

  const double w = cfg_.lane_width_m;
  const double sigma = cfg_.noise_sigma_m;
  auto& samples = out.trajectory.samples;
  samples.reserve(n);
  std::size_t seg = 0;
  std::size_t next = 0;  // first crossing with t > current sample
  std::size_t link_pos = 0;
  std::size_t span_pos = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double s = s0 + v * t;
    const auto p = position(s, seg);

    while (next < crossings.size() && crossings[next].t <= t) ++next;
    double u = 0.0;
    if (next > 0) {
      const auto& c = crossings[next - 1];
      const double gap = next < crossings.size() ? crossings[next].t - c.t : 2.0 * kRampHalfWidthS;
      const double h = std::min(kRampHalfWidthS, 0.5 * gap);
      u -= 0.5 * sign_of(c.dir) * ramp((t - c.t) / h);
    }
    if (next < crossings.size()) {
      const auto& c = crossings[next];
      const double gap = next > 0 ? c.t - crossings[next - 1].t : 2.0 * kRampHalfWidthS;
      const double h = std::min(kRampHalfWidthS, 0.5 * gap);
      u += 0.5 * sign_of(c.dir) * ramp((c.t - t) / h);
    }
    RawSample rs;
    rs.t = t;
    rs.lat = p.lat;
    rs.lon = p.lon;
    rs.dist_left = w * (0.5 - u);
    rs.dist_right = w * (-0.5 - u);
    if (sigma > 0.0) {
      rs.dist_left += sigma * normal(rng);
      rs.dist_right += sigma * normal(rng);
    }
    rs.speed = v;
    rs.heading = geo::bearing_deg(route.polyline[seg], route.polyline[seg + 1]);
    samples.push_back(rs);

    if (truth) {
      while (link_pos + 1 < route.links.size() && route.link_start[link_pos + 1] <= s) ++link_pos;
      const double a = std::max(0.0, t - dt);
      while (span_pos + 1 < spans.size() && spans[span_pos].t_end <= a) ++span_pos;
      const auto [pl, pr] = first_crossing(spans, span_pos, a, std::min(t + cfg_.horizon_s, t_last));
      auto& lt = (*truth)[route.links[link_pos]];
      lt.expected_lcl += pl;
      lt.expected_lcr += pr;
      lt.expected_flw += 1.0 - pl - pr;
      ++lt.samples;
    }
  }
  return out;
}

GroundTruth FleetSimulator::collect(std::span<const SimulatedTrip> trips, std::span<const LinkTruth> table) const {
  GroundTruth gt;
  for (const auto& t : trips) gt.events.insert(gt.events.end(), t.events.begin(), t.events.end());
  for (std::size_t i = 0; i < table.size() && i < links_.size(); ++i) {
    if (table[i].samples > 0) gt.links[links_[i].id] = table[i];
  }
  return gt;
}

void write_events(std::ostream& out, std::span<const LaneChangeEvent> events) {
  for (const auto& e : events) {
    out << "{\"trip\":" << json(e.trip_id).dump() << ",\"t_cross\":" << io::format_double(e.t_cross)
        << ",\"dir\":\"" << to_string(e.direction) << "\",\"lat\":" << io::format_double(e.lat)
        << ",\"lon\":" << io::format_double(e.lon) << "}\n";
  }
}

namespace {

LaneChangeEvent event_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Format, "events: entry is not an object");
  LaneChangeEvent e;
  try {
    e.trip_id = j.at("trip").get<std::string>();
    e.t_cross = j.at("t_cross").get<double>();
    const auto dir = parse_direction(j.at("dir").get<std::string>());
    if (!dir) throw Error(ErrorKind::Format, "events: unknown direction");
    e.direction = *dir;
    e.lat = j.value("lat", 0.0);
    e.lon = j.value("lon", 0.0);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::Format, std::string("events: ") + ex.what());
  }
  return e;
}

}  // namespace

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  auto out = io::open_output(path);
  out << "{\"events\":[";
  for (std::size_t i = 0; i < truth.events.size(); ++i) {
    const auto& e = truth.events[i];
    out << (i ? "," : "") << "\n{\"trip\":" << json(e.trip_id).dump() << ",\"t_cross\":" << io::format_double(e.t_cross)
        << ",\"dir\":\"" << to_string(e.direction) << "\",\"lat\":" << io::format_double(e.lat)
        << ",\"lon\":" << io::format_double(e.lon) << "}";
  }
  out << "\n],\"links\":[";
  bool first = true;
  for (const auto& [id, lt] : truth.links) {
    const auto p = lt.proportions();
    out << (first ? "" : ",") << "\n{\"link_id\":" << json(id).dump() << ",\"samples\":" << lt.samples
        << ",\"lambda_left\":" << io::format_double(lt.rates.left)
        << ",\"lambda_right\":" << io::format_double(lt.rates.right) << ",\"expected\":[" << io::format_double(p[0])
        << "," << io::format_double(p[1]) << "," << io::format_double(p[2]) << "],\"stationary\":["
        << io::format_double(lt.stationary[0]) << "," << io::format_double(lt.stationary[1]) << ","
        << io::format_double(lt.stationary[2]) << "]}";
    first = false;
  }
  out << "\n]}\n";
  io::finish_output(out, path);
}

std::vector<LaneChangeEvent> read_events(const std::filesystem::path& path) {
  const auto content = io::read_file(path);
  std::vector<LaneChangeEvent> events;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return events;
  // Ground-truth documents hold an "events" array; otherwise one event per line.
  json doc = json::parse(content, nullptr, false);
  if (!doc.is_discarded() && doc.is_object() && doc.contains("events")) {
    for (const auto& e : doc["events"]) events.push_back(event_from_json(e));
    return events;
  }
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
    }
    events.push_back(event_from_json(j));
  }
  return events;
}

GenerateSummary generate(const ScenarioConfig& cfg, const std::filesystem::path& traj_path,
                         const std::filesystem::path& truth_path, const std::filesystem::path& map_path,
                         unsigned threads) {
  const FleetSimulator sim(cfg);
  auto table = sim.truth_table();
  GroundTruth gt;
  GenerateSummary summary;
  summary.links = sim.links().size();

  auto out = io::open_output(traj_path);
  constexpr std::size_t kBlock = 64;
  const std::size_t total = sim.trip_count();
  std::vector<SimulatedTrip> block;
  std::vector<std::vector<LinkTruth>> partial;
  for (std::size_t start = 0; start < total; start += kBlock) {
    const std::size_t len = std::min(kBlock, total - start);
    block.assign(len, {});
    partial.assign(len, std::vector<LinkTruth>(table.size()));
    detail::parallel_for(len, threads, [&](std::size_t i) { block[i] = sim.generate_trip(start + i, &partial[i]); });
    for (std::size_t i = 0; i < len; ++i) {
      write_trajectory_records(out, block[i].trajectory.trip_id, block[i].trajectory.samples);
      for (std::size_t l = 0; l < table.size(); ++l) table[l].merge(partial[i][l]);
      gt.events.insert(gt.events.end(), block[i].events.begin(), block[i].events.end());
      summary.samples += block[i].trajectory.samples.size();
      ++summary.trips;
    }
  }
  io::finish_output(out, traj_path);
  summary.events = gt.events.size();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].samples > 0) gt.links[sim.links()[i].id] = table[i];
  }
  write_ground_truth(truth_path, gt);
  if (!map_path.empty()) write_source_map(map_path, sim.sources(), sim.nodes());
  return summary;
}

}  // namespace lcmap::sim
