#include "lcmap/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "lcmap/error.hpp"
#include "lcmap/io.hpp"

namespace lcmap {

using nlohmann::json;

LinkCounter& LinkCounter::merge(const LinkCounter& o) {
  n_lcl += o.n_lcl;
  n_flw += o.n_flw;
  n_lcr += o.n_lcr;
  n_events_left += o.n_events_left;
  n_events_right += o.n_events_right;
  meters = std::max(meters, o.meters);
  return *this;
}

void merge_into(CounterMap& dst, const CounterMap& src) {
  for (const auto& [id, c] : src) dst[id].merge(c);
}

namespace {

void count(LinkCounter& c, ManeuverLabel label, std::optional<LaneChangeDirection> crossing) {
  switch (label) {
    case ManeuverLabel::LCL:
      ++c.n_lcl;
      break;
    case ManeuverLabel::FLW:
      ++c.n_flw;
      break;
    case ManeuverLabel::LCR:
      ++c.n_lcr;
      break;
  }
  if (crossing) {
    if (*crossing == LaneChangeDirection::Left) {
      ++c.n_events_left;
    } else {
      ++c.n_events_right;
    }
  }
}

}  // namespace

Accumulation accumulate(std::span<const AssignedSample> samples) {
  Accumulation acc;
  for (const auto& s : samples) {
    if (!s.link_id) {
      ++acc.unmatched;
      continue;
    }
    ++acc.matched;
    auto& c = acc.counters[*s.link_id];
    c.meters = std::max(c.meters, s.link_length_m);
    count(c, s.label, s.crossing);
  }
  return acc;
}

LinkAccumulator::LinkAccumulator(std::span<const Link> links) : links_(links), counts_(links.size()) {
  for (std::size_t i = 0; i < links.size(); ++i) counts_[i].meters = links[i].length_m;
}

void LinkAccumulator::add(std::optional<std::size_t> link, ManeuverLabel label,
                          std::optional<LaneChangeDirection> crossing) {
  if (!link) {
    ++unmatched_;
    return;
  }
  ++matched_;
  count(counts_.at(*link), label, crossing);
}

void LinkAccumulator::merge(const LinkAccumulator& other) {
  if (other.counts_.size() != counts_.size()) {
    throw Error(ErrorKind::Contract, "accumulator merge across different link sets");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i].merge(other.counts_[i]);
  matched_ += other.matched_;
  unmatched_ += other.unmatched_;
}

CounterMap LinkAccumulator::counters() const {
  CounterMap out;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const auto& c = counts_[i];
    if (c.total() == 0 && c.n_events_left == 0 && c.n_events_right == 0) continue;
    out[links_[i].id].merge(c);
  }
  return out;
}

ProbabilityMap finalize(const CounterMap& counters, double density_min, double horizon_s, double seg_len_m) {
  if (!(density_min >= 0.0)) throw Error(ErrorKind::InvalidArgument, "finalize: density_min must be >= 0");
  ProbabilityMap pm;
  pm.meta.horizon_s = horizon_s;
  pm.meta.seg_len_m = seg_len_m;
  pm.meta.density_min = density_min;
  for (const auto& [id, c] : counters) {
    pm.meta.total_lcl += c.n_lcl;
    pm.meta.total_flw += c.n_flw;
    pm.meta.total_lcr += c.n_lcr;
    ++pm.meta.links_seen;

    LinkProbability p;
    p.link_id = id;
    const auto total = c.total();
    p.density = c.meters > 0.0 ? static_cast<double>(total) / c.meters : 0.0;
    if (total > 0) {
      const double n = static_cast<double>(total);
      p.p_lcl = static_cast<double>(c.n_lcl) / n;
      p.p_lcr = static_cast<double>(c.n_lcr) / n;
      p.p_flw = static_cast<double>(c.n_flw) / n;
    }
    p.included = total > 0 && c.meters > 0.0 && p.density >= density_min;
    if (p.included) {
      pm.links.emplace(id, std::move(p));
    } else {
      pm.excluded.push_back(std::move(p));
    }
  }
  pm.meta.links_included = pm.links.size();
  return pm;
}

std::array<double, 3> reweight_posteriors(const std::array<double, 3>& balanced, const std::array<double, 3>& priors) {
  auto check = [](const std::array<double, 3>& v, const char* what) {
    double sum = 0.0;
    for (double x : v) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw Error(ErrorKind::InvalidArgument, std::string("reweight: negative or non-finite ") + what);
      }
      sum += x;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidArgument, std::string("reweight: ") + what + " must sum to 1");
    }
  };
  check(balanced, "posterior");
  check(priors, "prior");
  constexpr double kBalancedPrior = 1.0 / 3.0;
  std::array<double, 3> out{};
  double norm = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    out[c] = balanced[c] * priors[c] / kBalancedPrior;
    norm += out[c];
  }
  if (!(norm > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "reweight: posterior and prior have disjoint support");
  }
  for (auto& x : out) x /= norm;
  return out;
}

std::array<double, 3> reweight_posteriors(const std::array<double, 3>& balanced, const GlobalPriors& priors) {
  return reweight_posteriors(balanced, priors.as_array());
}

std::array<double, 3> reweight_posteriors(const std::array<double, 3>& balanced, const LinkProbability& local) {
  return reweight_posteriors(balanced, std::array<double, 3>{local.p_lcl, local.p_flw, local.p_lcr});
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<const LinkProbability*> export_order(const ProbabilityMap& pm) {
  std::vector<const LinkProbability*> order;
  for (const auto& [id, p] : pm.links) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const LinkProbability* a, const LinkProbability* b) {
    if (a->p_flw != b->p_flw) return a->p_flw > b->p_flw;
    return a->link_id < b->link_id;
  });
  return order;
}

}  // namespace

std::string probability_map_geojson(const ProbabilityMap& pm, std::span<const Link> links) {
  std::unordered_map<std::string, const Link*> by_id;
  for (const auto& l : links) by_id.emplace(l.id, &l);
  json fc{{"type", "FeatureCollection"}, {"features", json::array()}};
  for (const auto* p : export_order(pm)) {
    json geometry = nullptr;
    std::optional<double> bend, slope;
    if (auto it = by_id.find(p->link_id); it != by_id.end()) {
      json coords = json::array();
      for (const auto& pt : it->second->polyline) coords.push_back(json::array({pt.lon, pt.lat}));
      geometry = json{{"type", "LineString"}, {"coordinates", std::move(coords)}};
      bend = it->second->bend;
      slope = it->second->slope_pct;
    }
    json props{{"link_id", p->link_id}, {"p_lcl", p->p_lcl},          {"p_flw", p->p_flw},
               {"p_lcr", p->p_lcr},     {"bend", optional_number(bend)}, {"slope_pct", optional_number(slope)},
               {"density", p->density}};
    fc["features"].push_back(json{{"type", "Feature"}, {"geometry", std::move(geometry)}, {"properties", props}});
  }
  return fc.dump();
}

void export_probability_map(const std::filesystem::path& path, const ProbabilityMap& pm, std::span<const Link> links) {
  auto out = io::open_output(path);
  out << probability_map_geojson(pm, links) << '\n';
  io::finish_output(out, path);
}

std::vector<LinkProbability> import_probability_map(const std::filesystem::path& path) {
  json doc = json::parse(io::read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || doc.value("type", "") != "FeatureCollection") {
    throw Error(ErrorKind::Format, "not a GeoJSON FeatureCollection: " + path.string());
  }
  std::vector<LinkProbability> out;
  try {
    for (const auto& f : doc.at("features")) {
      const auto& pr = f.at("properties");
      LinkProbability p;
      p.link_id = pr.at("link_id").get<std::string>();
      p.p_lcl = pr.at("p_lcl").get<double>();
      p.p_flw = pr.at("p_flw").get<double>();
      p.p_lcr = pr.at("p_lcr").get<double>();
      p.density = pr.at("density").get<double>();
      p.included = true;
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, "malformed probability map " + path.string() + ": " + e.what());
  }
  return out;
}

std::vector<LinkStatsRow> link_stats_rows(const CounterMap& counters, const ProbabilityMap& pm,
                                          std::span<const Link> links) {
  std::unordered_map<std::string, const Link*> by_id;
  for (const auto& l : links) by_id.emplace(l.id, &l);
  std::unordered_map<std::string, const LinkProbability*> excluded;
  for (const auto& p : pm.excluded) excluded.emplace(p.link_id, &p);

  std::vector<LinkStatsRow> rows;
  for (const auto& [id, c] : counters) {
    LinkStatsRow r;
    r.link_id = id;
    r.n_lcl = c.n_lcl;
    r.n_flw = c.n_flw;
    r.n_lcr = c.n_lcr;
    const LinkProbability* p = nullptr;
    if (auto it = pm.links.find(id); it != pm.links.end()) {
      p = &it->second;
    } else if (auto ex = excluded.find(id); ex != excluded.end()) {
      p = ex->second;
    }
    if (p) {
      r.density = p->density;
      r.included = p->included;
      if (c.total() > 0) {
        r.p_lcl = p->p_lcl;
        r.p_flw = p->p_flw;
        r.p_lcr = p->p_lcr;
      }
    }
    if (auto it = by_id.find(id); it != by_id.end()) {
      r.bend = it->second->bend;
      r.slope_pct = it->second->slope_pct;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

constexpr const char* kStatsHeader = "link_id,n_lcl,n_flw,n_lcr,density,p_lcl,p_flw,p_lcr,bend,slope_pct,included";

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

void write_link_stats_csv(const std::filesystem::path& path, std::span<const LinkStatsRow> rows) {
  auto out = io::open_output(path);
  out << kStatsHeader << '\n';
  for (const auto& r : rows) {
    out << csv_escape(r.link_id) << ',' << r.n_lcl << ',' << r.n_flw << ',' << r.n_lcr << ','
        << io::format_double(r.density) << ',' << io::format_optional(r.p_lcl) << ',' << io::format_optional(r.p_flw)
        << ',' << io::format_optional(r.p_lcr) << ',' << io::format_optional(r.bend) << ','
        << io::format_optional(r.slope_pct) << ',' << (r.included ? 1 : 0) << '\n';
  }
  io::finish_output(out, path);
}

std::vector<LinkStatsRow> read_link_stats_csv(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, "empty link stats file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kStatsHeader) throw Error(ErrorKind::Format, "unexpected link stats header in " + path.string());
  std::vector<LinkStatsRow> rows;
  std::size_t line_no = 1;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  auto count_field = [&](const std::string& s) -> std::uint64_t {
    auto v = io::parse_double(s);
    if (!v || *v < 0.0 || std::floor(*v) != *v) fail("bad count '" + s + "'");
    return static_cast<std::uint64_t>(*v);
  };
  auto opt_field = [&](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    auto v = io::parse_double(s);
    if (!v) fail("bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = csv_fields(line);
    if (f.size() != 11) fail("expected 11 columns");
    LinkStatsRow r;
    r.link_id = f[0];
    r.n_lcl = count_field(f[1]);
    r.n_flw = count_field(f[2]);
    r.n_lcr = count_field(f[3]);
    auto d = opt_field(f[4]);
    if (!d) fail("missing density");
    r.density = *d;
    r.p_lcl = opt_field(f[5]);
    r.p_flw = opt_field(f[6]);
    r.p_lcr = opt_field(f[7]);
    r.bend = opt_field(f[8]);
    r.slope_pct = opt_field(f[9]);
    if (f[10] != "0" && f[10] != "1") fail("included must be 0 or 1");
    r.included = f[10] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

ProbabilityMap probability_map_from_rows(std::span<const LinkStatsRow> rows, double density_min) {
  ProbabilityMap pm;
  pm.meta.density_min = density_min;
  for (const auto& r : rows) {
    pm.meta.total_lcl += r.n_lcl;
    pm.meta.total_flw += r.n_flw;
    pm.meta.total_lcr += r.n_lcr;
    ++pm.meta.links_seen;
    LinkProbability p;
    p.link_id = r.link_id;
    p.density = r.density;
    const auto total = r.n_lcl + r.n_flw + r.n_lcr;
    if (total > 0) {
      const double n = static_cast<double>(total);
      p.p_lcl = static_cast<double>(r.n_lcl) / n;
      p.p_flw = static_cast<double>(r.n_flw) / n;
      p.p_lcr = static_cast<double>(r.n_lcr) / n;
    }
    p.included = total > 0 && r.density >= density_min;
    if (p.included) {
      pm.links.emplace(p.link_id, std::move(p));
    } else {
      pm.excluded.push_back(std::move(p));
    }
  }
  pm.meta.links_included = pm.links.size();
  return pm;
}

}  // namespace lcmap
