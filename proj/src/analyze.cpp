#include "lcmap/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "lcmap/error.hpp"
#include "lcmap/io.hpp"

namespace lcmap {

std::string_view to_string(Feature f) { return f == Feature::Bend ? "bend" : "slope"; }

std::optional<Feature> parse_feature(std::string_view s) {
  if (s == "bend") return Feature::Bend;
  if (s == "slope" || s == "slope_pct") return Feature::SlopePct;
  return std::nullopt;
}

std::string_view to_string(ProximityKind k) {
  switch (k) {
    case ProximityKind::NearMerger:
      return "near_merger";
    case ProximityKind::NearDivider:
      return "near_divider";
    case ProximityKind::Plain:
      break;
  }
  return "plain";
}

FeatureTable features_from_links(std::span<const Link> links) {
  FeatureTable t;
  for (const auto& l : links) t[l.id] = {l.bend, l.slope_pct};
  return t;
}

FeatureTable features_from_rows(std::span<const LinkStatsRow> rows) {
  FeatureTable t;
  for (const auto& r : rows) t[r.link_id] = {r.bend, r.slope_pct};
  return t;
}

std::vector<double> uniform_edges(double lo, double hi, double width) {
  if (!(hi > lo) || !(width > 0.0)) throw Error(ErrorKind::InvalidArgument, "bin edges: need lo < hi, width > 0");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / width));
  std::vector<double> edges;
  // Edges on an integer multiple of the width are formed as k * width so that
  // e.g. -0.06 does not come out as -0.060000000000000005.
  const double k0 = lo / width;
  const bool aligned = std::fabs(k0 - std::round(k0)) < 1e-9;
  for (std::size_t i = 0; i <= n; ++i) {
    const double e = aligned ? (std::round(k0) + static_cast<double>(i)) * width
                             : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
    edges.push_back(e);
  }
  edges.front() = lo;
  edges.back() = hi;
  return edges;
}

std::vector<double> default_bin_edges(Feature f) {
  return f == Feature::Bend ? uniform_edges(-0.07, 0.07, 0.01) : uniform_edges(-7.0, 7.0, 1.0);
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double bootstrap_median_se(std::span<const double> values, std::size_t resamples, std::uint64_t seed) {
  if (values.size() < 2 || resamples < 2) return 0.0;
  std::mt19937_64 rng(seed);
  std::vector<double> draw(values.size());
  std::vector<double> medians;
  medians.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& d : draw) d = values[rng() % values.size()];
    medians.push_back(median(draw));
  }
  const double mean = std::accumulate(medians.begin(), medians.end(), 0.0) / static_cast<double>(resamples);
  double ss = 0.0;
  for (double m : medians) ss += (m - mean) * (m - mean);
  return std::sqrt(ss / static_cast<double>(resamples - 1));
}

namespace {

void validate_edges(std::span<const double> edges) {
  if (edges.size() < 2) throw Error(ErrorKind::InvalidArgument, "binning: need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw Error(ErrorKind::InvalidArgument, "binning: edges must increase strictly");
  }
}

std::optional<std::size_t> bin_of(std::span<const double> edges, double x) {
  if (!(x >= edges.front()) || !(x <= edges.back())) return std::nullopt;
  if (x == edges.back()) return edges.size() - 2;
  auto it = std::upper_bound(edges.begin(), edges.end(), x);
  return static_cast<std::size_t>(it - edges.begin()) - 1;
}

}  // namespace

BinnedStat bin_median_pflw(const ProbabilityMap& pm, const FeatureTable& features, Feature feature,
                           std::span<const double> edges, const BinningOptions& opts) {
  validate_edges(edges);
  BinnedStat out;
  out.feature = feature;
  out.edges.assign(edges.begin(), edges.end());
  std::vector<std::vector<double>> values(edges.size() - 1);
  for (const auto& [id, p] : pm.links) {
    if (!p.included) continue;
    auto it = features.find(id);
    std::optional<double> x;
    if (it != features.end()) x = feature == Feature::Bend ? it->second.bend : it->second.slope_pct;
    if (!x) {
      ++out.missing_feature;
      continue;
    }
    if (feature == Feature::Bend && std::fabs(*x) > opts.bend_abs_max) {
      ++out.excluded_extreme;
      continue;
    }
    auto b = bin_of(edges, *x);
    if (!b) {
      ++out.out_of_range;
      continue;
    }
    values[*b].push_back(p.p_flw);
  }
  for (std::size_t b = 0; b < values.size(); ++b) {
    BinStat s;
    s.lo = edges[b];
    s.hi = edges[b + 1];
    s.n_links = values[b].size();
    if (s.n_links > 0 && s.n_links >= opts.min_bin_count) {
      s.median_p_flw = median(values[b]);
      s.mean_p_flw = std::accumulate(values[b].begin(), values[b].end(), 0.0) / static_cast<double>(s.n_links);
      s.sem = bootstrap_median_se(values[b], opts.bootstrap_resamples, derive_seed(opts.seed, {b}));
    }
    out.bins.push_back(s);
  }
  return out;
}

void write_binned_csv(const std::filesystem::path& path, const BinnedStat& stat) {
  auto out = io::open_output(path);
  out << "bin_lo,bin_hi,n,median_p_flw,sem,mean_p_flw\n";
  for (const auto& b : stat.bins) {
    out << io::format_double(b.lo) << ',' << io::format_double(b.hi) << ',' << b.n_links << ','
        << io::format_optional(b.median_p_flw) << ',' << io::format_optional(b.sem) << ','
        << io::format_optional(b.mean_p_flw) << '\n';
  }
  io::finish_output(out, path);
}

std::uint64_t HeatmapGrid::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

geo::LonLat HeatmapGrid::cell_center(std::size_t row, std::size_t col) const {
  const geo::LocalFrame frame(origin);
  return frame.unproject({(static_cast<double>(col) + 0.5) * cell_size_m, (static_cast<double>(row) + 0.5) * cell_size_m});
}

HeatmapGrid build_heatmap(std::span<const LaneChangeEvent> events, double cell_size_m) {
  if (!(cell_size_m > 0.0)) throw Error(ErrorKind::InvalidArgument, "heatmap: cell size must be positive");
  HeatmapGrid grid;
  grid.cell_size_m = cell_size_m;
  if (events.empty()) return grid;
  grid.origin = {events.front().lon, events.front().lat};
  for (const auto& e : events) {
    grid.origin.lon = std::min(grid.origin.lon, e.lon);
    grid.origin.lat = std::min(grid.origin.lat, e.lat);
  }
  const geo::LocalFrame frame(grid.origin);
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& e : events) {
    const auto v = frame.project({e.lon, e.lat});
    const auto row = static_cast<std::size_t>(std::max(0.0, std::floor(v.y / cell_size_m)));
    const auto col = static_cast<std::size_t>(std::max(0.0, std::floor(v.x / cell_size_m)));
    cells.emplace_back(row, col);
    grid.rows = std::max(grid.rows, row + 1);
    grid.cols = std::max(grid.cols, col + 1);
  }
  grid.counts.assign(grid.rows * grid.cols, 0);
  for (auto [r, c] : cells) ++grid.counts[r * grid.cols + c];
  return grid;
}

void write_heatmap_csv(const std::filesystem::path& path, const HeatmapGrid& grid) {
  auto out = io::open_output(path);
  out << "row,col,lon,lat,count\n";
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const auto center = grid.cell_center(r, c);
      out << r << ',' << c << ',' << io::format_double(center.lon) << ',' << io::format_double(center.lat) << ','
          << grid.at(r, c) << '\n';
    }
  }
  io::finish_output(out, path);
}

void write_heatmap_geojson(const std::filesystem::path& path, const HeatmapGrid& grid) {
  using nlohmann::json;
  json fc{{"type", "FeatureCollection"}, {"features", json::array()}};
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      if (grid.at(r, c) == 0) continue;
      const auto center = grid.cell_center(r, c);
      fc["features"].push_back(
          json{{"type", "Feature"},
               {"geometry", {{"type", "Point"}, {"coordinates", json::array({center.lon, center.lat})}}},
               {"properties", {{"weight", grid.at(r, c)}, {"row", r}, {"col", c}}}});
    }
  }
  auto out = io::open_output(path);
  out << fc.dump() << '\n';
  io::finish_output(out, path);
}

namespace {

struct NodeRelation {
  double distance = 0.0;
  bool ahead_or_alongside = false;   // relevant for dividers
  bool behind_or_alongside = false;  // relevant for mergers
  double ahead_distance = 0.0;
  double behind_distance = 0.0;
};

geo::Vec2 unit(geo::Vec2 v) {
  const double n = std::hypot(v.x, v.y);
  return n > 0.0 ? geo::Vec2{v.x / n, v.y / n} : geo::Vec2{};
}

NodeRelation relate(std::span<const geo::Vec2> pl, geo::Vec2 node) {
  NodeRelation rel;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_edge = 0;
  double best_t = 0.0;
  for (std::size_t e = 1; e < pl.size(); ++e) {
    double t = 0.0;
    const double d = geo::point_segment_distance(node, pl[e - 1], pl[e], &t);
    if (d < best) {
      best = d;
      best_edge = e;
      best_t = t;
    }
  }
  rel.distance = best;
  const bool at_start = best_edge == 1 && best_t <= 0.0;
  const bool at_end = best_edge == pl.size() - 1 && best_t >= 1.0;
  const bool alongside = !at_start && !at_end;

  const geo::Vec2 start = pl.front();
  const geo::Vec2 end = pl.back();
  const geo::Vec2 t_start = unit({pl[1].x - start.x, pl[1].y - start.y});
  const geo::Vec2 t_end = unit({end.x - pl[pl.size() - 2].x, end.y - pl[pl.size() - 2].y});
  const geo::Vec2 to_end{node.x - end.x, node.y - end.y};
  const geo::Vec2 to_start{node.x - start.x, node.y - start.y};

  if (alongside) {
    rel.ahead_or_alongside = rel.behind_or_alongside = true;
    rel.ahead_distance = rel.behind_distance = best;
  } else {
    if (t_end.x * to_end.x + t_end.y * to_end.y >= 0.0) {
      rel.ahead_or_alongside = true;
      rel.ahead_distance = std::hypot(to_end.x, to_end.y);
    }
    if (t_start.x * to_start.x + t_start.y * to_start.y <= 0.0) {
      rel.behind_or_alongside = true;
      rel.behind_distance = std::hypot(to_start.x, to_start.y);
    }
  }
  return rel;
}

}  // namespace

std::vector<ProximityTag> tag_interchange_proximity(std::span<const Link> links, std::span<const InterchangeNode> nodes,
                                                    double radius_m) {
  if (!(radius_m >= 0.0)) throw Error(ErrorKind::InvalidArgument, "proximity: radius must be non-negative");
  std::vector<ProximityTag> tags;
  tags.reserve(links.size());
  for (const auto& link : links) {
    ProximityTag tag{link.id, ProximityKind::Plain, std::nullopt};
    if (link.polyline.size() >= 2 && !nodes.empty()) {
      const geo::LocalFrame frame(geo::lerp(link.polyline.front(), link.polyline.back(), 0.5));
      std::vector<geo::Vec2> pl;
      for (const auto& p : link.polyline) pl.push_back(frame.project(p));
      std::optional<double> best;
      ProximityKind best_kind = ProximityKind::Plain;
      for (const auto& node : nodes) {
        const auto rel = relate(pl, frame.project(node.pos));
        std::optional<double> d;
        if (node.kind == InterchangeKind::Divider && rel.ahead_or_alongside) d = rel.ahead_distance;
        if (node.kind == InterchangeKind::Merger && rel.behind_or_alongside) d = rel.behind_distance;
        if (!d) continue;
        const auto kind = node.kind == InterchangeKind::Divider ? ProximityKind::NearDivider : ProximityKind::NearMerger;
        if (!best || *d < *best || (*d == *best && kind == ProximityKind::NearDivider)) {
          best = d;
          best_kind = kind;
        }
      }
      tag.distance_m = best;
      if (best && *best <= radius_m) tag.tag = best_kind;
    }
    tags.push_back(std::move(tag));
  }
  return tags;
}

ExclusionResult exclusion_experiment(const ProbabilityMap& pm, const FeatureTable& features,
                                     const std::set<std::string>& excluded_ids, Feature feature,
                                     std::span<const double> edges, const BinningOptions& opts) {
  for (const auto& id : excluded_ids) {
    if (!features.contains(id) && !pm.links.contains(id)) {
      throw Error(ErrorKind::InvalidArgument, "exclusion: unknown link id '" + id + "'");
    }
  }
  ExclusionResult res;
  res.with = bin_median_pflw(pm, features, feature, edges, opts);
  ProbabilityMap reduced = pm;
  for (const auto& id : excluded_ids) reduced.links.erase(id);
  reduced.meta.links_included = reduced.links.size();
  res.without = bin_median_pflw(reduced, features, feature, edges, opts);
  for (std::size_t b = 0; b < res.with.bins.size(); ++b) {
    const auto& w = res.with.bins[b].median_p_flw;
    const auto& wo = res.without.bins[b].median_p_flw;
    res.median_delta.push_back(w && wo ? std::optional<double>(*wo - *w) : std::nullopt);
  }
  return res;
}

void write_exclusion_csv(const std::filesystem::path& path, const ExclusionResult& r) {
  auto out = io::open_output(path);
  out << "bin_lo,bin_hi,n_with,median_with,sem_with,n_without,median_without,sem_without,median_delta\n";
  for (std::size_t b = 0; b < r.with.bins.size(); ++b) {
    const auto& w = r.with.bins[b];
    const auto& wo = r.without.bins[b];
    out << io::format_double(w.lo) << ',' << io::format_double(w.hi) << ',' << w.n_links << ','
        << io::format_optional(w.median_p_flw) << ',' << io::format_optional(w.sem) << ',' << wo.n_links << ','
        << io::format_optional(wo.median_p_flw) << ',' << io::format_optional(wo.sem) << ','
        << io::format_optional(r.median_delta[b]) << '\n';
  }
  io::finish_output(out, path);
}

}  // namespace lcmap
