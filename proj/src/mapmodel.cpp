#include "lcmap/mapmodel.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "lcmap/error.hpp"
#include "lcmap/io.hpp"

namespace lcmap {

using nlohmann::json;

std::string_view to_string(RoadClass c) {
  switch (c) {
    case RoadClass::Motorway:
      return "motorway";
    case RoadClass::Trunk:
      return "trunk";
    case RoadClass::Primary:
      return "primary";
    case RoadClass::Secondary:
      return "secondary";
    case RoadClass::Other:
      break;
  }
  return "other";
}

RoadClass parse_road_class(std::string_view s) {
  if (s == "motorway") return RoadClass::Motorway;
  if (s == "trunk") return RoadClass::Trunk;
  if (s == "primary") return RoadClass::Primary;
  if (s == "secondary") return RoadClass::Secondary;
  return RoadClass::Other;
}

std::string_view to_string(TravelDirection d) {
  switch (d) {
    case TravelDirection::Forward:
      return "forward";
    case TravelDirection::Backward:
      return "backward";
    case TravelDirection::Both:
      break;
  }
  return "both";
}

std::optional<TravelDirection> parse_travel_direction(std::string_view s) {
  if (s == "forward") return TravelDirection::Forward;
  if (s == "backward") return TravelDirection::Backward;
  if (s == "both") return TravelDirection::Both;
  return std::nullopt;
}

namespace {

std::string_view to_string(InterchangeKind k) { return k == InterchangeKind::Merger ? "merger" : "divider"; }

std::optional<InterchangeKind> parse_interchange_kind(std::string_view s) {
  if (s == "merger") return InterchangeKind::Merger;
  if (s == "divider") return InterchangeKind::Divider;
  return std::nullopt;
}

std::optional<std::string> json_id(const json& obj) {
  auto it = obj.find("id");
  if (it == obj.end()) return std::nullopt;
  if (it->is_string() && !it->get<std::string>().empty()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  return std::nullopt;
}

bool valid_lonlat(double lon, double lat) {
  return std::isfinite(lon) && std::isfinite(lat) && std::fabs(lon) <= 180.0 && std::fabs(lat) <= 90.0;
}

// Returns an explanation when the link is unusable.
std::optional<std::string> parse_source_link(const json& obj, SourceLink& out, std::vector<std::string>& warnings) {
  if (!obj.is_object()) return "link entry is not an object";
  auto id = json_id(obj);
  if (!id) return "link without id";
  out.id = *id;
  auto pts = obj.find("points");
  if (pts == obj.end() || !pts->is_array()) return "link " + out.id + ": missing points";

  std::vector<double> elev;
  bool all_elev = true;
  for (const auto& p : *pts) {
    if (!p.is_array() || p.size() < 2 || !p[0].is_number() || !p[1].is_number()) {
      return "link " + out.id + ": malformed point";
    }
    const double lon = p[0].get<double>();
    const double lat = p[1].get<double>();
    if (!valid_lonlat(lon, lat)) return "link " + out.id + ": coordinate out of range";
    double e = 0.0;
    const bool has_e = p.size() >= 3 && p[2].is_number() && std::isfinite(e = p[2].get<double>());
    if (!out.polyline.empty() && out.polyline.back() == geo::LonLat{lon, lat}) continue;
    out.polyline.push_back({lon, lat});
    all_elev = all_elev && has_e;
    elev.push_back(e);
  }
  if (out.polyline.size() < 2) return "link " + out.id + ": fewer than 2 distinct points";
  if (all_elev) {
    out.elevation = std::move(elev);
  } else if (std::any_of(pts->begin(), pts->end(), [](const json& p) { return p.size() >= 3; })) {
    warnings.push_back("link " + out.id + ": partial elevation data ignored");
  }

  if (auto rc = obj.find("road_class"); rc != obj.end() && rc->is_string()) {
    out.road_class = parse_road_class(rc->get<std::string>());
  }
  if (auto sl = obj.find("speed_limit"); sl != obj.end() && sl->is_number()) {
    out.speed_limit_kmh = sl->get<double>();
  }
  if (auto d = obj.find("dir"); d != obj.end()) {
    auto dir = d->is_string() ? parse_travel_direction(d->get<std::string>()) : std::nullopt;
    if (!dir) return "link " + out.id + ": unknown dir";
    out.direction = *dir;
  }
  return std::nullopt;
}

std::optional<InterchangeNode> parse_node(const json& obj) {
  if (!obj.is_object()) return std::nullopt;
  auto id = json_id(obj);
  auto kind = obj.find("kind");
  if (!id || kind == obj.end() || !kind->is_string()) return std::nullopt;
  auto k = parse_interchange_kind(kind->get<std::string>());
  if (!k) return std::nullopt;
  double lon = 0.0, lat = 0.0;
  if (auto p = obj.find("point"); p != obj.end() && p->is_array() && p->size() >= 2 && (*p)[0].is_number() &&
                                  (*p)[1].is_number()) {
    lon = (*p)[0].get<double>();
    lat = (*p)[1].get<double>();
  } else if (obj.contains("lon") && obj.contains("lat") && obj["lon"].is_number() && obj["lat"].is_number()) {
    lon = obj["lon"].get<double>();
    lat = obj["lat"].get<double>();
  } else {
    return std::nullopt;
  }
  if (!valid_lonlat(lon, lat)) return std::nullopt;
  return InterchangeNode{*id, {lon, lat}, *k};
}

json node_to_json(const InterchangeNode& n) {
  return json{{"id", n.id}, {"lon", n.pos.lon}, {"lat", n.pos.lat}, {"kind", std::string(to_string(n.kind))}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json points_to_json(const std::vector<geo::LonLat>& pts, const std::optional<std::vector<double>>& elev) {
  json arr = json::array();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (elev) {
      arr.push_back(json::array({pts[i].lon, pts[i].lat, (*elev)[i]}));
    } else {
      arr.push_back(json::array({pts[i].lon, pts[i].lat}));
    }
  }
  return arr;
}

std::vector<InterchangeNode> parse_nodes(const json& doc, MapLoadReport& rep) {
  std::vector<InterchangeNode> nodes;
  if (auto it = doc.find("nodes"); it != doc.end() && it->is_array()) {
    for (const auto& n : *it) {
      if (auto node = parse_node(n)) {
        nodes.push_back(std::move(*node));
      } else {
        ++rep.nodes_skipped;
        rep.warnings.push_back("skipped malformed interchange node");
      }
    }
  }
  return nodes;
}

}  // namespace

MapData parse_map(std::string_view json_text) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorKind::Format, "map file is not a JSON object");
  auto links = doc.find("links");
  if (links == doc.end() || !links->is_array()) throw Error(ErrorKind::Format, "map file has no 'links' array");
  MapData out;
  for (const auto& l : *links) {
    ++out.report.links_read;
    SourceLink link;
    if (auto why = parse_source_link(l, link, out.report.warnings)) {
      ++out.report.links_skipped;
      out.report.warnings.push_back("skipped " + *why);
      continue;
    }
    out.links.push_back(std::move(link));
  }
  out.nodes = parse_nodes(doc, out.report);
  return out;
}

MapData load_map(const std::filesystem::path& path) { return parse_map(io::read_file(path)); }

void write_source_map(const std::filesystem::path& path, std::span<const SourceLink> links,
                      std::span<const InterchangeNode> nodes) {
  json doc;
  doc["links"] = json::array();
  for (const auto& l : links) {
    json j{{"id", l.id},
           {"points", points_to_json(l.polyline, l.elevation)},
           {"road_class", std::string(to_string(l.road_class))},
           {"dir", std::string(to_string(l.direction))}};
    if (l.speed_limit_kmh) j["speed_limit"] = *l.speed_limit_kmh;
    doc["links"].push_back(std::move(j));
  }
  doc["nodes"] = json::array();
  for (const auto& n : nodes) doc["nodes"].push_back(node_to_json(n));
  auto out = io::open_output(path);
  out << doc.dump() << '\n';
  io::finish_output(out, path);
}

std::optional<double> compute_bend(std::span<const geo::LonLat> polyline) {
  if (polyline.size() < 2) return std::nullopt;
  if (!geo::is_canonical_orientation(polyline)) {
    std::vector<geo::LonLat> rev(polyline.rbegin(), polyline.rend());
    auto b = compute_bend(rev);
    if (b) return -*b;
    return std::nullopt;
  }
  const double length = geo::polyline_length_m(polyline);
  if (!(length > 0.0)) return std::nullopt;
  const geo::TangentFrame frame(geo::lerp(polyline.front(), polyline.back(), 0.5));
  const geo::Vec2 start = frame.project(polyline.front());
  const geo::Vec2 end = frame.project(polyline.back());
  const geo::Vec2 secant{end.x - start.x, end.y - start.y};
  const double chord = std::hypot(secant.x, secant.y);
  if (chord <= 1e-9 * length) return std::nullopt;

  double deviation = 0.0;  // signed, positive left of the secant
  for (const auto& p : polyline) {
    const geo::Vec2 v = frame.project(p);
    const double d = geo::cross(secant, {v.x - start.x, v.y - start.y}) / chord;
    if (std::fabs(d) > std::fabs(deviation)) deviation = d;
  }
  // A left turn bulges to the right of its secant.
  return -deviation / length;
}

std::optional<double> compute_slope(std::span<const geo::LonLat> polyline, std::span<const double> elevation) {
  if (polyline.size() < 2 || elevation.size() != polyline.size()) return std::nullopt;
  const double length = geo::polyline_length_m(polyline);
  if (!(length > 0.0)) return std::nullopt;
  return 100.0 * (elevation.back() - elevation.front()) / length;
}

std::optional<double> compute_slope(const Link& link) {
  if (!link.elevation) return std::nullopt;
  return compute_slope(link.polyline, *link.elevation);
}

namespace {

struct PiecePoints {
  std::vector<geo::LonLat> pts;
  std::vector<double> elev;
};

class PolylineCutter {
 public:
  explicit PolylineCutter(const SourceLink& src) : src_(src) {
    cum_.push_back(0.0);
    for (std::size_t i = 1; i < src.polyline.size(); ++i) {
      cum_.push_back(cum_.back() + geo::distance_m(src.polyline[i - 1], src.polyline[i]));
    }
  }

  double total() const { return cum_.back(); }

  PiecePoints piece(double s_begin, double s_end) const {
    PiecePoints out;
    append_point(out, s_begin);
    for (std::size_t v = 0; v < cum_.size(); ++v) {
      if (cum_[v] > s_begin + kSnap && cum_[v] < s_end - kSnap) push(out, src_.polyline[v], elev(v));
    }
    append_point(out, s_end);
    return out;
  }

 private:
  static constexpr double kSnap = 1e-9;

  double elev(std::size_t v) const { return src_.elevation ? (*src_.elevation)[v] : 0.0; }

  static void push(PiecePoints& out, geo::LonLat p, double e) {
    if (!out.pts.empty() && out.pts.back() == p) return;
    out.pts.push_back(p);
    out.elev.push_back(e);
  }

  void append_point(PiecePoints& out, double s) const {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t i = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
    if (i + 1 >= cum_.size()) i = cum_.size() - 2;
    if (s - cum_[i] <= kSnap) return push(out, src_.polyline[i], elev(i));
    if (cum_[i + 1] - s <= kSnap) return push(out, src_.polyline[i + 1], elev(i + 1));
    const auto& a = src_.polyline[i];
    const auto& b = src_.polyline[i + 1];
    const double f = geo::fraction_for_distance(a, b, s - cum_[i]);
    push(out, geo::lerp(a, b, f), elev(i) + (elev(i + 1) - elev(i)) * f);
  }

  const SourceLink& src_;
  std::vector<double> cum_;
};

std::vector<double> cut_positions(double total, double seg_len) {
  std::vector<double> bounds{0.0};
  const auto n_full = static_cast<std::size_t>(std::floor(total / seg_len + 1e-9));
  if (n_full == 0) {
    bounds.push_back(total);
    return bounds;
  }
  const double rem = std::max(0.0, total - static_cast<double>(n_full) * seg_len);
  const bool keep_terminal = rem > 1e-9 * seg_len && !(rem < 0.5 * seg_len * (1.0 - 1e-9));
  const std::size_t pieces = keep_terminal ? n_full + 1 : n_full;
  for (std::size_t k = 1; k < pieces; ++k) bounds.push_back(static_cast<double>(k) * seg_len);
  bounds.push_back(total);
  return bounds;
}

Link make_link(const SourceLink& src, std::size_t segment, bool reversed, PiecePoints piece, double length) {
  Link link;
  link.source_id = src.id;
  link.segment = segment;
  link.reversed = reversed;
  link.id = src.id + ":" + std::to_string(segment) + (reversed ? ":B" : ":F");
  if (reversed) {
    std::reverse(piece.pts.begin(), piece.pts.end());
    std::reverse(piece.elev.begin(), piece.elev.end());
  }
  link.polyline = std::move(piece.pts);
  if (src.elevation) link.elevation = std::move(piece.elev);
  link.length_m = length;
  link.bend = compute_bend(link.polyline);
  link.slope_pct = compute_slope(link);
  if (link.slope_pct && std::fabs(*link.slope_pct) > kMaxAbsSlopePct) link.slope_pct.reset();
  link.road_class = src.road_class;
  link.speed_limit_kmh = src.speed_limit_kmh;
  return link;
}

}  // namespace

std::vector<Link> resegment(std::span<const SourceLink> links, double seg_len_m) {
  if (!(seg_len_m > 0.0)) throw Error(ErrorKind::InvalidArgument, "resegment: segment length must be positive");
  std::vector<Link> out;
  for (const auto& src : links) {
    if (src.polyline.size() < 2) continue;
    PolylineCutter cutter(src);
    const auto bounds = cut_positions(cutter.total(), seg_len_m);
    const std::size_t pieces = bounds.size() - 1;
    std::vector<PiecePoints> pts;
    std::vector<double> lengths;
    for (std::size_t k = 0; k < pieces; ++k) {
      pts.push_back(cutter.piece(bounds[k], bounds[k + 1]));
      lengths.push_back(geo::polyline_length_m(pts.back().pts));
    }
    if (src.direction != TravelDirection::Backward) {
      for (std::size_t k = 0; k < pieces; ++k) out.push_back(make_link(src, k, false, pts[k], lengths[k]));
    }
    if (src.direction != TravelDirection::Forward) {
      for (std::size_t k = 0; k < pieces; ++k) {
        const std::size_t src_k = pieces - 1 - k;
        out.push_back(make_link(src, k, true, pts[src_k], lengths[src_k]));
      }
    }
  }
  return out;
}

void write_resegmented_map(const std::filesystem::path& path, const ResegmentedMap& map) {
  json doc;
  doc["seg_len"] = map.seg_len_m;
  doc["links"] = json::array();
  for (const auto& l : map.links) {
    json j{{"id", l.id},
           {"source", l.source_id},
           {"segment", l.segment},
           {"reversed", l.reversed},
           {"points", points_to_json(l.polyline, l.elevation)},
           {"length_m", l.length_m},
           {"bend", optional_number(l.bend)},
           {"slope_pct", optional_number(l.slope_pct)},
           {"road_class", std::string(to_string(l.road_class))},
           {"speed_limit", optional_number(l.speed_limit_kmh)}};
    doc["links"].push_back(std::move(j));
  }
  doc["nodes"] = json::array();
  for (const auto& n : map.nodes) doc["nodes"].push_back(node_to_json(n));
  auto out = io::open_output(path);
  out << doc.dump() << '\n';
  io::finish_output(out, path);
}

ResegmentedMap load_resegmented_map(const std::filesystem::path& path) {
  json doc = json::parse(io::read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("links") || !doc["links"].is_array()) {
    throw Error(ErrorKind::Format, "not a resegmented map file: " + path.string());
  }
  ResegmentedMap map;
  auto opt = [](const json& j, const char* key) -> std::optional<double> {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) return std::nullopt;
    return it->get<double>();
  };
  try {
    map.seg_len_m = doc.value("seg_len", kDefaultSegmentLengthM);
    for (const auto& j : doc["links"]) {
      Link l;
      l.id = j.at("id").get<std::string>();
      l.source_id = j.value("source", std::string{});
      l.segment = j.value("segment", std::size_t{0});
      l.reversed = j.value("reversed", false);
      std::vector<double> elev;
      bool has_elev = true;
      for (const auto& p : j.at("points")) {
        l.polyline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        if (p.size() >= 3) {
          elev.push_back(p[2].get<double>());
        } else {
          has_elev = false;
        }
      }
      if (l.polyline.size() < 2) throw Error(ErrorKind::Format, "link " + l.id + " has fewer than 2 points");
      if (has_elev) l.elevation = std::move(elev);
      l.length_m = j.at("length_m").get<double>();
      l.bend = opt(j, "bend");
      l.slope_pct = opt(j, "slope_pct");
      if (auto rc = j.find("road_class"); rc != j.end() && rc->is_string()) {
        l.road_class = parse_road_class(rc->get<std::string>());
      }
      l.speed_limit_kmh = opt(j, "speed_limit");
      map.links.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, "malformed resegmented map " + path.string() + ": " + e.what());
  }
  MapLoadReport rep;
  map.nodes = parse_nodes(doc, rep);
  return map;
}

namespace {

geo::LonLat mean_position(std::span<const Link> links) {
  double lon = 0.0, lat = 0.0;
  std::size_t n = 0;
  for (const auto& l : links) {
    for (const auto& p : l.polyline) {
      lon += p.lon;
      lat += p.lat;
      ++n;
    }
  }
  if (n == 0) return {};
  return {lon / static_cast<double>(n), lat / static_cast<double>(n)};
}

}  // namespace

LinkIndex::LinkIndex(std::span<const Link> links, MatchParams params)
    : params_(params), frame_(mean_position(links)), cell_m_(std::max(params.radius_m, 10.0)) {
  if (!(params.radius_m > 0.0) || !(params.heading_tol_deg >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "link index: radius must be positive, heading tolerance non-negative");
  }
  double max_abs_lat = std::fabs(frame_.origin().lat);
  for (std::size_t li = 0; li < links.size(); ++li) {
    link_ids_.push_back(links[li].id);
    const auto& pl = links[li].polyline;
    for (std::size_t e = 1; e < pl.size(); ++e) {
      const auto id = static_cast<std::uint32_t>(edges_.size());
      edges_.push_back({static_cast<std::uint32_t>(li), pl[e - 1], pl[e], geo::bearing_deg(pl[e - 1], pl[e])});
      max_abs_lat = std::max({max_abs_lat, std::fabs(pl[e - 1].lat), std::fabs(pl[e].lat)});
      const auto a = frame_.project(pl[e - 1]);
      const auto b = frame_.project(pl[e]);
      const auto x0 = static_cast<std::int64_t>(std::floor(std::min(a.x, b.x) / cell_m_));
      const auto x1 = static_cast<std::int64_t>(std::floor(std::max(a.x, b.x) / cell_m_));
      const auto y0 = static_cast<std::int64_t>(std::floor(std::min(a.y, b.y) / cell_m_));
      const auto y1 = static_cast<std::int64_t>(std::floor(std::max(a.y, b.y) / cell_m_));
      for (auto ix = x0; ix <= x1; ++ix) {
        for (auto iy = y0; iy <= y1; ++iy) cells_[cell_key(ix, iy)].push_back(id);
      }
    }
  }
  min_cos_lat_ = std::cos(geo::deg2rad(std::min(max_abs_lat, 89.0)));
}

std::int64_t LinkIndex::cell_key(std::int64_t ix, std::int64_t iy) const {
  return (ix + (std::int64_t{1} << 31)) << 32 | ((iy + (std::int64_t{1} << 31)) & 0xffffffff);
}

std::optional<LinkMatch> LinkIndex::match(geo::LonLat pos, double heading_deg) const {
  if (edges_.empty()) return std::nullopt;
  const geo::Vec2 p = frame_.project(pos);
  // Grid meters follow cos(origin lat); true east-west meters follow cos(query lat).
  const double cos_q = std::max(std::cos(geo::deg2rad(pos.lat)), min_cos_lat_);
  const double scale = std::max(1.0, std::cos(geo::deg2rad(frame_.origin().lat)) / cos_q);
  const double r = params_.radius_m * scale * 1.001 + 1.0;
  const auto x0 = static_cast<std::int64_t>(std::floor((p.x - r) / cell_m_));
  const auto x1 = static_cast<std::int64_t>(std::floor((p.x + r) / cell_m_));
  const auto y0 = static_cast<std::int64_t>(std::floor((p.y - r) / cell_m_));
  const auto y1 = static_cast<std::int64_t>(std::floor((p.y + r) / cell_m_));

  std::vector<std::uint32_t> cand;
  for (auto ix = x0; ix <= x1; ++ix) {
    for (auto iy = y0; iy <= y1; ++iy) {
      auto it = cells_.find(cell_key(ix, iy));
      if (it != cells_.end()) cand.insert(cand.end(), it->second.begin(), it->second.end());
    }
  }
  if (cand.empty()) return std::nullopt;
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  const geo::LocalFrame local(pos);
  std::optional<LinkMatch> best;
  std::size_t i = 0;
  while (i < cand.size()) {
    const std::uint32_t link = edges_[cand[i]].link;
    double link_dist = 0.0;
    double link_heading = 0.0;
    bool first = true;
    for (; i < cand.size() && edges_[cand[i]].link == link; ++i) {
      const auto& e = edges_[cand[i]];
      const double d = geo::point_segment_distance({0.0, 0.0}, local.project(e.a), local.project(e.b));
      if (first || d < link_dist) {
        link_dist = d;
        link_heading = e.heading;
        first = false;
      }
    }
    if (link_dist > params_.radius_m) continue;
    if (geo::heading_difference_deg(link_heading, heading_deg) > params_.heading_tol_deg) continue;
    if (!best || link_dist < best->distance_m) best = LinkMatch{link, link_dist};
  }
  return best;
}

std::optional<std::string> map_match(geo::LonLat pos, double heading_deg, const LinkIndex& index) {
  auto m = index.match(pos, heading_deg);
  if (!m) return std::nullopt;
  return index.link_id(m->link);
}

}  // namespace lcmap
