#include "fluxcast/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "fluxcast/rng.hpp"

namespace fluxcast::net {

std::string to_string(Direction d) {
  switch (d) {
    case Direction::Incoming: return "in";
    case Direction::Outgoing: return "out";
    case Direction::Internal: return "internal";
  }
  return "internal";
}

Direction direction_from_string(const std::string& s) {
  if (s == "in") return Direction::Incoming;
  if (s == "out") return Direction::Outgoing;
  if (s == "internal") return Direction::Internal;
  throw ConfigError("unknown direction tag: " + s);
}

Network::Network(std::vector<RoadSegment> segments,
                 std::map<std::string, std::vector<SegmentId>> access_roads)
    : segments_(std::move(segments)), access_roads_(std::move(access_roads)) {
  std::sort(segments_.begin(), segments_.end(),
            [](const RoadSegment& x, const RoadSegment& y) { return x.id < y.id; });
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    if (segments_[i].id == segments_[i - 1].id)
      throw ConfigError("duplicate segment id " + std::to_string(segments_[i].id));
  }
  for (const auto& [name, ids] : access_roads_) {
    for (SegmentId id : ids) {
      if (!contains(id))
        throw ConfigError("access road '" + name + "' references unknown segment " +
                          std::to_string(id));
    }
  }
}

bool Network::contains(SegmentId id) const {
  auto it = std::lower_bound(segments_.begin(), segments_.end(), id,
                             [](const RoadSegment& s, SegmentId v) { return s.id < v; });
  return it != segments_.end() && it->id == id;
}

const RoadSegment& Network::segment(SegmentId id) const {
  auto it = std::lower_bound(segments_.begin(), segments_.end(), id,
                             [](const RoadSegment& s, SegmentId v) { return s.id < v; });
  if (it == segments_.end() || it->id != id)
    throw LookupError("unknown segment id " + std::to_string(id));
  return *it;
}

std::vector<SegmentId> Network::sensorized_ids() const {
  std::vector<SegmentId> out;
  for (const auto& s : segments_) {
    if (s.sensorized) out.push_back(s.id);
  }
  return out;
}

std::size_t Network::sensorized_count() const {
  return static_cast<std::size_t>(
      std::count_if(segments_.begin(), segments_.end(),
                    [](const RoadSegment& s) { return s.sensorized; }));
}

Network build_synthetic_network(const NetworkConfig& cfg, std::uint64_t seed) {
  if (cfg.n_segments < 1) throw ConfigError("network.n_segments must be >= 1");
  if (!(cfg.sensorized_fraction > 0.0) || cfg.sensorized_fraction > 1.0)
    throw ConfigError("network.sensorized_fraction must be in (0, 1]");
  if (!(cfg.side_m > 0.0)) throw ConfigError("network.side_m must be > 0");
  if (!(cfg.scale_min > 0.0) || cfg.scale_max < cfg.scale_min)
    throw ConfigError("network scale range must satisfy 0 < scale_min <= scale_max");
  if (cfg.n_access_roads < 0) throw ConfigError("network.n_access_roads must be >= 0");

  Rng rng(derive_seed(seed, "network", "build", 0));

  std::vector<RoadSegment> segments(cfg.n_segments);
  for (std::size_t i = 0; i < cfg.n_segments; ++i) {
    RoadSegment& s = segments[i];
    s.id = static_cast<SegmentId>(i);
    const Eigen::Vector2d mid(rng.uniform(0.0, cfg.side_m), rng.uniform(0.0, cfg.side_m));
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double half = 0.5 * rng.uniform(60.0, 400.0);
    const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
    s.a = mid - half * dir;
    s.b = mid + half * dir;
    s.direction = Direction::Internal;
    s.sensorized = false;
    s.mean_scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  }

  const std::size_t n_sensorized = static_cast<std::size_t>(
      std::lround(static_cast<double>(cfg.n_segments) * cfg.sensorized_fraction));
  std::vector<SegmentId> order(cfg.n_segments);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<SegmentId>(i);
  rng.shuffle(order);
  for (std::size_t i = 0; i < n_sensorized && i < order.size(); ++i)
    segments[order[i]].sensorized = true;

  // Access avenues: pairs of sensorized segments tagged Incoming/Outgoing,
  // mean_scale raised above every internal segment.
  static const char* kNames[3] = {"west", "north", "south"};
  const std::size_t n_avenues =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.n_access_roads), n_sensorized / 2);
  std::map<std::string, std::vector<SegmentId>> access;
  for (std::size_t r = 0; r < n_avenues; ++r) {
    const double factor = r < 3 ? 3.0 - 0.5 * static_cast<double>(r) : 1.5;
    const double scale = cfg.scale_max * factor;
    RoadSegment& in_seg = segments[order[2 * r]];
    RoadSegment& out_seg = segments[order[2 * r + 1]];
    in_seg.direction = Direction::Incoming;
    out_seg.direction = Direction::Outgoing;
    in_seg.mean_scale = scale;
    out_seg.mean_scale = scale;
    const std::string name = r < 3 ? kNames[r] : "access_" + std::to_string(r + 1);
    access[name] = {in_seg.id, out_seg.id};
  }

  return Network(std::move(segments), std::move(access));
}

std::vector<SegmentId> segments_within(const Network& net, SegmentId center, double radius_m) {
  const RoadSegment& c = net.segment(center);
  if (radius_m < 0.0) throw ConfigError("radius must be >= 0");
  const Eigen::Vector2d cm = c.midpoint();
  std::vector<SegmentId> out;
  for (const auto& s : net.segments()) {
    if (!s.sensorized) continue;
    if ((s.midpoint() - cm).norm() <= radius_m) out.push_back(s.id);
  }
  return out;  // segments() is id-sorted
}

nlohmann::json to_json(const Network& net) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : net.segments()) {
    segs.push_back({{"id", s.id},
                    {"x1", s.a.x()},
                    {"y1", s.a.y()},
                    {"x2", s.b.x()},
                    {"y2", s.b.y()},
                    {"direction", to_string(s.direction)},
                    {"sensorized", s.sensorized},
                    {"mean_scale", s.mean_scale}});
  }
  nlohmann::json roads = nlohmann::json::object();
  for (const auto& [name, ids] : net.access_roads()) roads[name] = ids;
  return {{"segments", segs}, {"access_roads", roads}};
}

Network network_from_json(const nlohmann::json& j) {
  std::vector<RoadSegment> segments;
  for (const auto& e : j.at("segments")) {
    RoadSegment s;
    s.id = e.at("id").get<SegmentId>();
    s.a = {e.at("x1").get<double>(), e.at("y1").get<double>()};
    s.b = {e.at("x2").get<double>(), e.at("y2").get<double>()};
    s.direction = direction_from_string(e.at("direction").get<std::string>());
    s.sensorized = e.at("sensorized").get<bool>();
    s.mean_scale = e.at("mean_scale").get<double>();
    segments.push_back(s);
  }
  std::map<std::string, std::vector<SegmentId>> roads;
  if (j.contains("access_roads")) {
    for (const auto& [name, ids] : j.at("access_roads").items())
      roads[name] = ids.get<std::vector<SegmentId>>();
  }
  return Network(std::move(segments), std::move(roads));
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << to_json(net).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid network JSON in " + path + ": " + e.what());
  }
  return network_from_json(j);
}

}  // namespace fluxcast::net
