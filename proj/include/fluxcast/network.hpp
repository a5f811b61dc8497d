#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxcast/common.hpp"

namespace fluxcast::net {

enum class Direction { Incoming, Outgoing, Internal };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

/// A road section between two intersections, in a flat planar frame (meters).
struct RoadSegment {
  SegmentId id = 0;
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  Direction direction = Direction::Internal;
  bool sensorized = false;
  double mean_scale = 0.0;  // base traffic level, vehicles/hour

  Eigen::Vector2d midpoint() const { return 0.5 * (a + b); }
  double length() const { return (b - a).norm(); }
};

struct NetworkConfig {
  std::size_t n_segments = 8595;
  double sensorized_fraction = 0.18;
  double side_m = 10000.0;       // city square side
  double scale_min = 150.0;      // internal-segment mean_scale range
  double scale_max = 600.0;
  int n_access_roads = 3;
};

/// Immutable after construction; safe for concurrent reads.
class Network {
 public:
  Network() = default;
  Network(std::vector<RoadSegment> segments,
          std::map<std::string, std::vector<SegmentId>> access_roads);

  const std::vector<RoadSegment>& segments() const { return segments_; }
  const std::map<std::string, std::vector<SegmentId>>& access_roads() const {
    return access_roads_;
  }

  bool contains(SegmentId id) const;
  const RoadSegment& segment(SegmentId id) const;  // throws LookupError

  /// Ids of sensorized segments, ascending.
  std::vector<SegmentId> sensorized_ids() const;
  std::size_t sensorized_count() const;

 private:
  std::vector<RoadSegment> segments_;  // sorted by id
  std::map<std::string, std::vector<SegmentId>> access_roads_;
};

/// Builds a synthetic city: n_segments segments with midpoints uniform in a
/// square, exactly round(n_segments * sensorized_fraction) of them
/// sensorized, and up to n_access_roads named access avenues. Each avenue is
/// one Incoming plus one Outgoing sensorized segment sharing the highest
/// mean_scale values in the network. Deterministic given (config, seed).
Network build_synthetic_network(const NetworkConfig& cfg, std::uint64_t seed);

/// All sensorized segments whose midpoint lies within radius of center's
/// midpoint (center included when sensorized), sorted by id.
std::vector<SegmentId> segments_within(const Network& net, SegmentId center, double radius_m);

nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace fluxcast::net
