#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "fluxcast/network.hpp"
#include "fluxcast/rng.hpp"
#include "helpers.hpp"

using namespace fluxcast;

TEST_SUITE("network") {
  TEST_CASE("sensorized count matches round(n * fraction)") {
    net::NetworkConfig cfg;
    cfg.n_segments = 8595;
    cfg.sensorized_fraction = 0.18;
    const auto network = net::build_synthetic_network(cfg, 1);
    CHECK(network.segments().size() == 8595);
    CHECK(network.sensorized_count() == 1547);
  }

  TEST_CASE("degenerate single-segment network") {
    net::NetworkConfig cfg;
    cfg.n_segments = 1;
    cfg.sensorized_fraction = 1.0;
    const auto network = net::build_synthetic_network(cfg, 0);
    REQUIRE(network.segments().size() == 1);
    CHECK(network.segments()[0].sensorized);
    CHECK(network.segments()[0].direction == net::Direction::Internal);
    CHECK(network.access_roads().empty());
  }

  TEST_CASE("construction is deterministic") {
    net::NetworkConfig cfg;
    cfg.n_segments = 50;
    cfg.sensorized_fraction = 0.5;
    const auto a = net::build_synthetic_network(cfg, 7);
    const auto b = net::build_synthetic_network(cfg, 7);
    CHECK(net::to_json(a).dump() == net::to_json(b).dump());
    const auto c = net::build_synthetic_network(cfg, 8);
    CHECK(net::to_json(a).dump() != net::to_json(c).dump());
  }

  TEST_CASE("access avenues carry the top scales, paired in/out") {
    const auto network = net::build_synthetic_network(testutil::tiny_city(50), 3);
    REQUIRE(network.access_roads().size() == 3);
    double max_internal = 0.0;
    for (const auto& s : network.segments()) {
      if (s.direction == net::Direction::Internal) max_internal = std::max(max_internal, s.mean_scale);
    }
    for (const auto& [name, ids] : network.access_roads()) {
      REQUIRE(ids.size() == 2);
      const auto& in_seg = network.segment(ids[0]);
      const auto& out_seg = network.segment(ids[1]);
      CHECK(in_seg.direction == net::Direction::Incoming);
      CHECK(out_seg.direction == net::Direction::Outgoing);
      CHECK(in_seg.mean_scale == out_seg.mean_scale);
      CHECK(in_seg.mean_scale > max_internal);
      CHECK(in_seg.sensorized);
      CHECK(out_seg.sensorized);
    }
    CHECK(network.access_roads().contains("west"));
    CHECK(network.access_roads().contains("north"));
    CHECK(network.access_roads().contains("south"));
  }

  TEST_CASE("segment geometry is sane") {
    const auto network = net::build_synthetic_network(testutil::tiny_city(40), 11);
    for (const auto& s : network.segments()) {
      CHECK(s.length() > 0.0);
      CHECK(s.mean_scale > 0.0);
    }
  }

  TEST_CASE("invalid configs are rejected") {
    net::NetworkConfig cfg;
    cfg.n_segments = 0;
    CHECK_THROWS_AS(net::build_synthetic_network(cfg, 1), ConfigError);
    cfg.n_segments = 10;
    cfg.sensorized_fraction = 0.0;
    CHECK_THROWS_AS(net::build_synthetic_network(cfg, 1), ConfigError);
    cfg.sensorized_fraction = 1.5;
    CHECK_THROWS_AS(net::build_synthetic_network(cfg, 1), ConfigError);
  }

  TEST_CASE("segments_within: radius zero and infinity") {
    const auto network = net::build_synthetic_network(testutil::tiny_city(30), 5);
    const SegmentId center = network.sensorized_ids()[4];
    CHECK(net::segments_within(network, center, 0.0) == std::vector<SegmentId>{center});
    CHECK(net::segments_within(network, center, std::numeric_limits<double>::max()) ==
          network.sensorized_ids());
  }

  TEST_CASE("segments_within matches a brute-force distance scan") {
    net::NetworkConfig cfg;
    cfg.n_segments = 50;
    cfg.sensorized_fraction = 0.6;
    cfg.side_m = 4000.0;
    const auto network = net::build_synthetic_network(cfg, 17);
    const SegmentId center = network.sensorized_ids()[0];
    const Eigen::Vector2d cm = network.segment(center).midpoint();
    for (double radius : {250.0, 500.0, 1000.0, 2000.0}) {
      std::vector<SegmentId> expected;
      for (const auto& s : network.segments()) {
        if (!s.sensorized) continue;
        const double dx = s.midpoint().x() - cm.x();
        const double dy = s.midpoint().y() - cm.y();
        if (std::sqrt(dx * dx + dy * dy) <= radius) expected.push_back(s.id);
      }
      std::sort(expected.begin(), expected.end());
      CHECK(net::segments_within(network, center, radius) == expected);
    }
  }

  TEST_CASE("segments_within is monotone in radius and keeps the center") {
    const auto network = net::build_synthetic_network(testutil::tiny_city(60, 5000.0), 23);
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
      const auto ids = network.sensorized_ids();
      const SegmentId center = ids[rng.below(ids.size())];
      std::vector<SegmentId> prev;
      for (double radius = 0.0; radius <= 8000.0; radius += 400.0) {
        const auto cur = net::segments_within(network, center, radius);
        CHECK(std::find(cur.begin(), cur.end(), center) != cur.end());
        CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        prev = cur;
      }
    }
  }

  TEST_CASE("segments_within rejects unknown centers and negative radii") {
    const auto network = net::build_synthetic_network(testutil::tiny_city(10), 2);
    CHECK_THROWS_AS(net::segments_within(network, 999, 100.0), LookupError);
    CHECK_THROWS_AS(net::segments_within(network, 0, -1.0), ConfigError);
  }

  TEST_CASE("json round trip is field-exact") {
    const auto network = net::build_synthetic_network(testutil::tiny_city(30), 3);
    const auto loaded = net::network_from_json(net::to_json(network));
    REQUIRE(loaded.segments().size() == network.segments().size());
    for (std::size_t i = 0; i < network.segments().size(); ++i) {
      const auto& a = network.segments()[i];
      const auto& b = loaded.segments()[i];
      CHECK(a.id == b.id);
      CHECK(a.a == b.a);
      CHECK(a.b == b.b);
      CHECK(a.direction == b.direction);
      CHECK(a.sensorized == b.sensorized);
      CHECK(a.mean_scale == b.mean_scale);
    }
    CHECK(loaded.access_roads() == network.access_roads());
  }

  TEST_CASE("duplicate ids are rejected") {
    auto j = net::to_json(net::build_synthetic_network(testutil::tiny_city(4), 1));
    j["segments"][1]["id"] = j["segments"][0]["id"];
    CHECK_THROWS_AS(net::network_from_json(j), ConfigError);
  }
}
