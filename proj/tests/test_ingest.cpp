#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <doctest.h>

#include "fluxcast/ingest.hpp"
#include "fluxcast/rng.hpp"
#include "helpers.hpp"

using namespace fluxcast;

namespace {

/// Independently coded 3-sigma filter: Welford-style moments and an index
/// loop, sharing no code with ingest::clean_values.
std::vector<double> oracle_filter(const std::vector<double>& raw) {
  double mean = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double x : raw) {
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
  }
  const double sigma = std::sqrt(m2 / static_cast<double>(raw.size()));
  std::vector<double> kept;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (std::abs(raw[i] - mean) <= 3.0 * sigma) kept.push_back(raw[i]);
  }
  return kept;
}

std::vector<double> random_window(Rng& rng) {
  const std::size_t n = 1 + rng.below(24);
  std::vector<double> w(n);
  for (auto& v : w) {
    v = std::exp(rng.normal() * 0.4) * 100.0;
    if (rng.uniform01() < 0.08) v *= 5.0 + 10.0 * rng.uniform01();
  }
  return w;
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("zero-variance window keeps all values") {
    const std::vector<double> w{10, 10, 10, 10};
    CHECK(ingest::clean_values(w) == w);
  }

  TEST_CASE("a 5x spike among twelve values is filtered") {
    std::vector<double> w(11, 10.0);
    w.push_back(500.0);
    const ingest::CleaningWindow window{0, 0, w};
    const double m = window.m();
    const double sigma = window.sigma();
    CHECK(m == doctest::Approx(610.0 / 12.0).epsilon(1e-15));
    double ss = 0.0;
    for (double v : w) ss += (v - 610.0 / 12.0) * (v - 610.0 / 12.0);
    CHECK(sigma == doctest::Approx(std::sqrt(ss / 12.0)).epsilon(1e-15));
    CHECK(500.0 > m + 3.0 * sigma);
    CHECK(ingest::clean_window(window) == std::vector<double>(11, 10.0));
  }

  TEST_CASE("empty window is an error") {
    CHECK_THROWS_AS(ingest::clean_values({}), InputError);
    CHECK_THROWS_AS(ingest::clean_window({0, 0, {}}), InputError);
  }

  TEST_CASE("clean_values matches the independent oracle on random windows") {
    Rng rng(2024);
    for (int trial = 0; trial < 2000; ++trial) {
      const auto w = random_window(rng);
      CHECK(ingest::clean_values(w) == oracle_filter(w));
    }
  }

  TEST_CASE("cleaning an already-clean window removes nothing it kept") {
    Rng rng(515);
    for (int trial = 0; trial < 200; ++trial) {
      const auto w = random_window(rng);
      const auto once = ingest::clean_values(w);
      if (once.empty()) continue;
      const auto twice = ingest::clean_values(once);
      // subset property: everything surviving the second pass survived the first
      auto sorted_once = once;
      auto sorted_twice = twice;
      std::sort(sorted_once.begin(), sorted_once.end());
      std::sort(sorted_twice.begin(), sorted_twice.end());
      CHECK(std::includes(sorted_once.begin(), sorted_once.end(), sorted_twice.begin(),
                          sorted_twice.end()));
    }
  }

  TEST_CASE("permutation equivariance: the retained multiset is permuted, not changed") {
    Rng rng(616);
    for (int trial = 0; trial < 100; ++trial) {
      auto w = random_window(rng);
      auto kept1 = ingest::clean_values(w);
      rng.shuffle(w);
      auto kept2 = ingest::clean_values(w);
      std::sort(kept1.begin(), kept1.end());
      std::sort(kept2.begin(), kept2.end());
      CHECK(kept1 == kept2);
    }
  }

  TEST_CASE("scale equivariance") {
    Rng rng(717);
    const auto w = random_window(rng);
    const auto kept = ingest::clean_values(w);
    for (double k : {0.5, 2.0, 4.0}) {  // powers of two: exact
      auto scaled = w;
      for (auto& v : scaled) v *= k;
      const auto kept_scaled = ingest::clean_values(scaled);
      REQUIRE(kept_scaled.size() == kept.size());
      for (std::size_t i = 0; i < kept.size(); ++i) CHECK(kept_scaled[i] == kept[i] * k);
    }
    auto scaled = w;
    for (auto& v : scaled) v *= 3.0;
    const auto kept3 = ingest::clean_values(scaled);
    REQUIRE(kept3.size() == kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
      CHECK(kept3[i] == doctest::Approx(kept[i] * 3.0).epsilon(1e-12));
  }

  TEST_CASE("aggregate_hour: flux scaling and quality thresholds") {
    auto agg = ingest::aggregate_hour(std::vector<double>(12, 100.0), 12);
    CHECK(agg.flux == doctest::Approx(1200.0));
    CHECK(agg.quality == ingest::Quality::Ok);

    agg = ingest::aggregate_hour({}, 12);
    CHECK(agg.quality == ingest::Quality::Missing);
    CHECK(std::isnan(agg.flux));

    agg = ingest::aggregate_hour(std::vector<double>(4, 50.0), 12);
    CHECK(agg.flux == doctest::Approx(600.0));
    CHECK(agg.quality == ingest::Quality::Imputed);

    CHECK(ingest::aggregate_hour(std::vector<double>(6, 1.0), 12).quality ==
          ingest::Quality::Ok);
    CHECK(ingest::aggregate_hour(std::vector<double>(5, 1.0), 12).quality ==
          ingest::Quality::Imputed);
  }

  TEST_CASE("noiseless week reproduces the analytic hourly sums") {
    const auto network = net::build_synthetic_network(testutil::tiny_city(4), 21);
    const auto profile = synth::WeeklyProfile::standard();
    const auto cfg = testutil::quiet_synth({2016, 1, 4}, {2016, 1, 11});
    const auto data = synth::generate_all(network, profile, cfg);
    const HourRange range{hour_stamp({2016, 1, 4}), hour_stamp({2016, 1, 11})};
    ingest::IngestReport report;
    const auto series = ingest::build_series(data.records, network, range, {}, &report);
    CHECK(report.rows_rejected == 0);
    CHECK(report.hours_imputed == 0);

    for (const auto& seg : network.segments()) {
      if (seg.direction != net::Direction::Internal) continue;
      const auto& s = series.at(seg.id);
      REQUIRE(s.size() == 168);
      for (int h = 0; h < 168; ++h) {
        CHECK(s.values[static_cast<std::size_t>(h)] ==
              doctest::Approx(seg.mean_scale * profile.hourly_shape[h]).epsilon(1e-9));
        CHECK(s.quality[static_cast<std::size_t>(h)] == ingest::Quality::Ok);
      }
    }
  }

  TEST_CASE("a deleted hour is linearly interpolated and flagged") {
    const auto network = testutil::one_segment_net();
    const auto cfg = testutil::quiet_synth({2016, 1, 4}, {2016, 1, 11});
    auto data = synth::generate_all(network, synth::WeeklyProfile::standard(), cfg);
    const HourStamp h0 = hour_stamp({2016, 1, 4});
    const HourStamp gap = h0 + 50;
    std::erase_if(data.records, [&](const synth::FluxRecord& r) { return r.t_min / 60 == gap; });

    ingest::IngestReport report;
    const auto series = ingest::build_series(data.records, network,
                                             {h0, hour_stamp({2016, 1, 11})}, {}, &report);
    const auto& s = series.at(0);
    CHECK(report.hours_imputed == 1);
    CHECK(s.quality[50] == ingest::Quality::Imputed);
    CHECK(s.values[50] == doctest::Approx(0.5 * (s.values[49] + s.values[51])).epsilon(1e-12));
  }

  TEST_CASE("leading gaps take the week-hour mean") {
    const auto network = testutil::one_segment_net();
    const auto cfg = testutil::quiet_synth({2016, 1, 4}, {2016, 1, 18});  // two weeks
    auto data = synth::generate_all(network, synth::WeeklyProfile::standard(), cfg);
    const HourStamp h0 = hour_stamp({2016, 1, 4});
    std::erase_if(data.records,
                  [&](const synth::FluxRecord& r) { return r.t_min / 60 - h0 < 3; });

    const auto series =
        ingest::build_series(data.records, network, {h0, hour_stamp({2016, 1, 18})}, {});
    const auto& s = series.at(0);
    for (int h = 0; h < 3; ++h) {
      CHECK(s.quality[static_cast<std::size_t>(h)] == ingest::Quality::Imputed);
      // noiseless and weekly periodic: the week-hour mean is the other week's value
      CHECK(s.values[static_cast<std::size_t>(h)] ==
            doctest::Approx(s.values[static_cast<std::size_t>(h + 168)]).epsilon(1e-12));
    }
  }

  TEST_CASE("over 99 percent of injected outliers vanish from the cleaned series") {
    const auto network = testutil::one_segment_net();
    synth::SynthConfig cfg;
    cfg.start_date = {2016, 1, 4};
    cfg.end_date = {2016, 7, 4};
    cfg.outlier_rate = 0.01;
    cfg.seed = 41;
    const auto data = synth::generate_all(network, synth::WeeklyProfile::standard(), cfg);
    REQUIRE(data.outlier_indices.size() > 400);

    // replay each affected window through the cleaner and look for the spike
    std::map<std::int64_t, std::vector<double>> windows;
    for (const auto& r : data.records) windows[r.t_min / 60].push_back(r.count);
    std::size_t removed = 0;
    for (std::size_t idx : data.outlier_indices) {
      const auto& rec = data.records[idx];
      const auto kept = ingest::clean_values(windows.at(rec.t_min / 60));
      if (std::find(kept.begin(), kept.end(), rec.count) == kept.end()) ++removed;
    }
    const double frac =
        static_cast<double>(removed) / static_cast<double>(data.outlier_indices.size());
    CHECK(frac > 0.99);
  }

  TEST_CASE("unknown segments and malformed rows are rejected with context") {
    const auto network = testutil::one_segment_net();
    const HourStamp h0 = hour_stamp({2016, 1, 4});
    std::stringstream csv;
    csv << "timestamp,segment_id,count,velocity\n";
    csv << "2016-01-04T00:00:00Z,0,10,40\n";
    csv << "2016-01-04T00:05:00Z,7,10,40\n";       // unknown segment
    csv << "2016-01-04T00:10:00Z,0,ten,40\n";      // bad count
    csv << "garbage\n";                            // malformed
    csv << "2016-01-04T00:15:00Z,0,12,40\n";
    ingest::IngestReport report;
    const auto series =
        ingest::read_raw_csv(csv, network, {h0, h0 + 24}, {}, report);
    CHECK(report.rows_read == 5);
    CHECK(report.rows_rejected == 3);
    bool saw_line4 = false, saw_line5 = false, saw_unknown = false;
    for (const auto& msg : report.reject_samples) {
      saw_line4 |= msg.find("line 4") != std::string::npos;
      saw_line5 |= msg.find("line 5") != std::string::npos;
      saw_unknown |= msg.find("unknown") != std::string::npos;
    }
    CHECK(saw_line4);   // bad count field
    CHECK(saw_line5);   // malformed row
    CHECK(saw_unknown); // record naming an unknown segment
    CHECK(series.at(0).quality[0] == ingest::Quality::Imputed);  // 2 of 12 bins
  }

  TEST_CASE("series grid length is fixed regardless of data gaps") {
    const auto network = testutil::one_segment_net();
    const HourStamp h0 = hour_stamp({2016, 1, 4});
    const HourRange range{h0, h0 + 72};
    const auto series = ingest::build_series({}, network, range, {});
    REQUIRE(series.size() == 1);
    CHECK(series.at(0).size() == 72);
  }

  TEST_CASE("hourly csv round trips exactly") {
    const auto network = net::build_synthetic_network(testutil::tiny_city(3), 6);
    synth::SynthConfig cfg;
    cfg.start_date = {2016, 1, 4};
    cfg.end_date = {2016, 1, 6};
    cfg.seed = 19;
    const auto data = synth::generate_all(network, synth::WeeklyProfile::standard(), cfg);
    const HourRange range{hour_stamp(cfg.start_date), hour_stamp(cfg.end_date)};
    const auto series = ingest::build_series(data.records, network, range, {});

    std::stringstream buf;
    ingest::write_hourly_csv(buf, series);
    const auto loaded = ingest::read_hourly_csv(buf);
    REQUIRE(loaded.size() == series.size());
    for (const auto& [id, s] : series) {
      const auto& l = loaded.at(id);
      CHECK(l.t0 == s.t0);
      REQUIRE(l.values.size() == s.values.size());
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        CHECK(l.values[i] == s.values[i]);
        CHECK(l.quality[i] == s.quality[i]);
      }
    }
  }

  TEST_CASE("raw csv rows parse back to the same record") {
    std::stringstream buf;
    synth::write_raw_csv_header(buf);
    const synth::FluxRecord rec{hour_stamp({2016, 1, 4}) * 60 + 5, 3, 12.625, 44.25};
    synth::write_raw_csv_row(buf, rec);
    net::RoadSegment seg;
    seg.id = 3;
    seg.a = {0, 0};
    seg.b = {1, 0};
    seg.sensorized = true;
    seg.mean_scale = 1.0;
    const net::Network network({seg}, {});
    ingest::IngestReport report;
    const HourStamp h0 = hour_stamp({2016, 1, 4});
    ingest::SeriesBuilder builder(network, {h0, h0 + 24}, {});
    std::string line;
    std::getline(buf, line);  // header
    std::getline(buf, line);
    CHECK(line == "2016-01-04T00:05:00Z,3,12.625,44.25");
  }
}
