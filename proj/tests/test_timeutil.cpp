#include <doctest.h>

#include "fluxcast/rng.hpp"
#include "fluxcast/timeutil.hpp"

using namespace fluxcast;

TEST_SUITE("timeutil") {
  TEST_CASE("civil date round trips across a leap year") {
    CHECK(days_from_civil({1970, 1, 1}) == 0);
    for (std::int64_t d = days_from_civil({2015, 12, 1}); d < days_from_civil({2017, 3, 1});
         ++d) {
      CHECK(days_from_civil(civil_from_days(d)) == d);
    }
    CHECK(civil_from_days(days_from_civil({2016, 2, 29})) == CivilDate{2016, 2, 29});
  }

  TEST_CASE("weekday and week_hour") {
    CHECK(weekday(CivilDate{1970, 1, 1}) == 3);  // Thursday
    CHECK(weekday(CivilDate{2016, 1, 4}) == 0);  // Monday
    CHECK(weekday(CivilDate{2016, 9, 19}) == 0);
    CHECK(week_hour(hour_stamp({2016, 1, 4})) == 0);
    CHECK(week_hour(hour_stamp({2016, 1, 4}, 8)) == 8);
    CHECK(week_hour(hour_stamp({2016, 1, 10}, 23)) == 167);  // Sunday 23:00
  }

  TEST_CASE("hour stamp round trips") {
    const HourStamp h = hour_stamp({2016, 7, 9}, 17);
    CHECK(date_of_hour(h) == CivilDate{2016, 7, 9});
    CHECK(hour_of_day(h) == 17);
  }

  TEST_CASE("iso formatting") {
    CHECK(iso_date({2016, 1, 4}) == "2016-01-04");
    CHECK(iso_hour(hour_stamp({2016, 1, 4}, 8)) == "2016-01-04T08:00:00Z");
    CHECK(iso_minute(hour_stamp({2016, 1, 4}) * 60 + 5) == "2016-01-04T00:05:00Z");
  }

  TEST_CASE("date parsing is strict") {
    CHECK(parse_date("2016-02-29") == CivilDate{2016, 2, 29});
    CHECK(!parse_date("2015-02-29"));
    CHECK(!parse_date("2016-13-01"));
    CHECK(!parse_date("2016-00-01"));
    CHECK(!parse_date("16-01-01"));
    CHECK(!parse_date("2016/01/01"));
  }

  TEST_CASE("iso minute parsing is strict") {
    const auto m = parse_iso_minute("2016-01-04T00:05:00Z");
    REQUIRE(m.has_value());
    CHECK(*m == hour_stamp({2016, 1, 4}) * 60 + 5);
    CHECK(iso_minute(*m) == "2016-01-04T00:05:00Z");
    CHECK(!parse_iso_minute("2016-01-04 00:05:00Z"));
    CHECK(!parse_iso_minute("2016-01-04T00:05:30Z"));
    CHECK(!parse_iso_minute("2016-01-04T24:05:00Z"));
    CHECK(!parse_iso_minute("2016-01-04T00:05:00"));
  }
}

TEST_SUITE("rng") {
  TEST_CASE("derived seeds differ by module, purpose and index") {
    const auto a = derive_seed(1, "synth", "segment", 0);
    CHECK(a != derive_seed(1, "synth", "segment", 1));
    CHECK(a != derive_seed(1, "synth", "latent", 0));
    CHECK(a != derive_seed(1, "network", "segment", 0));
    CHECK(a != derive_seed(2, "synth", "segment", 0));
    CHECK(a == derive_seed(1, "synth", "segment", 0));
  }

  TEST_CASE("streams are deterministic") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) {
      CHECK(a.uniform01() == b.uniform01());
      CHECK(a.normal() == b.normal());
    }
  }

  TEST_CASE("normal draws have roughly standard moments") {
    Rng rng(7);
    double sum = 0.0, ss = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double x = rng.normal();
      sum += x;
      ss += x * x;
    }
    const double mean = sum / n;
    const double var = ss / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
  }

  TEST_CASE("below stays in range and shuffle is deterministic") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
    std::vector<int> v1{1, 2, 3, 4, 5, 6}, v2 = v1;
    Rng r1(11), r2(11);
    r1.shuffle(v1);
    r2.shuffle(v2);
    CHECK(v1 == v2);
  }
}
