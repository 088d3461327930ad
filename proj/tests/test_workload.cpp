#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "csdsim/workload.hpp"

using namespace csdsim;

namespace {

// Independent interpolation oracle: linear scan plus log10-space blend,
// written against the contract, not the implementation.
double lookup_oracle(const std::vector<RatePoint>& pts, std::int64_t batch) {
  if (batch <= pts.front().batch_size) return pts.front().items_per_sec;
  if (batch >= pts.back().batch_size) return pts.back().items_per_sec;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (batch == pts[i].batch_size) return pts[i].items_per_sec;
    if (batch > pts[i].batch_size && batch < pts[i + 1].batch_size) {
      double span = std::log10(double(pts[i + 1].batch_size)) -
                    std::log10(double(pts[i].batch_size));
      double t = (std::log10(double(batch)) -
                  std::log10(double(pts[i].batch_size))) /
                 span;
      return pts[i].items_per_sec +
             t * (pts[i + 1].items_per_sec - pts[i].items_per_sec);
    }
  }
  return pts.back().items_per_sec;
}

}  // namespace

TEST_CASE("rate table construction validates entries") {
  REQUIRE_THROWS_AS(RateTable(std::vector<RatePoint>{}), ConfigError);
  REQUIRE_THROWS_AS(RateTable({{4, 10.0}, {4, 12.0}}), ConfigError);
  REQUIRE_THROWS_AS(RateTable({{8, 10.0}, {4, 12.0}}), ConfigError);
  REQUIRE_THROWS_AS(RateTable({{1, 0.0}}), ConfigError);
  REQUIRE_THROWS_AS(RateTable({{1, -3.0}}), ConfigError);
  REQUIRE_THROWS_AS(RateTable({{0, 5.0}}), ConfigError);
  REQUIRE_NOTHROW(RateTable({{1, 5.0}, {10, 6.0}}));
}

TEST_CASE("single-entry tables are flat at every batch size") {
  RateTable t({{1, 102.0}});
  REQUIRE(rate_lookup(t, 1) == 102.0);
  REQUIRE(rate_lookup(t, 6) == 102.0);
  REQUIRE(rate_lookup(t, 1000000) == 102.0);
}

TEST_CASE("lookup interpolates linearly in log batch space") {
  RateTable t({{1000, 100.0}, {100000, 300.0}});
  // 10000 sits at the log midpoint of [1000, 100000].
  REQUIRE(rate_lookup(t, 10000) == Catch::Approx(200.0).margin(1e-9));
  // Exact knots return exact rates.
  REQUIRE(rate_lookup(t, 1000) == 100.0);
  REQUIRE(rate_lookup(t, 100000) == 300.0);
  // Clamped flat outside the covered range.
  REQUIRE(rate_lookup(t, 10) == 100.0);
  REQUIRE(rate_lookup(t, 5000000) == 300.0);
  REQUIRE_THROWS_AS(rate_lookup(t, 0), DomainError);
}

TEST_CASE("lookup matches the independent oracle on random tables") {
  std::mt19937_64 rng(20411);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RatePoint> pts;
    std::int64_t batch = 1 + std::int64_t(rng() % 50);
    int n = 1 + int(rng() % 6);
    double rate = 1.0 + double(rng() % 1000) / 7.0;
    for (int i = 0; i < n; ++i) {
      pts.push_back({batch, rate});
      batch += 1 + std::int64_t(rng() % 5000);
      rate = 1.0 + double(rng() % 1000) / 7.0;
    }
    RateTable t(pts);
    for (int probe = 0; probe < 20; ++probe) {
      std::int64_t b = 1 + std::int64_t(rng() % (pts.back().batch_size + 100));
      double got = rate_lookup(t, b);
      double want = lookup_oracle(pts, b);
      REQUIRE(got == Catch::Approx(want).margin(1e-9));
      REQUIRE(got > 0.0);
    }
  }
}

TEST_CASE("monotone tables produce monotone lookups") {
  RateTable t({{100, 80.0}, {1000, 150.0}, {10000, 300.0}, {40000, 364.0}});
  double prev = 0.0;
  for (std::int64_t b = 1; b <= 80000; b += 997) {
    double r = rate_lookup(t, b);
    REQUIRE(r >= prev);
    prev = r;
  }
}

TEST_CASE("profile arithmetic ties bytes to items") {
  auto p = make_profile("tiny", 1000, 123456.0, 7.0, RateTable({{1, 10.0}}),
                        RateTable({{1, 2.0}}));
  REQUIRE(p.avg_input_bytes_per_item == Catch::Approx(123.456));
  REQUIRE(p.avg_input_bytes_per_item * double(p.total_items) ==
          Catch::Approx(p.dataset_input_bytes).epsilon(0.01));
  REQUIRE_NOTHROW(validate_profile(p));

  auto bad = p;
  bad.avg_input_bytes_per_item = 999.0;
  REQUIRE_THROWS_AS(validate_profile(bad), ConfigError);
  bad = p;
  bad.total_items = 0;
  REQUIRE_THROWS_AS(validate_profile(bad), ConfigError);
}

TEST_CASE("builtin speech profile carries the measured operating points") {
  auto p = builtin_profile("speech_to_text");
  REQUIRE(p.total_items == 225715);
  REQUIRE(p.dataset_input_bytes == 3.8e9);
  REQUIRE(rate_lookup(p.host_rates, 6) == 102.0);
  REQUIRE(rate_lookup(p.csd_rates, 6) == 5.3);
  REQUIRE(p.host_end_to_end_rate.has_value());
  REQUIRE(*p.host_end_to_end_rate == 96.0);
  // Output text is about 1.2 MB for the whole dataset.
  REQUIRE(p.avg_output_bytes_per_item * double(p.total_items) ==
          Catch::Approx(1.2e6).epsilon(1e-6));
  REQUIRE_NOTHROW(validate_profile(p));
}

TEST_CASE("builtin recommender profile derives the per-engine rate") {
  auto p = builtin_profile("recommender");
  REQUIRE(p.total_items == 58000);
  REQUIRE(rate_lookup(p.host_rates, 6) == 579.0);
  // Backed out of the measured 36-engine cluster gain.
  double derived = (1506.0 - 579.0) / 36.0;
  REQUIRE(rate_lookup(p.csd_rates, 6) == derived);
  REQUIRE(derived == 25.75);
  REQUIRE_FALSE(p.host_end_to_end_rate.has_value());
  REQUIRE_NOTHROW(validate_profile(p));
}

TEST_CASE("builtin sentiment profile anchors its best operating points") {
  auto p = builtin_profile("sentiment");
  REQUIRE(p.total_items == 8000000);
  REQUIRE(rate_lookup(p.csd_rates, 40000) == 364.0);
  REQUIRE(rate_lookup(p.host_rates, 26 * 40000) == 9496.0);
  // Batch ratio from the two best single-node rates rounds to 26.
  REQUIRE(std::llround(9496.0 / 364.0) == 26);
  REQUIRE_NOTHROW(validate_profile(p));
}

TEST_CASE("unknown builtin names fail with the known list") {
  REQUIRE_THROWS_WITH(builtin_profile("nope"),
                      Catch::Matchers::ContainsSubstring("speech_to_text"));
  REQUIRE_THROWS_AS(builtin_profile("nope"), ConfigError);
}

TEST_CASE("profiles round-trip through json unchanged") {
  for (const auto& name : builtin_profile_names()) {
    auto p = builtin_profile(name);
    auto q = profile_from_json(profile_to_json(p));
    REQUIRE(q.name == p.name);
    REQUIRE(q.total_items == p.total_items);
    REQUIRE(q.dataset_input_bytes == p.dataset_input_bytes);
    REQUIRE(q.avg_input_bytes_per_item == p.avg_input_bytes_per_item);
    REQUIRE(q.avg_output_bytes_per_item == p.avg_output_bytes_per_item);
    REQUIRE(q.host_end_to_end_rate == p.host_end_to_end_rate);
    REQUIRE(q.host_rates.points().size() == p.host_rates.points().size());
    for (std::size_t i = 0; i < p.host_rates.points().size(); ++i) {
      REQUIRE(q.host_rates.points()[i].batch_size ==
              p.host_rates.points()[i].batch_size);
      REQUIRE(q.host_rates.points()[i].items_per_sec ==
              p.host_rates.points()[i].items_per_sec);
    }
    REQUIRE(q.csd_rates.points().size() == p.csd_rates.points().size());
  }
}

TEST_CASE("profile json validation names the offending field") {
  REQUIRE_THROWS_WITH(profile_from_json_text("{\"name\": \"x\"}"),
                      Catch::Matchers::ContainsSubstring("total_items"));
  REQUIRE_THROWS_WITH(
      profile_from_json_text(
          "{\"name\": \"x\", \"total_items\": -4, \"dataset_input_bytes\": 1,"
          " \"avg_output_bytes_per_item\": 1, \"host_rates\": [[1, 1.0]],"
          " \"csd_rates\": [[1, 1.0]]}"),
      Catch::Matchers::ContainsSubstring("/total_items"));
  REQUIRE_THROWS_WITH(
      profile_from_json_text(
          "{\"name\": \"x\", \"total_items\": 4, \"dataset_input_bytes\": 1,"
          " \"avg_output_bytes_per_item\": 1, \"host_rates\": [[1]],"
          " \"csd_rates\": [[1, 1.0]]}"),
      Catch::Matchers::ContainsSubstring("/host_rates/0"));
  // Syntax errors surface the parser's line and column.
  REQUIRE_THROWS_WITH(profile_from_json_text("{\n  \"name\": }"),
                      Catch::Matchers::ContainsSubstring("line 2"));
}
