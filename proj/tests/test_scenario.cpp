// Scenario files: JSON bundles naming a profile, a cluster, scheduler
// settings, and optional sweep axes for the command-line tools.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "csdsim/scenario.hpp"

using namespace csdsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("csdsim_scenario_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("scenario with a builtin profile and defaults") {
  auto s = scenario_from_json_text(R"({"profile": "speech_to_text"})");
  REQUIRE(s.profile.name == "speech_to_text");
  REQUIRE(s.profile.total_items == 225715);
  REQUIRE(csd_count(s.cluster) == 0);
  REQUIRE(s.scheduler.csd_batch_size == 1);
  REQUIRE(s.scheduler.poll_interval_s == 0.2);
  REQUIRE(s.batch_sizes.empty());
  REQUIRE(s.csd_counts.empty());
  REQUIRE(s.output_path.empty());
}

TEST_CASE("scenario carries cluster, scheduler, sweep axes and output") {
  auto s = scenario_from_json_text(R"({
    "profile": "recommender",
    "cluster": {"csd_count": 4},
    "scheduler": {"csd_batch_size": 6, "batch_ratio": 22.0,
                  "poll_interval_s": 0.1, "host_assign_overhead_s": 0.01},
    "sweep": {"batch_sizes": [2, 6, 10], "csd_counts": [0, 4]},
    "output": "grid.csv"
  })");
  REQUIRE(csd_count(s.cluster) == 4);
  REQUIRE(s.scheduler.csd_batch_size == 6);
  REQUIRE(s.scheduler.batch_ratio == 22.0);
  REQUIRE(s.scheduler.poll_interval_s == 0.1);
  REQUIRE(s.scheduler.host_assign_overhead_s == 0.01);
  REQUIRE(s.batch_sizes == std::vector<std::int64_t>{2, 6, 10});
  REQUIRE(s.csd_counts == std::vector<int>{0, 4});
  REQUIRE(s.output_path == "grid.csv");
}

TEST_CASE("scenario accepts an inline profile object") {
  auto s = scenario_from_json_text(R"({
    "profile": {
      "name": "tiny", "total_items": 10, "dataset_input_bytes": 1000.0,
      "avg_output_bytes_per_item": 5.0,
      "host_rates": [[1, 4.0]],
      "csd_rates": [[1, 1.0]]
    }
  })");
  REQUIRE(s.profile.name == "tiny");
  REQUIRE(s.profile.total_items == 10);
  REQUIRE(rate_lookup(s.profile.host_rates, 1) == 4.0);
}

TEST_CASE("scenario resolves a profile by file path") {
  TempDir tmp;
  {
    std::ofstream out(tmp.path / "custom.json");
    out << profile_to_json(builtin_profile("recommender")).dump();
  }
  {
    std::ofstream out(tmp.path / "scenario.json");
    out << R"({"profile": "custom.json", "cluster": {"csd_count": 2}})";
  }
  auto s = scenario_from_file(tmp.path / "scenario.json");
  REQUIRE(s.profile.name == "recommender");
  REQUIRE(s.profile.total_items == 58000);
  REQUIRE(csd_count(s.cluster) == 2);
}

TEST_CASE("scenario errors carry the failing location") {
  REQUIRE_THROWS_WITH(scenario_from_json_text(R"({})"),
                      Catch::Matchers::ContainsSubstring("/profile"));
  REQUIRE_THROWS_WITH(
      scenario_from_json_text(R"({"profile": "no_such_profile_anywhere"})"),
      Catch::Matchers::ContainsSubstring("no_such_profile_anywhere"));
  REQUIRE_THROWS_WITH(
      scenario_from_json_text(
          R"({"profile": "sentiment", "scheduler": {"cadence": 1}})"),
      Catch::Matchers::ContainsSubstring("/scheduler/cadence"));
  REQUIRE_THROWS_WITH(
      scenario_from_json_text(
          R"({"profile": "sentiment", "extras": true})"),
      Catch::Matchers::ContainsSubstring("/extras"));
  REQUIRE_THROWS_WITH(
      scenario_from_json_text(
          R"({"profile": "sentiment", "sweep": {"batch_sizes": ["a"]}})"),
      Catch::Matchers::ContainsSubstring("/sweep/batch_sizes"));
  REQUIRE_THROWS_WITH(
      scenario_from_json_text(
          R"({"profile": "sentiment", "scheduler": {"batch_ratio": 0.5}})"),
      Catch::Matchers::ContainsSubstring("batch_ratio"));
  REQUIRE_THROWS_AS(scenario_from_json_text("{nope"), ConfigError);
}

TEST_CASE("scenario file errors name the file") {
  REQUIRE_THROWS_WITH(
      scenario_from_file("/nonexistent/dir/scn.json"),
      Catch::Matchers::ContainsSubstring("scn.json"));
}
