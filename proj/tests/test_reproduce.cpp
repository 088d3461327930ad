// Reproduction targets: canned scenarios whose simulated numbers are
// compared against the published testbed measurements, with pass/fail
// verdicts at the tolerances the project commits to.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "csdsim/reproduce.hpp"

using namespace csdsim;

namespace {

const ReproCheck& find_check(const ReproResult& r, const std::string& needle) {
  for (const auto& c : r.checks)
    if (c.name.find(needle) != std::string::npos) return c;
  FAIL("no check matching '" << needle << "' in target " << r.target);
  static ReproCheck dummy;
  return dummy;
}

}  // namespace

TEST_CASE("reproduction target registry") {
  REQUIRE(reproduce_targets() ==
          std::vector<std::string>{"fig4a", "fig4b", "fig4c", "table1"});
  REQUIRE_THROWS_AS(reproduce_target("fig9z"), ConfigError);
}

TEST_CASE("speech throughput curve hits both published endpoints") {
  ReproResult r = reproduce_target("fig4a");
  REQUIRE(r.target == "fig4a");
  REQUIRE(r.all_passed);
  REQUIRE(r.rows.size() == 12);

  // Drive-free baseline reports the measured end-to-end rate itself.
  REQUIRE(r.rows.front().csd_count == 0);
  REQUIRE(r.rows.front().throughput_items_per_s ==
          Catch::Approx(96.0).epsilon(1e-12));
  REQUIRE(r.rows.back().csd_count == 36);

  // The curve grows monotonically from 96 toward the rate sum.
  for (std::size_t i = 1; i < r.rows.size(); ++i)
    REQUIRE(r.rows[i].throughput_items_per_s >
            r.rows[i - 1].throughput_items_per_s);

  const auto& endpoint = find_check(r, "36-drive");
  REQUIRE(endpoint.reference == 296.0);
  REQUIRE(std::abs(endpoint.simulated - 296.0) <= 0.05 * 296.0);
}

TEST_CASE("recommender curve matches the published cluster gain") {
  ReproResult r = reproduce_target("fig4b");
  REQUIRE(r.all_passed);
  REQUIRE(r.rows.front().throughput_items_per_s ==
          Catch::Approx(579.0).epsilon(1e-12));
  const auto& endpoint = find_check(r, "36-drive");
  REQUIRE(endpoint.reference == 1506.0);
  REQUIRE(std::abs(endpoint.simulated - 1506.0) <= 0.05 * 1506.0);
}

TEST_CASE("sentiment batch sweep peaks at the published batch size") {
  ReproResult r = reproduce_target("fig4c");
  REQUIRE(r.all_passed);
  REQUIRE(r.rows.size() == 4);
  std::vector<std::int64_t> batches;
  for (const auto& row : r.rows) {
    batches.push_back(row.batch_size);
    REQUIRE(row.csd_count == 36);
  }
  REQUIRE(batches == std::vector<std::int64_t>{10000, 20000, 40000, 80000});

  const auto& best = find_check(r, "40k-batch");
  REQUIRE(best.reference == 20994.0);
  REQUIRE(std::abs(best.simulated - 20994.0) <= 0.10 * 20994.0);

  // Oversized batches starve the schedule: the 80k cell sits below 40k.
  REQUIRE(r.rows[3].throughput_items_per_s <
          r.rows[2].throughput_items_per_s);
  // Every drive-assisted cell beats the host-only best rate.
  for (const auto& row : r.rows)
    REQUIRE(row.throughput_items_per_s > 9496.0);
}

TEST_CASE("summary table reproduces speedups and energy cells") {
  ReproResult r = reproduce_target("table1");
  REQUIRE(r.all_passed);
  REQUIRE(r.rows.size() == 6);  // per workload: baseline then cluster run

  // Host-only baselines are rate-exact by construction.
  REQUIRE(r.rows[0].throughput_items_per_s ==
          Catch::Approx(96.0).epsilon(1e-12));
  REQUIRE(r.rows[2].throughput_items_per_s ==
          Catch::Approx(579.0).epsilon(1e-12));
  REQUIRE(r.rows[4].throughput_items_per_s ==
          Catch::Approx(9496.0).epsilon(1e-12));

  // Speech speedup vs the end-to-end baseline lands near the published 3.1.
  const auto& speedup = find_check(r, "speech_to_text speedup");
  REQUIRE(speedup.simulated > 2.8);
  REQUIRE(speedup.simulated < 3.2);
  REQUIRE(speedup.simulated > 3.0);

  // Energy cells recomputed from wall power and the published throughputs.
  struct Cell {
    const char* name;
    double printed;
  };
  for (const auto& [name, printed] :
       {Cell{"speech_to_text host-only mJ", 5021.0},
        Cell{"speech_to_text cluster mJ", 1662.0},
        Cell{"recommender host-only mJ", 832.0},
        Cell{"recommender cluster mJ", 327.0},
        Cell{"sentiment host-only mJ", 51.0},
        Cell{"sentiment cluster mJ", 23.0}}) {
    const auto& c = find_check(r, name);
    REQUIRE(c.reference == printed);
    REQUIRE(c.passed);
    // Printed cells are integer-rounded; the recomputation stays within
    // 1% or half a printed unit, whichever is wider.
    REQUIRE(std::abs(c.simulated - printed) <=
            std::max(0.01 * printed, 0.5));
  }
  for (const auto& [name, printed] :
       {Cell{"speech_to_text savings", 67.0},
        Cell{"recommender savings", 61.0},
        Cell{"sentiment savings", 54.0}}) {
    const auto& c = find_check(r, name);
    REQUIRE(std::abs(c.simulated - printed) <= 1.0);
  }
}

TEST_CASE("reproduction output is deterministic and well-formed") {
  ReproResult a = reproduce_target("fig4b");
  ReproResult b = reproduce_target("fig4b");
  REQUIRE(sweep_to_csv(a.rows) == sweep_to_csv(b.rows));
  REQUIRE(repro_report_text(a) == repro_report_text(b));

  std::string text = repro_report_text(a);
  REQUIRE(text.rfind("target fig4b", 0) == 0);
  REQUIRE(text.find("result: PASS") != std::string::npos);
  std::istringstream in(text);
  std::string line;
  int verdicts = 0;
  while (std::getline(in, line))
    if (line.rfind("  PASS", 0) == 0 || line.rfind("  FAIL", 0) == 0)
      ++verdicts;
  REQUIRE(verdicts == int(a.checks.size()));

  std::string csv = sweep_to_csv(a.rows);
  REQUIRE(csv.rfind("workload,csd_count,", 0) == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 13);

  std::string gp = repro_gnuplot(a, "fig4b.csv");
  REQUIRE(gp.find("fig4b.csv") != std::string::npos);
  REQUIRE(gp.find("plot") != std::string::npos);
  REQUIRE(gp.find("separator") != std::string::npos);
}
