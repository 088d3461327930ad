// Command-line front end: single runs, grid sweeps, batch-ratio
// calibration, published-result reproduction, and the live harness roles.
// Exit codes: 0 success, 1 usage, 2 configuration, 3 reproduction check
// failure, 4 harness runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csdsim/calibration.hpp"
#include "csdsim/harness.hpp"
#include "csdsim/reproduce.hpp"
#include "csdsim/scenario.hpp"
#include "csdsim/simulator.hpp"

namespace {

using namespace csdsim;

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw Error("short write to " + path.string());
}

// "HOST:PORT" with an IPv4 host part.
std::pair<std::string, int> parse_endpoint(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
    throw ConfigError("endpoint '" + s + "' is not HOST:PORT");
  int port = 0;
  try {
    port = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("endpoint '" + s + "' has a non-numeric port");
  }
  if (port < 0 || port > 65535)
    throw ConfigError("port " + std::to_string(port) + " is out of range");
  return {s.substr(0, colon), port};
}

nlohmann::json sim_report_to_json(const SimReport& r) {
  nlohmann::json per_node = nlohmann::json::array();
  for (const auto& [id, items] : r.per_node_items)
    per_node.push_back({{"node_id", id}, {"items", items}});
  return nlohmann::json{
      {"workload", r.workload},
      {"csd_count", r.csd_count},
      {"batch_size", r.batch_size},
      {"batch_ratio", r.batch_ratio},
      {"makespan_s", r.makespan_s},
      {"throughput_items_per_s", r.throughput_items_per_s},
      {"host_only_throughput", r.host_only_throughput},
      {"per_node_items", per_node},
      {"csd_fraction_ledger", r.csd_fraction_ledger},
      {"csd_fraction_paper", r.csd_fraction_paper},
      {"latency",
       {{"mean_s", r.latency.mean_s},
        {"p50_s", r.latency.p50_s},
        {"p95_s", r.latency.p95_s},
        {"max_s", r.latency.max_s}}},
      {"transfer",
       {{"bytes_input_to_host", r.transfer.bytes_input_to_host},
        {"bytes_retained_in_csd", r.transfer.bytes_retained_in_csd},
        {"bytes_output_to_host", r.transfer.bytes_output_to_host},
        {"bytes_to_host", bytes_to_host(r.transfer)},
        {"io_reduction_ratio", r.transfer.io_reduction_ratio},
        {"nvme_to_host_saturated", r.transfer.nvme_to_host_saturated},
        {"tunnel_saturated", r.transfer.tunnel_saturated}}},
      {"energy",
       {{"wall_power_w", r.energy.wall_power_w},
        {"energy_per_item_mj", r.energy.energy_per_item_mj},
        {"normalized_to_host_only", r.energy.normalized_to_host_only},
        {"savings_percent", r.energy.savings_percent}}}};
}

void print_sim_summary(const SimReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "workload %s: %d drives, batch %lld x %.6g\n",
                r.workload.c_str(), r.csd_count, (long long)r.batch_size,
                r.batch_ratio);
  std::fputs(buf, stdout);
  auto line = [&](const char* label, const char* fmt, auto... v) {
    std::snprintf(buf, sizeof buf, fmt, v...);
    std::printf("  %-22s %s\n", label, buf);
  };
  line("makespan", "%.6g s", r.makespan_s);
  double speedup = r.host_only_throughput > 0.0
                       ? r.throughput_items_per_s / r.host_only_throughput
                       : 1.0;
  line("throughput", "%.6g items/s (host only %.6g, speedup %.3g)",
       r.throughput_items_per_s, r.host_only_throughput, speedup);
  line("drive item share", "%.4g (time-derived form %.4g)",
       r.csd_fraction_ledger, r.csd_fraction_paper);
  line("latency", "mean %.6g / p50 %.6g / p95 %.6g / max %.6g s",
       r.latency.mean_s, r.latency.p50_s, r.latency.p95_s, r.latency.max_s);
  line("bytes to host", "%.6g (io reduction %.4g)", bytes_to_host(r.transfer),
       r.transfer.io_reduction_ratio);
  line("wall power", "%.6g W", r.energy.wall_power_w);
  line("energy per item", "%.6g mJ (%.4g%% below host-only)",
       r.energy.energy_per_item_mj, r.energy.savings_percent);
}

struct SimulateArgs {
  std::string scenario_path;
  std::string profile_name;
  int csds = 0;
  std::int64_t batch = 1;
  double ratio = 1.0;
  double poll_ms = 200.0;
  double overhead_s = 0.0;
  std::string ledger_path;
  bool as_json = false;
};

int cmd_simulate(const SimulateArgs& a, const CLI::App* sub) {
  WorkloadProfile profile;
  ClusterConfig cluster = make_cluster(0);
  SchedulerConfig cfg;
  if (!a.scenario_path.empty()) {
    Scenario sc = scenario_from_file(a.scenario_path);
    profile = sc.profile;
    cluster = sc.cluster;
    cfg = sc.scheduler;
    if (sub->count("--csds"))
      cluster = make_cluster(a.csds, cluster.paths, cluster.power,
                             cluster.max_csds);
    if (sub->count("--batch")) cfg.csd_batch_size = a.batch;
    if (sub->count("--ratio")) cfg.batch_ratio = a.ratio;
  } else {
    profile = builtin_profile(a.profile_name);
    cluster = make_cluster(a.csds);
    cfg.csd_batch_size = a.batch;
    cfg.batch_ratio = a.ratio;
  }
  if (sub->count("--poll-ms")) cfg.poll_interval_s = a.poll_ms / 1000.0;
  if (sub->count("--overhead-s")) cfg.host_assign_overhead_s = a.overhead_s;

  SimReport r = run(profile, cluster, cfg);
  if (!a.ledger_path.empty())
    write_text_file(a.ledger_path, ledger_to_csv(r.ledger));
  if (a.as_json)
    std::printf("%s\n", sim_report_to_json(r).dump(2).c_str());
  else
    print_sim_summary(r);
  return 0;
}

struct SweepArgs {
  std::string scenario_path;
  std::string output_path;
};

int cmd_sweep(const SweepArgs& a) {
  Scenario sc = scenario_from_file(a.scenario_path);
  auto rows =
      sweep(sc.profile, sc.cluster, sc.scheduler, sc.batch_sizes, sc.csd_counts);
  std::string csv = sweep_to_csv(rows);
  std::string dest = !a.output_path.empty() ? a.output_path : sc.output_path;
  if (dest.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_text_file(dest, csv);
    std::printf("wrote %zu rows to %s\n", rows.size(), dest.c_str());
  }
  return 0;
}

int cmd_calibrate(double host_rate, double csd_rate,
                  const std::string& policy) {
  BatchRatio r =
      calibrate_batch_ratio(host_rate, csd_rate, ratio_policy_from_string(policy));
  std::printf("host %.9g / csd %.9g = %.9g raw -> batch ratio %lld (%s)\n",
              host_rate, csd_rate, r.raw, (long long)r.ratio, policy.c_str());
  return 0;
}

struct ReproduceArgs {
  std::string target = "all";
  std::string outdir = ".";
  bool gnuplot = false;
};

int cmd_reproduce(const ReproduceArgs& a) {
  std::vector<std::string> targets;
  if (a.target == "all")
    targets = reproduce_targets();
  else
    targets.push_back(a.target);
  std::filesystem::create_directories(a.outdir);

  bool all_ok = true;
  for (const auto& name : targets) {
    ReproResult res = reproduce_target(name);
    auto base = std::filesystem::path(a.outdir);
    std::string csv_name = name + ".csv";
    write_text_file(base / csv_name, sweep_to_csv(res.rows));
    std::string report = repro_report_text(res);
    write_text_file(base / (name + "_report.txt"), report);
    if (a.gnuplot)
      write_text_file(base / (name + ".gp"), repro_gnuplot(res, csv_name));
    std::fputs(report.c_str(), stdout);
    all_ok = all_ok && res.all_passed;
  }
  return all_ok ? 0 : 3;
}

struct CoordinatorArgs {
  std::string listen = "127.0.0.1:0";
  int workers = 0;
  std::string profile_name = "speech_to_text";
  std::int64_t batch = 1;
  double ratio = 1.0;
  double poll_ms = 200.0;
  double overhead_s = 0.0;
  std::string workdir;
  double scale = 1.0;
  std::optional<std::int64_t> total;
  double timeout_s = 30.0;
  std::string report_path;
  std::string ledger_path;
};

int cmd_coordinator(const CoordinatorArgs& a) {
  if (!(a.scale > 0.0)) throw ConfigError("--scale must be positive");
  auto [host, port] = parse_endpoint(a.listen);
  CoordinatorOptions opt;
  opt.listen_host = host;
  opt.listen_port = port;
  opt.expected_workers = a.workers;
  opt.profile = builtin_profile(a.profile_name);
  opt.scheduler.csd_batch_size = a.batch;
  opt.scheduler.batch_ratio = a.ratio;
  opt.scheduler.poll_interval_s = a.poll_ms / 1000.0;
  opt.scheduler.host_assign_overhead_s = a.overhead_s;
  opt.total_items = a.total;
  opt.workdir = a.workdir;
  opt.worker_timeout_s = a.timeout_s;
  opt.on_listening = [](int bound) {
    std::printf("listening on %d\n", bound);
    std::fflush(stdout);
  };

  HarnessReport rep = coordinate(opt);
  nlohmann::json j = harness_report_to_json(rep);
  j["rate_scale"] = a.scale;
  std::printf("%s\n", j.dump(2).c_str());
  if (!a.report_path.empty()) write_text_file(a.report_path, j.dump(2) + "\n");
  if (!a.ledger_path.empty())
    write_text_file(a.ledger_path, ledger_to_csv(rep.ledger));
  if (!rep.valid) {
    std::fprintf(stderr, "harness run failed: %s\n", rep.error.c_str());
    return 4;
  }
  return 0;
}

struct WorkerArgs {
  std::string connect = "127.0.0.1:0";
  std::string id;
  std::string kind = "csd";
  std::string profile_name = "speech_to_text";
  std::int64_t batch = 1;
  double ratio = 1.0;
  double scale = 1.0;
  std::string workdir;
  std::string work_mode = "spin";
  double timeout_s = 30.0;
};

int cmd_worker(const WorkerArgs& a) {
  if (!(a.scale > 0.0)) throw ConfigError("--scale must be positive");
  auto [host, port] = parse_endpoint(a.connect);
  WorkloadProfile profile = builtin_profile(a.profile_name);
  SchedulerConfig cfg;
  cfg.csd_batch_size = a.batch;
  cfg.batch_ratio = a.ratio;
  validate_scheduler_config(cfg);

  WorkerOptions opt;
  opt.connect_host = host;
  opt.connect_port = port;
  opt.node_id = a.id;
  opt.kind = node_kind_from_string(a.kind);
  const RateTable& table =
      opt.kind == NodeKind::Host ? profile.host_rates : profile.csd_rates;
  opt.rate = rate_lookup(table, batch_size_for(cfg, opt.kind)) / a.scale;
  opt.workdir = a.workdir;
  opt.work_mode = a.work_mode == "sleep" ? WorkMode::Sleep : WorkMode::Spin;
  opt.io_timeout_s = a.timeout_s;

  WorkerResult res = worker_loop(opt);
  nlohmann::json j{{"node_id", res.node_id},
                   {"batches", res.batches},
                   {"items", res.items},
                   {"busy_s", res.busy_s},
                   {"rate_items_per_s", opt.rate},
                   {"error", res.error}};
  std::printf("%s\n", j.dump().c_str());
  return res.error.empty() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "csdsim: batch scheduling on host plus computational-storage clusters"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sub_sim = app.add_subcommand("simulate", "Run one configuration");
  sub_sim->add_option("--scenario", sim.scenario_path,
                      "Scenario JSON file (profile, cluster, scheduler)");
  sub_sim->add_option("--profile", sim.profile_name,
                      "Builtin workload profile name");
  sub_sim->add_option("--csds", sim.csds, "Drive count");
  sub_sim->add_option("--batch", sim.batch, "Drive batch size");
  sub_sim->add_option("--ratio", sim.ratio, "Host batch ratio");
  sub_sim->add_option("--poll-ms", sim.poll_ms, "Poll interval in ms");
  sub_sim->add_option("--overhead-s", sim.overhead_s,
                      "Host assignment overhead in seconds");
  sub_sim->add_option("--ledger", sim.ledger_path,
                      "Write the assignment ledger CSV here");
  sub_sim->add_flag("--json", sim.as_json, "Emit the full report as JSON");

  SweepArgs swp;
  auto* sub_swp = app.add_subcommand("sweep", "Run a scenario's sweep grid");
  sub_swp->add_option("--scenario", swp.scenario_path, "Scenario JSON file")
      ->required();
  sub_swp->add_option("--output", swp.output_path,
                      "CSV destination (overrides the scenario's)");

  double cal_host = 0.0, cal_csd = 0.0;
  std::string cal_policy = "round";
  auto* sub_cal = app.add_subcommand(
      "calibrate", "Quantize a host/drive rate ratio into a batch ratio");
  sub_cal->add_option("--host-rate", cal_host, "Host items/sec")
      ->required()
      ->check(CLI::PositiveNumber);
  sub_cal->add_option("--csd-rate", cal_csd, "Drive items/sec")
      ->required()
      ->check(CLI::PositiveNumber);
  sub_cal->add_option("--policy", cal_policy, "round, ceil, or floor")
      ->check(CLI::IsMember({"round", "ceil", "floor"}));

  ReproduceArgs rep;
  auto* sub_rep = app.add_subcommand(
      "reproduce", "Re-derive published testbed measurements and check them");
  sub_rep
      ->add_option("--target", rep.target,
                   "fig4a, fig4b, fig4c, table1, or all")
      ->check(CLI::IsMember({"fig4a", "fig4b", "fig4c", "table1", "all"}));
  sub_rep->add_option("--outdir", rep.outdir, "Directory for CSV and reports");
  sub_rep->add_flag("--gnuplot", rep.gnuplot, "Also write a gnuplot script");

  CoordinatorArgs coo;
  auto* sub_coo = app.add_subcommand(
      "harness-coordinator", "Drive live workers over the line protocol");
  sub_coo->add_option("--listen", coo.listen, "HOST:PORT (port 0 = pick one)");
  sub_coo->add_option("--workers", coo.workers, "Expected worker count")
      ->required()
      ->check(CLI::PositiveNumber);
  sub_coo->add_option("--profile", coo.profile_name, "Builtin profile name");
  sub_coo->add_option("--batch", coo.batch, "Drive batch size");
  sub_coo->add_option("--ratio", coo.ratio, "Host batch ratio");
  sub_coo->add_option("--poll-ms", coo.poll_ms, "Poll interval in ms");
  sub_coo->add_option("--overhead-s", coo.overhead_s,
                      "Host assignment overhead in seconds");
  sub_coo->add_option("--workdir", coo.workdir, "Shared handoff directory")
      ->required();
  sub_coo->add_option("--scale", coo.scale,
                      "Common rate divisor the workers were started with");
  std::int64_t coo_total = -1;
  sub_coo->add_option("--total", coo_total,
                      "Total items (default: the profile's dataset size)");
  sub_coo->add_option("--timeout", coo.timeout_s, "Worker timeout in seconds");
  sub_coo->add_option("--report", coo.report_path, "Write report JSON here");
  sub_coo->add_option("--ledger", coo.ledger_path, "Write live ledger CSV here");

  WorkerArgs wrk;
  auto* sub_wrk =
      app.add_subcommand("harness-worker", "Serve batches for a coordinator");
  sub_wrk->add_option("--connect", wrk.connect, "Coordinator HOST:PORT")
      ->required();
  sub_wrk->add_option("--id", wrk.id, "Node id (single token)")->required();
  sub_wrk->add_option("--kind", wrk.kind, "host or csd")
      ->check(CLI::IsMember({"host", "csd"}));
  sub_wrk->add_option("--profile", wrk.profile_name, "Builtin profile name");
  sub_wrk->add_option("--batch", wrk.batch, "Drive batch size");
  sub_wrk->add_option("--ratio", wrk.ratio, "Host batch ratio");
  sub_wrk->add_option("--scale", wrk.scale, "Common rate divisor");
  sub_wrk->add_option("--workdir", wrk.workdir, "Shared handoff directory")
      ->required();
  sub_wrk->add_option("--work-mode", wrk.work_mode, "spin or sleep")
      ->check(CLI::IsMember({"spin", "sleep"}));
  sub_wrk->add_option("--timeout", wrk.timeout_s, "Connect budget in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sub_sim->parsed()) return cmd_simulate(sim, sub_sim);
    if (sub_swp->parsed()) return cmd_sweep(swp);
    if (sub_cal->parsed()) return cmd_calibrate(cal_host, cal_csd, cal_policy);
    if (sub_rep->parsed()) return cmd_reproduce(rep);
    if (sub_coo->parsed()) {
      if (sub_coo->count("--total")) {
        if (coo_total < 0) throw ConfigError("--total must be >= 0");
        coo.total = coo_total;
      }
      return cmd_coordinator(coo);
    }
    if (sub_wrk->parsed()) return cmd_worker(wrk);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
