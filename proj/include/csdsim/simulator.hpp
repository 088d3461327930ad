#pragma once

// Discrete-event execution of the pull scheduler over a cluster. Two event
// kinds exist: batch completions and poll ticks. Order is total: time, then
// kind (completions before the tick that shares their timestamp), then a
// monotone sequence number, so runs are deterministic by construction.
//
// Nodes serve back to back: a batch's completion is
//   max(prev_completion + overhead + count / rate, assign_time),
// i.e. the measured per-batch rate absorbs handoff latency and a node is
// only ever idle when it has no work. The clamp keeps causality: nothing
// finishes before it is assigned, which caps a fast node at one batch per
// poll tick.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "csdsim/energy.hpp"
#include "csdsim/errors.hpp"
#include "csdsim/scheduler.hpp"
#include "csdsim/topology.hpp"
#include "csdsim/transfer.hpp"
#include "csdsim/workload.hpp"

namespace csdsim {

struct SimEvent {
  enum Kind { BatchComplete = 0, PollTick = 1 };
  double time = 0.0;
  Kind kind = BatchComplete;
  std::int64_t seq = 0;    // push order, breaks remaining ties
  std::int64_t index = 0;  // ledger row for completions, tick ordinal for ticks
};

inline bool sim_event_before(const SimEvent& a, const SimEvent& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.kind != b.kind) return a.kind < b.kind;
  return a.seq < b.seq;
}

// Comparator for std::priority_queue, which pops its greatest element.
struct SimEventAfter {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    return sim_event_before(b, a);
  }
};

struct LatencyStats {
  double mean_s = 0.0;
  double p50_s = 0.0;
  double p95_s = 0.0;
  double max_s = 0.0;
};

// Completion latency of one item, counted from its arrival at t = 0: queueing
// until its batch is assigned plus its position within the batch.
inline double item_latency(const BatchAssignment& a,
                           std::int64_t index_in_batch, double rate) {
  if (!(rate > 0.0)) throw DomainError("item latency requires a positive rate");
  if (index_in_batch < 0 || index_in_batch >= a.count)
    throw DomainError("item index " + std::to_string(index_in_batch) +
                      " outside batch of " + std::to_string(a.count));
  return a.assign_time + double(index_in_batch + 1) / rate;
}

struct SimReport {
  std::string workload;
  int csd_count = 0;
  std::int64_t batch_size = 0;
  double batch_ratio = 1.0;
  double makespan_s = 0.0;
  double throughput_items_per_s = 0.0;
  double host_only_throughput = 0.0;  // same batch config, host alone
  std::vector<std::pair<std::string, std::int64_t>> per_node_items;
  double csd_fraction_ledger = 0.0;  // share of items the drives processed
  double csd_fraction_paper = 0.0;   // 1 - host_only/with, signed
  LatencyStats latency;
  TransferReport transfer;
  EnergyReport energy;
  std::vector<BatchAssignment> ledger;
};

namespace detail {

struct RunCore {
  std::vector<BatchAssignment> ledger;
  double makespan_s = 0.0;
  // Seeding order (host first), with the rate each node ran at.
  std::vector<std::pair<std::string, double>> node_rates;
};

inline RunCore run_core(const WorkloadProfile& profile,
                        const std::vector<NodeSpec>& nodes,
                        const SchedulerConfig& cfg, std::int64_t total) {
  SchedulerState st(cfg, nodes, total);

  struct NodeRt {
    double rate = 1.0;
    double overhead = 0.0;
    double free_at = 0.0;  // completion time of the node's latest batch
  };
  std::vector<NodeRt> rt;
  std::unordered_map<std::string, std::size_t> index;
  RunCore out;
  for (const auto& spec : st.nodes()) {
    const RateTable& table = spec.rates == RateSource::HostRates
                                 ? profile.host_rates
                                 : profile.csd_rates;
    double rate = rate_lookup(table, batch_size_for(cfg, spec.kind));
    double ovh =
        spec.kind == NodeKind::Host ? cfg.host_assign_overhead_s : 0.0;
    index.emplace(spec.id, rt.size());
    rt.push_back({rate, ovh, 0.0});
    out.node_rates.emplace_back(spec.id, rate);
  }

  std::priority_queue<SimEvent, std::vector<SimEvent>, SimEventAfter> queue;
  std::int64_t seq = 0;
  auto push_completion = [&](const BatchAssignment& a) {
    NodeRt& n = rt[index.at(a.node_id)];
    double completion = std::max(
        n.free_at + n.overhead + double(a.count) / n.rate, a.assign_time);
    n.free_at = completion;
    queue.push({completion, SimEvent::BatchComplete, seq++, a.batch_id});
  };

  for (const auto& a : st.seed()) push_completion(a);
  if (!st.exhausted())
    queue.push({double(1) * cfg.poll_interval_s, SimEvent::PollTick, seq++, 1});

  while (!queue.empty()) {
    SimEvent ev = queue.top();
    queue.pop();
    if (ev.kind == SimEvent::BatchComplete) {
      // Copy: the drain below may reallocate the ledger.
      BatchAssignment a = st.assignments()[std::size_t(ev.index)];
      st.retire(a.node_id, a.batch_id);
      st.on_ack(a.node_id, ev.time);
      if (ev.time > out.makespan_s) out.makespan_s = ev.time;
    } else {
      for (const auto& a : st.on_poll_tick(ev.time)) push_completion(a);
      if (!st.exhausted())
        queue.push({double(ev.index + 1) * cfg.poll_interval_s,
                    SimEvent::PollTick, seq++, ev.index + 1});
    }
  }
  out.ledger = st.assignments();
  return out;
}

// Latencies from the ledger without materializing one value per item: the
// mean and max have closed forms per batch, percentiles either enumerate
// (small runs) or bisect on the per-batch counting function.
inline LatencyStats latency_from_ledger(
    const std::vector<BatchAssignment>& ledger,
    const std::unordered_map<std::string, double>& rate_of,
    std::int64_t total) {
  struct Span {
    double assign;
    double rate;
    std::int64_t count;
  };
  std::vector<Span> spans;
  spans.reserve(ledger.size());
  LatencyStats s;
  double sum = 0.0;
  for (const auto& a : ledger) {
    double rate = rate_of.at(a.node_id);
    spans.push_back({a.assign_time, rate, a.count});
    sum += double(a.count) * a.assign_time +
           (double(a.count) * double(a.count + 1) / 2.0) / rate;
    s.max_s = std::max(s.max_s, a.assign_time + double(a.count) / rate);
  }
  s.mean_s = sum / double(total);

  auto rank = [&](double q) {
    auto k = std::int64_t(std::ceil(q * double(total)));
    return std::clamp<std::int64_t>(k, 1, total);
  };

  if (total <= 65536) {
    std::vector<double> all;
    all.reserve(std::size_t(total));
    for (const auto& sp : spans)
      for (std::int64_t j = 0; j < sp.count; ++j)
        all.push_back(sp.assign + double(j + 1) / sp.rate);
    std::sort(all.begin(), all.end());
    s.p50_s = all[std::size_t(rank(0.50) - 1)];
    s.p95_s = all[std::size_t(rank(0.95) - 1)];
    return s;
  }

  // latency of item j in a batch is assign + (j+1)/rate, so the number of
  // items at or below x is sum over batches of floor((x - assign) * rate),
  // clamped to [0, count]. The k-th smallest latency is the least x whose
  // count reaches k; bisection pins it to a few ulps.
  auto count_le = [&](double x) {
    std::int64_t c = 0;
    for (const auto& sp : spans) {
      if (x < sp.assign) continue;
      double n = std::floor((x - sp.assign) * sp.rate);
      if (n >= double(sp.count))
        c += sp.count;
      else if (n > 0.0)
        c += std::int64_t(n);
    }
    return c;
  };
  auto percentile = [&](double q) {
    std::int64_t k = rank(q);
    double lo = 0.0, hi = s.max_s;
    for (int i = 0; i < 100; ++i) {
      double mid = 0.5 * (lo + hi);
      if (count_le(mid) >= k)
        hi = mid;
      else
        lo = mid;
    }
    return hi;
  };
  s.p50_s = percentile(0.50);
  s.p95_s = percentile(0.95);
  return s;
}

}  // namespace detail

inline SimReport run(const WorkloadProfile& profile,
                     const ClusterConfig& cluster,
                     const SchedulerConfig& cfg) {
  validate_profile(profile);
  validate_cluster(cluster);
  validate_scheduler_config(cfg);
  int csds = csd_count(cluster);
  if (csds > cluster.power.num_csds_reference)
    throw ConfigError("cluster has " + std::to_string(csds) +
                      " drives but the power model covers " +
                      std::to_string(cluster.power.num_csds_reference));

  std::int64_t total = profile.total_items;
  detail::RunCore core = detail::run_core(profile, cluster.nodes, cfg, total);

  SimReport r;
  r.workload = profile.name;
  r.csd_count = csds;
  r.batch_size = cfg.csd_batch_size;
  r.batch_ratio = cfg.batch_ratio;
  r.ledger = std::move(core.ledger);
  r.makespan_s = core.makespan_s;
  r.throughput_items_per_s = double(total) / r.makespan_s;

  std::unordered_map<std::string, std::int64_t> items;
  for (const auto& a : r.ledger) items[a.node_id] += a.count;
  std::int64_t host_items = 0, csd_items = 0;
  std::unordered_map<std::string, double> rate_of;
  for (const auto& [id, rate] : core.node_rates) {
    std::int64_t n = items.count(id) ? items.at(id) : 0;
    r.per_node_items.emplace_back(id, n);
    rate_of.emplace(id, rate);
    if (id == host_id(cluster))
      host_items += n;
    else
      csd_items += n;
  }
  r.csd_fraction_ledger = double(csd_items) / double(total);

  if (csds == 0) {
    r.host_only_throughput = r.throughput_items_per_s;
  } else {
    std::vector<NodeSpec> host_alone;
    for (const auto& n : cluster.nodes)
      if (n.kind == NodeKind::Host) host_alone.push_back(n);
    detail::RunCore base = detail::run_core(profile, host_alone, cfg, total);
    r.host_only_throughput = double(total) / base.makespan_s;
  }
  // Signed on purpose: negative flags configurations where the drives made
  // the run slower (a slow drive capturing the tail batch).
  r.csd_fraction_paper =
      csds == 0 ? 0.0
                : (r.throughput_items_per_s - r.host_only_throughput) /
                      r.throughput_items_per_s;

  r.latency = detail::latency_from_ledger(r.ledger, rate_of, total);
  r.transfer = account(profile, host_items, csd_items);
  apply_path_saturation(r.transfer, cluster.paths, r.makespan_s);
  r.energy = make_energy_report(cluster.power, csds, r.throughput_items_per_s,
                                r.host_only_throughput);
  return r;
}

inline double bytes_to_host(const TransferReport& t) {
  return t.bytes_input_to_host + t.bytes_output_to_host;
}

// Grid evaluation, batch-major: for each batch size, every drive count.
// Cells rebuild a standard cluster (one host plus n drives) from the base
// cluster's paths and power model.
inline std::vector<SimReport> sweep(const WorkloadProfile& profile,
                                    const ClusterConfig& base,
                                    const SchedulerConfig& cfg,
                                    const std::vector<std::int64_t>& batch_sizes,
                                    const std::vector<int>& csd_counts) {
  if (batch_sizes.empty() || csd_counts.empty())
    throw ConfigError("sweep needs at least one batch size and one drive count");
  std::vector<SimReport> out;
  out.reserve(batch_sizes.size() * csd_counts.size());
  for (std::int64_t b : batch_sizes)
    for (int n : csd_counts) {
      try {
        ClusterConfig cluster =
            make_cluster(n, base.paths, base.power, base.max_csds);
        SchedulerConfig cell = cfg;
        cell.csd_batch_size = b;
        out.push_back(run(profile, cluster, cell));
      } catch (const Error& e) {
        throw ConfigError(std::string(e.what()) + " (batch=" +
                          std::to_string(b) + ", csds=" + std::to_string(n) +
                          ")");
      }
    }
  return out;
}

inline constexpr const char* kSweepCsvHeader =
    "workload,csd_count,batch_size,batch_ratio,throughput_items_per_s,"
    "makespan_s,csd_fraction_ledger,csd_fraction_paper,mean_latency_s,"
    "p95_latency_s,bytes_to_host,energy_mj_per_item";

inline std::string sweep_to_csv(const std::vector<SimReport>& reports) {
  std::string out = kSweepCsvHeader;
  out += '\n';
  char buf[512];
  for (const auto& r : reports) {
    if (r.workload.find_first_of(",\n\"") != std::string::npos)
      throw ConfigError("workload name '" + r.workload +
                        "' cannot be rendered in CSV");
    std::snprintf(buf, sizeof buf,
                  "%s,%d,%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.0f,%.9g\n",
                  r.workload.c_str(), r.csd_count, (long long)r.batch_size,
                  r.batch_ratio, r.throughput_items_per_s, r.makespan_s,
                  r.csd_fraction_ledger, r.csd_fraction_paper,
                  r.latency.mean_s, r.latency.p95_s, bytes_to_host(r.transfer),
                  r.energy.energy_per_item_mj);
    out += buf;
  }
  return out;
}

}  // namespace csdsim
