#pragma once

// Pull scheduler: nodes ack when a batch is done, the ack doubles as a
// request, and a periodic poll services requests in arrival order. Batches
// never migrate; the tail of the item range is handed out truncated.
//
// This is a pure state machine. The simulator drives it with virtual tick
// times, the live harness with its wall-clock tick counter mapped onto the
// same k * poll_interval grid, so both produce ledgers in identical form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "csdsim/errors.hpp"
#include "csdsim/topology.hpp"

namespace csdsim {

struct SchedulerConfig {
  std::int64_t csd_batch_size = 1;     // items per drive batch
  double batch_ratio = 1.0;            // host batch = round(ratio * drive batch)
  double poll_interval_s = 0.2;        // scheduler wake period
  double host_assign_overhead_s = 0.0; // extra host latency per assignment
};

inline void validate_scheduler_config(const SchedulerConfig& cfg) {
  if (cfg.csd_batch_size < 1)
    throw ConfigError("csd_batch_size must be >= 1");
  if (!(cfg.batch_ratio >= 1.0))
    throw ConfigError("batch_ratio must be >= 1");
  if (!(cfg.poll_interval_s > 0.0))
    throw ConfigError("poll_interval_s must be positive");
  if (cfg.host_assign_overhead_s < 0.0)
    throw ConfigError("host_assign_overhead_s must be >= 0");
}

inline std::int64_t batch_size_for(const SchedulerConfig& cfg, NodeKind kind) {
  if (kind == NodeKind::Csd) return cfg.csd_batch_size;
  return std::max<std::int64_t>(
      1, std::llround(cfg.batch_ratio * double(cfg.csd_batch_size)));
}

struct BatchAssignment {
  std::int64_t batch_id = 0;     // issuance order, dense from 0
  std::string node_id;
  std::int64_t start_index = 0;  // first item of the half-open range
  std::int64_t count = 0;        // always >= 1
  double assign_time = 0.0;      // poll-tick multiple, except 0 at seeding
};

class SchedulerState {
 public:
  SchedulerState(SchedulerConfig cfg, std::vector<NodeSpec> nodes,
                 std::int64_t total_items)
      : m_cfg(cfg), m_total(total_items) {
    validate_scheduler_config(cfg);
    if (total_items < 1) throw ConfigError("total_items must be >= 1");
    if (nodes.empty()) throw ConfigError("scheduler needs at least one node");
    // Seeding order: host first, then the rest in registry order.
    for (const auto& n : nodes)
      if (n.kind == NodeKind::Host) m_nodes.push_back(n);
    for (const auto& n : nodes)
      if (n.kind != NodeKind::Host) m_nodes.push_back(n);
    for (const auto& n : m_nodes) {
      if (!m_kinds.emplace(n.id, n.kind).second)
        throw ConfigError("duplicate node id '" + n.id + "'");
    }
  }

  // Every node is treated as having just acked at t = 0 and is served
  // immediately; the only assignments not stamped on the poll grid.
  std::vector<BatchAssignment> seed() {
    if (m_seeded) throw ProtocolError("scheduler already seeded");
    m_seeded = true;
    for (const auto& n : m_nodes) m_pending.push_back(n.id);
    return drain_(0.0);
  }

  // Marks the node's in-flight batch complete. Must precede its ack.
  void retire(const std::string& node_id, std::int64_t batch_id) {
    auto it = m_outstanding.find(node_id);
    if (it == m_outstanding.end())
      throw ProtocolError("retire from node '" + node_id +
                          "' with no batch in flight");
    if (it->second != batch_id)
      throw ProtocolError("retire of batch " + std::to_string(batch_id) +
                          " from node '" + node_id + "' but batch " +
                          std::to_string(it->second) + " is in flight");
    m_outstanding.erase(it);
  }

  // Enqueues a request. A node may not request while its batch is still in
  // flight, nor request twice.
  void on_ack(const std::string& node_id, double time) {
    (void)time;  // arrival order carries all scheduling information
    if (!m_kinds.count(node_id))
      throw ProtocolError("ack from unknown node '" + node_id + "'");
    if (m_outstanding.count(node_id))
      throw ProtocolError("ack from node '" + node_id +
                          "' while its batch is in flight");
    if (std::find(m_pending.begin(), m_pending.end(), node_id) !=
        m_pending.end())
      throw ProtocolError("duplicate ack from node '" + node_id + "'");
    m_pending.push_back(node_id);
  }

  // Services pending requests in FIFO order. Time must sit on the poll grid.
  std::vector<BatchAssignment> on_poll_tick(double time) {
    double k = time / m_cfg.poll_interval_s;
    if (!(time > 0.0) ||
        std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, std::abs(k)))
      throw ProtocolError("poll tick at " + std::to_string(time) +
                          " is not a multiple of the poll interval");
    return drain_(time);
  }

  bool exhausted() const { return m_exhausted; }
  std::int64_t next_index() const { return m_next; }
  std::int64_t total_items() const { return m_total; }
  const SchedulerConfig& config() const { return m_cfg; }
  const std::vector<NodeSpec>& nodes() const { return m_nodes; }
  const std::vector<BatchAssignment>& assignments() const { return m_ledger; }
  const std::deque<std::string>& pending_acks() const { return m_pending; }
  bool has_outstanding(const std::string& node_id) const {
    return m_outstanding.count(node_id) != 0;
  }

 private:
  std::vector<BatchAssignment> drain_(double time) {
    std::vector<BatchAssignment> out;
    while (!m_pending.empty()) {
      std::string node = std::move(m_pending.front());
      m_pending.pop_front();
      if (m_exhausted) continue;  // drained, receives nothing
      std::int64_t want = batch_size_for(m_cfg, m_kinds.at(node));
      std::int64_t count = std::min(want, m_total - m_next);
      BatchAssignment a{m_next_batch_id++, node, m_next, count, time};
      m_next += count;
      if (m_next == m_total) m_exhausted = true;
      m_outstanding.emplace(a.node_id, a.batch_id);
      m_ledger.push_back(a);
      out.push_back(std::move(a));
    }
    return out;
  }

  SchedulerConfig m_cfg;
  std::int64_t m_total = 0;
  std::vector<NodeSpec> m_nodes;
  std::unordered_map<std::string, NodeKind> m_kinds;
  std::deque<std::string> m_pending;
  std::unordered_map<std::string, std::int64_t> m_outstanding;
  std::vector<BatchAssignment> m_ledger;
  std::int64_t m_next = 0;
  std::int64_t m_next_batch_id = 0;
  bool m_exhausted = false;
  bool m_seeded = false;
};

inline std::string ledger_to_csv(const std::vector<BatchAssignment>& ledger) {
  std::string csv = "batch_id,node_id,start_index,count,assign_time\n";
  char buf[160];
  for (const auto& a : ledger) {
    std::snprintf(buf, sizeof buf, "%lld,%s,%lld,%lld,%.9g\n",
                  (long long)a.batch_id, a.node_id.c_str(),
                  (long long)a.start_index, (long long)a.count, a.assign_time);
    csv += buf;
  }
  return csv;
}

// Checks the ledger covers [0, total) contiguously with positive counts.
inline void verify_ledger_partition(const std::vector<BatchAssignment>& ledger,
                                    std::int64_t total) {
  std::vector<const BatchAssignment*> sorted;
  sorted.reserve(ledger.size());
  for (const auto& a : ledger) sorted.push_back(&a);
  std::sort(sorted.begin(), sorted.end(),
            [](const BatchAssignment* a, const BatchAssignment* b) {
              return a->start_index < b->start_index;
            });
  std::int64_t expect = 0;
  for (const auto* a : sorted) {
    if (a->count < 1)
      throw ProtocolError("ledger batch " + std::to_string(a->batch_id) +
                          " has count " + std::to_string(a->count));
    if (a->start_index != expect)
      throw ProtocolError("ledger gap: expected start " +
                          std::to_string(expect) + ", found " +
                          std::to_string(a->start_index));
    expect = a->start_index + a->count;
  }
  if (expect != total)
    throw ProtocolError("ledger covers " + std::to_string(expect) +
                        " items of " + std::to_string(total));
}

}  // namespace csdsim
