#pragma once

// Cluster shape: one host plus a set of computational drives, the data paths
// between them, and a wall-power model measured at the outlet.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "csdsim/errors.hpp"

namespace csdsim {

enum class NodeKind { Host, Csd };

// Which of the profile's rate tables governs a node. Defaults to the table
// matching the node kind.
enum class RateSource { HostRates, CsdRates };

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::Csd;
  RateSource rates = RateSource::CsdRates;
};

inline const char* to_string(NodeKind k) {
  return k == NodeKind::Host ? "host" : "csd";
}

inline NodeKind node_kind_from_string(const std::string& s) {
  if (s == "host") return NodeKind::Host;
  if (s == "csd") return NodeKind::Csd;
  throw ConfigError("unknown node kind '" + s + "'; expected host or csd");
}

// Sustained bandwidths in bytes/sec. Defaults describe the measured rig:
// NVMe fabric to the host, the drives' host-tunnel link, and the internal
// path an engine uses to read its own flash.
struct DataPathSpec {
  double nvme_host_bytes_per_sec = 3.2e9;
  double tunnel_bytes_per_sec = 100e6;
  double isp_internal_bytes_per_sec = 3.2e9;
};

// Wall power, decomposed into a chassis baseline, a per-drive idle increment,
// and a per-engine active increment. Increments are linear in the drive and
// engine counts up to num_csds_reference, the population the endpoints were
// measured at.
struct PowerModel {
  double idle_base_w = 167.0;
  double idle_per_csd_w = (405.0 - 167.0) / 36.0;
  double active_total_no_isp_w = 482.0;
  double active_per_isp_w = (492.0 - 482.0) / 36.0;
  int num_csds_reference = 36;
};

// Builds the linear model from the four measured endpoints: idle wall with
// no drives and with all reference drives, active wall with engines off and
// with all engines busy.
inline PowerModel make_power_model(double idle_base_w,
                                   double idle_with_drives_w,
                                   double active_no_isp_w,
                                   double active_all_isp_w,
                                   int num_csds_reference) {
  if (num_csds_reference < 1)
    throw DomainError("power model reference drive count must be positive");
  PowerModel pm;
  pm.idle_base_w = idle_base_w;
  pm.idle_per_csd_w =
      (idle_with_drives_w - idle_base_w) / double(num_csds_reference);
  pm.active_total_no_isp_w = active_no_isp_w;
  pm.active_per_isp_w =
      (active_all_isp_w - active_no_isp_w) / double(num_csds_reference);
  pm.num_csds_reference = num_csds_reference;
  return pm;
}

// Per-drive idle increment, (idle_with_drives - idle_base) / n. The value is
// fixed at construction; these accessors revalidate the reference count.
inline double derive_per_csd_idle(const PowerModel& pm) {
  if (pm.num_csds_reference < 1)
    throw DomainError("power model reference drive count must be positive");
  return pm.idle_per_csd_w;
}

// Per-engine active increment, (active_all_isp - active_no_isp) / n.
inline double derive_per_isp_active(const PowerModel& pm) {
  if (pm.num_csds_reference < 1)
    throw DomainError("power model reference drive count must be positive");
  return pm.active_per_isp_w;
}

struct ClusterConfig {
  std::vector<NodeSpec> nodes;  // registry order doubles as seeding order
  DataPathSpec paths;
  PowerModel power;
  int max_csds = 36;
};

inline int csd_count(const ClusterConfig& c) {
  int n = 0;
  for (const auto& node : c.nodes)
    if (node.kind == NodeKind::Csd) ++n;
  return n;
}

inline const std::string& host_id(const ClusterConfig& c) {
  for (const auto& node : c.nodes)
    if (node.kind == NodeKind::Host) return node.id;
  throw ConfigError("cluster has no host node");
}

inline void validate_cluster(const ClusterConfig& c) {
  int hosts = 0;
  std::unordered_set<std::string> ids;
  for (const auto& node : c.nodes) {
    if (node.id.empty()) throw ConfigError("node ids must not be empty");
    if (!ids.insert(node.id).second)
      throw ConfigError("duplicate node id '" + node.id + "'");
    if (node.kind == NodeKind::Host) ++hosts;
  }
  if (hosts != 1)
    throw ConfigError("cluster must have exactly one host node, found " +
                      std::to_string(hosts));
  if (c.max_csds < 0) throw ConfigError("max_csds must be >= 0");
  int drives = csd_count(c);
  if (drives > c.max_csds)
    throw ConfigError("csd_count " + std::to_string(drives) +
                      " exceeds max_csds " + std::to_string(c.max_csds));
  if (!(c.paths.nvme_host_bytes_per_sec > 0.0) ||
      !(c.paths.tunnel_bytes_per_sec > 0.0) ||
      !(c.paths.isp_internal_bytes_per_sec > 0.0))
    throw ConfigError("data path bandwidths must be positive");
  if (c.power.num_csds_reference < 1)
    throw ConfigError("power model reference drive count must be positive");
  if (c.power.idle_base_w < 0.0 || c.power.idle_per_csd_w < 0.0 ||
      c.power.active_total_no_isp_w < 0.0 || c.power.active_per_isp_w < 0.0)
    throw ConfigError("power model watts must be >= 0");
}

// One host named "host", then csdNN in ascending id order.
inline ClusterConfig make_cluster(int csds, DataPathSpec paths = {},
                                  PowerModel power = {}, int max_csds = 36) {
  if (csds < 0) throw ConfigError("csd_count must be >= 0");
  ClusterConfig c;
  c.paths = paths;
  c.power = power;
  c.max_csds = max_csds;
  c.nodes.push_back({"host", NodeKind::Host, RateSource::HostRates});
  int width = std::max(2, int(std::to_string(csds).size()));
  for (int i = 1; i <= csds; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "csd%0*d", width, i);
    c.nodes.push_back({buf, NodeKind::Csd, RateSource::CsdRates});
  }
  validate_cluster(c);
  return c;
}

namespace detail {

inline double json_number_at(const nlohmann::json& obj, const char* key,
                             double fallback, const std::string& ptr) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number())
    throw ConfigError(ptr + "/" + key + ": expected a number");
  return obj.at(key).get<double>();
}

}  // namespace detail

// Schema: {"csd_count": N, "max_csds"?, "paths"?: {...}, "power"?: {...}}.
// Unknown path or power keys are rejected so typos fail loudly.
inline ClusterConfig cluster_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("cluster: expected a json object");
  if (!j.contains("csd_count"))
    throw ConfigError("/csd_count: required field is missing");
  if (!j.at("csd_count").is_number_integer() ||
      j.at("csd_count").get<std::int64_t>() < 0)
    throw ConfigError("/csd_count: expected a non-negative integer");
  int csds = j.at("csd_count").get<int>();

  int max_csds = 36;
  if (j.contains("max_csds")) {
    if (!j.at("max_csds").is_number_integer())
      throw ConfigError("/max_csds: expected an integer");
    max_csds = j.at("max_csds").get<int>();
  }

  DataPathSpec paths;
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    if (!p.is_object()) throw ConfigError("/paths: expected an object");
    for (const auto& [key, value] : p.items()) {
      (void)value;
      if (key != "nvme_host_bytes_per_sec" && key != "tunnel_bytes_per_sec" &&
          key != "isp_internal_bytes_per_sec")
        throw ConfigError("/paths/" + key + ": unknown field");
    }
    paths.nvme_host_bytes_per_sec = detail::json_number_at(
        p, "nvme_host_bytes_per_sec", paths.nvme_host_bytes_per_sec, "/paths");
    paths.tunnel_bytes_per_sec = detail::json_number_at(
        p, "tunnel_bytes_per_sec", paths.tunnel_bytes_per_sec, "/paths");
    paths.isp_internal_bytes_per_sec =
        detail::json_number_at(p, "isp_internal_bytes_per_sec",
                               paths.isp_internal_bytes_per_sec, "/paths");
  }

  PowerModel power;
  if (j.contains("power")) {
    const auto& p = j.at("power");
    if (!p.is_object()) throw ConfigError("/power: expected an object");
    for (const auto& [key, value] : p.items()) {
      (void)value;
      if (key != "idle_base_w" && key != "idle_per_csd_w" &&
          key != "active_total_no_isp_w" && key != "active_per_isp_w" &&
          key != "num_csds_reference")
        throw ConfigError("/power/" + key + ": unknown field");
    }
    power.idle_base_w =
        detail::json_number_at(p, "idle_base_w", power.idle_base_w, "/power");
    power.idle_per_csd_w = detail::json_number_at(
        p, "idle_per_csd_w", power.idle_per_csd_w, "/power");
    power.active_total_no_isp_w = detail::json_number_at(
        p, "active_total_no_isp_w", power.active_total_no_isp_w, "/power");
    power.active_per_isp_w = detail::json_number_at(
        p, "active_per_isp_w", power.active_per_isp_w, "/power");
    if (p.contains("num_csds_reference")) {
      if (!p.at("num_csds_reference").is_number_integer())
        throw ConfigError("/power/num_csds_reference: expected an integer");
      power.num_csds_reference = p.at("num_csds_reference").get<int>();
    }
  }

  try {
    return make_cluster(csds, paths, power, max_csds);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("cluster: ") + e.what());
  }
}

inline ClusterConfig cluster_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("cluster json: ") + e.what());
  }
  return cluster_from_json(j);
}

}  // namespace csdsim
