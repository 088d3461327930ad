#pragma once

// Scenario files: one JSON document that names everything a command needs.
// The profile is either a builtin name, a path to a profile JSON (resolved
// against the scenario file's directory), or an inline profile object.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csdsim/errors.hpp"
#include "csdsim/scheduler.hpp"
#include "csdsim/topology.hpp"
#include "csdsim/workload.hpp"

namespace csdsim {

struct Scenario {
  WorkloadProfile profile;
  ClusterConfig cluster = make_cluster(0);
  SchedulerConfig scheduler;
  std::vector<std::int64_t> batch_sizes;  // sweep axis, empty = not a sweep
  std::vector<int> csd_counts;            // sweep axis
  std::string output_path;                // CSV destination, empty = stdout
};

namespace detail {

inline WorkloadProfile resolve_profile(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir) {
  if (j.is_object()) {
    try {
      return profile_from_json(j);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("/profile") + e.what());
    }
  }
  if (!j.is_string())
    throw ConfigError("/profile: expected a builtin name, a file path, or "
                      "an inline profile object");
  std::string ref = j.get<std::string>();
  for (const auto& name : builtin_profile_names())
    if (ref == name) return builtin_profile(ref);

  std::filesystem::path p = base_dir / ref;
  std::ifstream in(p);
  if (!in)
    throw ConfigError("/profile: '" + ref +
                      "' is neither a builtin profile nor a readable file");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return profile_from_json_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError("/profile (" + p.string() + "): " + e.what());
  }
}

inline std::vector<std::int64_t> int_array(const nlohmann::json& j,
                                           const std::string& ptr) {
  if (!j.is_array()) throw ConfigError(ptr + ": expected an array");
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer())
      throw ConfigError(ptr + "/" + std::to_string(i) +
                        ": expected an integer");
    out.push_back(j[i].get<std::int64_t>());
  }
  return out;
}

}  // namespace detail

inline Scenario scenario_from_json(
    const nlohmann::json& j,
    const std::filesystem::path& base_dir = ".") {
  if (!j.is_object()) throw ConfigError("scenario: expected a json object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "profile" && key != "cluster" && key != "scheduler" &&
        key != "sweep" && key != "output")
      throw ConfigError("/" + key + ": unknown field");
  }
  if (!j.contains("profile"))
    throw ConfigError("/profile: required field is missing");

  Scenario s;
  s.profile = detail::resolve_profile(j.at("profile"), base_dir);

  if (j.contains("cluster")) {
    try {
      s.cluster = cluster_from_json(j.at("cluster"));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("/cluster") + e.what());
    }
  }

  if (j.contains("scheduler")) {
    const auto& sch = j.at("scheduler");
    if (!sch.is_object()) throw ConfigError("/scheduler: expected an object");
    for (const auto& [key, value] : sch.items()) {
      (void)value;
      if (key != "csd_batch_size" && key != "batch_ratio" &&
          key != "poll_interval_s" && key != "host_assign_overhead_s")
        throw ConfigError("/scheduler/" + key + ": unknown field");
    }
    if (sch.contains("csd_batch_size")) {
      if (!sch.at("csd_batch_size").is_number_integer())
        throw ConfigError("/scheduler/csd_batch_size: expected an integer");
      s.scheduler.csd_batch_size = sch.at("csd_batch_size").get<std::int64_t>();
    }
    s.scheduler.batch_ratio = detail::json_number_at(
        sch, "batch_ratio", s.scheduler.batch_ratio, "/scheduler");
    s.scheduler.poll_interval_s = detail::json_number_at(
        sch, "poll_interval_s", s.scheduler.poll_interval_s, "/scheduler");
    s.scheduler.host_assign_overhead_s =
        detail::json_number_at(sch, "host_assign_overhead_s",
                               s.scheduler.host_assign_overhead_s,
                               "/scheduler");
    try {
      validate_scheduler_config(s.scheduler);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("/scheduler: ") + e.what());
    }
  }

  if (j.contains("sweep")) {
    const auto& sw = j.at("sweep");
    if (!sw.is_object()) throw ConfigError("/sweep: expected an object");
    for (const auto& [key, value] : sw.items()) {
      (void)value;
      if (key != "batch_sizes" && key != "csd_counts")
        throw ConfigError("/sweep/" + key + ": unknown field");
    }
    if (sw.contains("batch_sizes"))
      s.batch_sizes =
          detail::int_array(sw.at("batch_sizes"), "/sweep/batch_sizes");
    if (sw.contains("csd_counts"))
      for (std::int64_t v :
           detail::int_array(sw.at("csd_counts"), "/sweep/csd_counts"))
        s.csd_counts.push_back(int(v));
  }

  if (j.contains("output")) {
    if (!j.at("output").is_string())
      throw ConfigError("/output: expected a string");
    s.output_path = j.at("output").get<std::string>();
  }
  return s;
}

inline Scenario scenario_from_json_text(
    const std::string& text, const std::filesystem::path& base_dir = ".") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario json: ") + e.what());
  }
  return scenario_from_json(j, base_dir);
}

inline Scenario scenario_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open scenario file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return scenario_from_json_text(buf.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace csdsim
