#pragma once

// Energy accounting from the wall-power model: watts at a given engine
// count, millijoules per processed item, and savings against the host-only
// baseline.

#include "csdsim/errors.hpp"
#include "csdsim/topology.hpp"

namespace csdsim {

struct EnergyReport {
  double wall_power_w = 0.0;
  double energy_per_item_mj = 0.0;
  double normalized_to_host_only = 1.0;
  double savings_percent = 0.0;
};

// Active wall power with the given number of busy engines. The linear model
// is only trusted up to the population it was measured at.
inline double wall_power(const PowerModel& pm, int active_isp_count) {
  if (active_isp_count < 0 || active_isp_count > pm.num_csds_reference)
    throw DomainError("active engine count " +
                      std::to_string(active_isp_count) +
                      " outside the measured range [0, " +
                      std::to_string(pm.num_csds_reference) + "]");
  return pm.active_total_no_isp_w +
         double(active_isp_count) * pm.active_per_isp_w;
}

inline double energy_per_item_mj(double power_w, double throughput_items_per_s) {
  if (power_w < 0.0) throw DomainError("power must be >= 0");
  if (!(throughput_items_per_s > 0.0))
    throw DomainError("energy per item needs positive throughput");
  return power_w / throughput_items_per_s * 1000.0;
}

inline double savings_percent(double host_only_mj, double with_csd_mj) {
  if (!(host_only_mj > 0.0))
    throw DomainError("savings need a positive host-only baseline");
  if (with_csd_mj < 0.0) throw DomainError("energy must be >= 0");
  return (1.0 - with_csd_mj / host_only_mj) * 100.0;
}

// A host-only report normalizes to exactly 1.0: numerator and denominator
// are then the same expression over the same inputs.
inline EnergyReport make_energy_report(const PowerModel& pm,
                                       int active_isp_count,
                                       double throughput_items_per_s,
                                       double host_only_throughput) {
  EnergyReport r;
  r.wall_power_w = wall_power(pm, active_isp_count);
  r.energy_per_item_mj =
      energy_per_item_mj(r.wall_power_w, throughput_items_per_s);
  double host_mj =
      energy_per_item_mj(wall_power(pm, 0), host_only_throughput);
  r.normalized_to_host_only = r.energy_per_item_mj / host_mj;
  r.savings_percent = (1.0 - r.normalized_to_host_only) * 100.0;
  return r;
}

}  // namespace csdsim
