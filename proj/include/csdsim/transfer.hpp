#pragma once

// Byte movement accounting. Items processed in storage keep their input
// bytes on the drive and ship only results over the host tunnel; items
// processed on the host pull their input bytes across the NVMe fabric.
// Processing rates already include each node's own IO, so bandwidth limits
// are checked after the fact and flagged rather than enforced.

#include <cstdint>

#include "csdsim/errors.hpp"
#include "csdsim/topology.hpp"
#include "csdsim/workload.hpp"

namespace csdsim {

struct TransferReport {
  double bytes_input_to_host = 0.0;
  double bytes_retained_in_csd = 0.0;
  double bytes_output_to_host = 0.0;
  double io_reduction_ratio = 0.0;  // retained share of the input dataset
  bool nvme_to_host_saturated = false;
  bool tunnel_saturated = false;
};

inline TransferReport account(const WorkloadProfile& profile,
                              std::int64_t host_items,
                              std::int64_t csd_items) {
  if (host_items < 0 || csd_items < 0 ||
      host_items + csd_items != profile.total_items)
    throw AccountingError(
        "item counts " + std::to_string(host_items) + " + " +
        std::to_string(csd_items) + " do not partition total " +
        std::to_string(profile.total_items));
  // Recomputed from the dataset so the two input shares sum exactly.
  double avg_in = profile.dataset_input_bytes / double(profile.total_items);
  TransferReport r;
  r.bytes_input_to_host = double(host_items) * avg_in;
  r.bytes_retained_in_csd = double(csd_items) * avg_in;
  r.bytes_output_to_host =
      double(csd_items) * profile.avg_output_bytes_per_item;
  r.io_reduction_ratio =
      profile.dataset_input_bytes > 0.0
          ? r.bytes_retained_in_csd / profile.dataset_input_bytes
          : 0.0;
  return r;
}

// Share of work the drives absorbed, inferred from throughput alone:
// (combined - host_only) / combined.
inline double csd_fraction_paper(double t_with, double t_host_only) {
  if (!(t_host_only > 0.0))
    throw DomainError("host-only throughput must be positive");
  if (t_with < t_host_only)
    throw DomainError("combined throughput below the host-only baseline");
  return (t_with - t_host_only) / t_with;
}

inline void apply_path_saturation(TransferReport& r, const DataPathSpec& paths,
                                  double makespan_s) {
  if (!(makespan_s > 0.0)) return;
  r.nvme_to_host_saturated =
      r.bytes_input_to_host / makespan_s > paths.nvme_host_bytes_per_sec;
  r.tunnel_saturated =
      r.bytes_output_to_host / makespan_s > paths.tunnel_bytes_per_sec;
}

}  // namespace csdsim
