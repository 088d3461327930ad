#pragma once

// Host/drive batch-size ratio from two measured rates. The quotient is kept
// alongside the quantized ratio so callers can report how much rounding the
// policy introduced.

#include <cmath>
#include <cstdint>
#include <string>

#include "csdsim/errors.hpp"

namespace csdsim {

enum class RatioPolicy { Round, Ceil, Floor };

inline RatioPolicy ratio_policy_from_string(const std::string& s) {
  if (s == "round") return RatioPolicy::Round;
  if (s == "ceil") return RatioPolicy::Ceil;
  if (s == "floor") return RatioPolicy::Floor;
  throw ConfigError("unknown ratio policy '" + s +
                    "'; expected round, ceil, or floor");
}

struct BatchRatio {
  double raw = 1.0;        // host_rate / csd_rate before quantization
  std::int64_t ratio = 1;  // quantized, never below 1
};

inline BatchRatio calibrate_batch_ratio(double host_rate, double csd_rate,
                                        RatioPolicy policy) {
  if (!(host_rate > 0.0) || !(csd_rate > 0.0))
    throw DomainError("batch ratio calibration needs positive rates");
  BatchRatio r;
  r.raw = host_rate / csd_rate;
  double q = 0.0;
  switch (policy) {
    case RatioPolicy::Round: q = std::round(r.raw); break;
    case RatioPolicy::Ceil: q = std::ceil(r.raw); break;
    case RatioPolicy::Floor: q = std::floor(r.raw); break;
  }
  r.ratio = std::max<std::int64_t>(1, std::int64_t(q));
  return r;
}

}  // namespace csdsim
