#pragma once

#include <stdexcept>
#include <string>

namespace csdsim {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid profile, cluster, or scheduler configuration, detected before any
// execution starts.
struct ConfigError : Error {
  using Error::Error;
};

// Violation of the ack/assign protocol: duplicate acks, acks while a batch is
// still in flight, malformed or unexpected wire messages.
struct ProtocolError : Error {
  using Error::Error;
};

// Byte accounting mismatch: per-node item counts do not partition the dataset.
struct AccountingError : Error {
  using Error::Error;
};

// Numeric precondition violation: zero throughput, out-of-range engine count,
// non-positive rates passed to a derivation.
struct DomainError : Error {
  using Error::Error;
};

}  // namespace csdsim
