#pragma once

// Line protocol between the harness coordinator and its workers. One message
// per line, fields space-separated in fixed order, numbers decimal. A peer
// that receives a line this parser rejects answers with an ERR line.

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "csdsim/errors.hpp"
#include "csdsim/topology.hpp"

namespace csdsim {

struct WireMessage {
  enum Kind { Hello, Ack, Assign, Drain, StatsReq, Stats, Err };
  Kind kind = Err;
  std::string node_id;                  // HELLO, ACK
  NodeKind node_kind = NodeKind::Csd;   // HELLO
  double rate = 0.0;                    // HELLO, declared items/sec
  std::optional<std::int64_t> batch_id; // ACK (none = initial request), ASSIGN
  std::int64_t start_index = 0;         // ASSIGN
  std::int64_t count = 0;               // ASSIGN
  std::string text;                     // STATS payload, ERR message
};

inline std::string encode_hello(const std::string& node_id, NodeKind kind,
                                double rate) {
  char buf[64];
  std::snprintf(buf, sizeof buf, " %s %.9g",
                kind == NodeKind::Host ? "host" : "csd", rate);
  return "HELLO " + node_id + buf;
}

inline std::string encode_ack(const std::string& node_id,
                              std::optional<std::int64_t> batch_id) {
  if (!batch_id) return "ACK " + node_id + " none";
  return "ACK " + node_id + " " + std::to_string(*batch_id);
}

inline std::string encode_assign(std::int64_t batch_id,
                                 std::int64_t start_index,
                                 std::int64_t count) {
  return "ASSIGN " + std::to_string(batch_id) + " " +
         std::to_string(start_index) + " " + std::to_string(count);
}

inline std::string encode_drain() { return "DRAIN"; }
inline std::string encode_stats_req() { return "STATS_REQ"; }

// payload must be a single line (typically compact JSON).
inline std::string encode_stats(const std::string& payload) {
  return "STATS " + payload;
}

inline std::string encode_err(const std::string& message) {
  return "ERR " + message;
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    std::size_t j = line.find(' ', i);
    if (j == std::string::npos) j = line.size();
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

inline std::int64_t wire_int(const std::string& s, const char* what) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end == s.c_str() || *end != '\0')
    throw ProtocolError(std::string(what) + " '" + s + "' is not an integer");
  return v;
}

inline double wire_number(const std::string& s, const char* what) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end == s.c_str() || *end != '\0')
    throw ProtocolError(std::string(what) + " '" + s + "' is not a number");
  return v;
}

}  // namespace detail

inline WireMessage parse_wire_line(const std::string& line) {
  auto fields = detail::split_fields(line);
  if (fields.empty()) throw ProtocolError("empty message line");
  const std::string& kind = fields[0];
  WireMessage m;

  if (kind == "HELLO") {
    if (fields.size() != 4)
      throw ProtocolError("HELLO expects: HELLO <id> <host|csd> <rate>");
    m.kind = WireMessage::Hello;
    m.node_id = fields[1];
    if (fields[2] == "host")
      m.node_kind = NodeKind::Host;
    else if (fields[2] == "csd")
      m.node_kind = NodeKind::Csd;
    else
      throw ProtocolError("HELLO kind '" + fields[2] +
                          "' is neither host nor csd");
    m.rate = detail::wire_number(fields[3], "HELLO rate");
    if (!(m.rate > 0.0))
      throw ProtocolError("HELLO rate must be positive, got " + fields[3]);
    return m;
  }
  if (kind == "ACK") {
    if (fields.size() != 3)
      throw ProtocolError("ACK expects: ACK <id> <batch|none>");
    m.kind = WireMessage::Ack;
    m.node_id = fields[1];
    if (fields[2] != "none") {
      std::int64_t b = detail::wire_int(fields[2], "ACK batch");
      if (b < 0) throw ProtocolError("ACK batch must be >= 0");
      m.batch_id = b;
    }
    return m;
  }
  if (kind == "ASSIGN") {
    if (fields.size() != 4)
      throw ProtocolError("ASSIGN expects: ASSIGN <batch> <start> <count>");
    m.kind = WireMessage::Assign;
    std::int64_t b = detail::wire_int(fields[1], "ASSIGN batch");
    m.start_index = detail::wire_int(fields[2], "ASSIGN start");
    m.count = detail::wire_int(fields[3], "ASSIGN count");
    if (b < 0) throw ProtocolError("ASSIGN batch must be >= 0");
    if (m.start_index < 0) throw ProtocolError("ASSIGN start must be >= 0");
    if (m.count < 1) throw ProtocolError("ASSIGN count must be >= 1");
    m.batch_id = b;
    return m;
  }
  if (kind == "DRAIN" || kind == "STATS_REQ") {
    if (fields.size() != 1)
      throw ProtocolError(kind + " carries no fields");
    m.kind = kind == "DRAIN" ? WireMessage::Drain : WireMessage::StatsReq;
    return m;
  }
  if (kind == "STATS") {
    if (fields.size() < 2) throw ProtocolError("STATS expects a payload");
    m.kind = WireMessage::Stats;
    m.text = line.substr(line.find(' ') + 1);
    return m;
  }
  if (kind == "ERR") {
    m.kind = WireMessage::Err;
    m.text = fields.size() > 1 ? line.substr(line.find(' ') + 1) : "";
    return m;
  }
  throw ProtocolError("unknown message kind '" + kind + "'");
}

}  // namespace csdsim
