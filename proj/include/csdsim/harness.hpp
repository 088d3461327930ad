// Live multi-process rig: a coordinator drives real workers over loopback
// TCP with the line protocol from wire.hpp, while batch payloads travel as
// tiny index files in a shared directory. The scheduler core is the same
// SchedulerState the simulator uses; the coordinator logs every ack and
// poll tick so a replay through a fresh scheduler must reproduce the live
// ledger bit for bit.
//
// Liveness is owned by the coordinator: workers wait indefinitely for
// instructions and exit on DRAIN, ERR, or a closed connection, while the
// coordinator aborts a run that stops making ack progress.

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csdsim/errors.hpp"
#include "csdsim/scheduler.hpp"
#include "csdsim/topology.hpp"
#include "csdsim/wire.hpp"
#include "csdsim/workload.hpp"

namespace csdsim {

// ---------------------------------------------------------------------------
// Synthetic work

enum class WorkMode { Sleep, Spin };

// Holds the calling thread for at least `seconds`. Sleep mode yields the
// core (the right choice when several workers share one CPU); spin mode
// burns it to emulate a busy engine.
inline void run_synthetic_work(double seconds, WorkMode mode) {
  if (!(seconds > 0.0)) return;
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(seconds));
  if (mode == WorkMode::Sleep) {
    std::this_thread::sleep_until(deadline);
    return;
  }
  volatile double chaff = 1.0;
  while (std::chrono::steady_clock::now() < deadline)
    for (int i = 0; i < 256; ++i) chaff = chaff * 1.0000001 + 1e-9;
}

// Measured-over-requested duration of a short probe, >= 1. Reported in
// worker stats so a run records how faithful its timing substrate was.
inline double calibrate_work_precision(WorkMode mode) {
  auto t0 = std::chrono::steady_clock::now();
  run_synthetic_work(0.02, mode);
  double took =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return std::max(1.0, took / 0.02);
}

// ---------------------------------------------------------------------------
// Index files: the out-of-band batch payload. The coordinator writes the
// file before sending ASSIGN; the worker deletes it before acking, so a
// clean run leaves the directory empty.

struct IndexRecord {
  std::int64_t start_index = 0;
  std::int64_t count = 0;
  std::string workload;
};

inline std::filesystem::path index_file_path(const std::string& workdir,
                                             std::int64_t batch_id) {
  return std::filesystem::path(workdir) / "assign" /
         (std::to_string(batch_id) + ".idx");
}

inline void write_index_file(const std::string& workdir,
                             const BatchAssignment& a,
                             const std::string& workload) {
  auto p = index_file_path(workdir, a.batch_id);
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write index file " + p.string());
  out << a.start_index << ' ' << a.count << ' ' << workload << '\n';
  out.flush();
  if (!out) throw Error("short write to index file " + p.string());
}

inline IndexRecord read_index_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  IndexRecord rec;
  if (!(in >> rec.start_index >> rec.count >> rec.workload))
    throw ProtocolError("index file " + p.string() + " is missing or malformed");
  return rec;
}

// ---------------------------------------------------------------------------
// Line-oriented sockets

// Move-only connection wrapper speaking newline-delimited messages.
class LineConn {
 public:
  LineConn() = default;
  explicit LineConn(int fd) : fd_(fd) {}
  LineConn(LineConn&& o) noexcept : fd_(o.fd_), buf_(std::move(o.buf_)) {
    o.fd_ = -1;
  }
  LineConn& operator=(LineConn&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = o.fd_;
      buf_ = std::move(o.buf_);
      o.fd_ = -1;
    }
    return *this;
  }
  LineConn(const LineConn&) = delete;
  LineConn& operator=(const LineConn&) = delete;
  ~LineConn() { close(); }

  bool ok() const { return fd_ >= 0; }

  static LineConn connect_to(const std::string& host, int port,
                             double timeout_s) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return LineConn();
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd);
      return LineConn();
    }
    LineConn c(fd);
    c.set_send_timeout(timeout_s);
    c.set_recv_timeout(timeout_s);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      return LineConn();
    return c;
  }

  void set_recv_timeout(double seconds) { set_timeout_(SO_RCVTIMEO, seconds); }
  void set_send_timeout(double seconds) { set_timeout_(SO_SNDTIMEO, seconds); }

  // Appends '\n' and sends the whole line. False on any error.
  bool send_line(const std::string& line) {
    if (fd_ < 0) return false;
    std::string msg = line;
    msg.push_back('\n');
    std::size_t off = 0;
    while (off < msg.size()) {
      ssize_t n = ::send(fd_, msg.data() + off, msg.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  // 1 = line delivered, 0 = no line yet (receive timeout), -1 = peer closed
  // or hard error. A trailing fragment without a newline is discarded.
  int recv_line(std::string& out) {
    if (fd_ < 0) return -1;
    for (;;) {
      auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        out = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return 1;
      }
      char chunk[4096];
      ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n > 0) {
        buf_.append(chunk, static_cast<std::size_t>(n));
        continue;
      }
      if (n == 0) return -1;
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) return 0;
      return -1;
    }
  }

  // Polls for a full line until the deadline; nullopt on timeout or close.
  std::optional<std::string> recv_line_blocking(double timeout_s) {
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration<double>(timeout_s);
    set_recv_timeout(0.1);
    std::string line;
    for (;;) {
      int r = recv_line(line);
      if (r == 1) return line;
      if (r < 0) return std::nullopt;
      if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
    }
  }

  // Wakes any thread blocked in recv on this socket.
  void shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void set_timeout_(int which, double seconds) {
    if (fd_ < 0) return;
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(seconds);
    tv.tv_usec =
        static_cast<suseconds_t>((seconds - double(tv.tv_sec)) * 1e6);
    ::setsockopt(fd_, SOL_SOCKET, which, &tv, sizeof tv);
  }

  int fd_ = -1;
  std::string buf_;
};

// Bound listening socket; port 0 picks a free port.
class Listener {
 public:
  Listener() = default;
  Listener(Listener&& o) noexcept : fd_(o.fd_), port_(o.port_) { o.fd_ = -1; }
  Listener& operator=(Listener&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = o.fd_;
      port_ = o.port_;
      o.fd_ = -1;
    }
    return *this;
  }
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;
  ~Listener() { close(); }

  static Listener open(const std::string& host, int port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error("cannot create listening socket");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd);
      throw ConfigError("listen address '" + host + "' is not an IPv4 address");
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(fd, 16) != 0) {
      int err = errno;
      ::close(fd);
      throw Error("cannot listen on " + host + ":" + std::to_string(port) +
                  ": " + std::strerror(err));
    }
    Listener ls;
    ls.fd_ = fd;
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len) == 0)
      ls.port_ = ntohs(bound.sin_port);
    return ls;
  }

  int port() const { return port_; }

  // Accepts one connection; invalid LineConn on timeout or error.
  LineConn accept_conn(double timeout_s) {
    if (fd_ < 0) return LineConn();
    pollfd pfd{fd_, POLLIN, 0};
    int ms = timeout_s <= 0.0 ? 0 : int(timeout_s * 1000.0) + 1;
    int r = ::poll(&pfd, 1, ms);
    if (r <= 0) return LineConn();
    int cfd = ::accept(fd_, nullptr, nullptr);
    return cfd < 0 ? LineConn() : LineConn(cfd);
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  int port_ = 0;
};

// ---------------------------------------------------------------------------
// Operation log and replay

// One coordinator decision input: either a batch acknowledgement from a
// worker or a poll tick. Replaying the sequence through a fresh scheduler
// determines the ledger completely.
struct HarnessOp {
  enum class Kind { Ack, Tick };
  Kind kind = Kind::Tick;
  std::string node_id;         // Ack
  std::int64_t batch_id = -1;  // Ack
  std::int64_t tick = 0;       // Tick
};

inline std::vector<BatchAssignment> replay_harness_ledger(
    const SchedulerConfig& cfg, const std::vector<NodeSpec>& nodes,
    std::int64_t total_items, const std::vector<HarnessOp>& ops) {
  SchedulerState st(cfg, nodes, total_items);
  st.seed();
  for (const auto& op : ops) {
    if (op.kind == HarnessOp::Kind::Ack) {
      st.retire(op.node_id, op.batch_id);
      st.on_ack(op.node_id, 0.0);
    } else {
      st.on_poll_tick(double(op.tick) * cfg.poll_interval_s);
    }
  }
  return st.assignments();
}

// ---------------------------------------------------------------------------
// Reports and options

struct WorkerStats {
  std::string node_id;
  std::int64_t batches = 0;
  std::int64_t items = 0;
  double busy_s = 0.0;
  double declared_rate = 0.0;
  double calibration = 1.0;
};

struct HarnessReport {
  bool valid = false;
  std::string error;
  int workers = 0;
  std::int64_t total_items = 0;
  double makespan_s = 0.0;
  double throughput_items_per_s = 0.0;
  SchedulerConfig scheduler;
  std::vector<NodeSpec> nodes;
  std::vector<BatchAssignment> ledger;
  std::vector<HarnessOp> ops;
  std::vector<WorkerStats> worker_stats;
};

struct CoordinatorOptions {
  std::string listen_host = "127.0.0.1";
  int listen_port = 0;  // 0 picks a free port
  int expected_workers = 0;
  WorkloadProfile profile;
  SchedulerConfig scheduler;
  std::optional<std::int64_t> total_items;  // default: profile total
  std::string workdir;
  double worker_timeout_s = 30.0;
  std::function<void(int)> on_listening;  // called with the bound port
};

struct WorkerOptions {
  std::string connect_host = "127.0.0.1";
  int connect_port = 0;
  std::string node_id;
  NodeKind kind = NodeKind::Csd;
  double rate = 0.0;  // declared items/sec, already batch-resolved
  std::string workdir;
  WorkMode work_mode = WorkMode::Sleep;
  double io_timeout_s = 30.0;  // connect budget
};

struct WorkerResult {
  std::string node_id;
  std::int64_t batches = 0;
  std::int64_t items = 0;
  double busy_s = 0.0;
  std::string error;  // empty on a clean drain
};

inline nlohmann::json harness_report_to_json(const HarnessReport& r) {
  nlohmann::json stats = nlohmann::json::array();
  for (const auto& s : r.worker_stats)
    stats.push_back({{"node_id", s.node_id},
                     {"batches", s.batches},
                     {"items", s.items},
                     {"busy_s", s.busy_s},
                     {"declared_rate", s.declared_rate},
                     {"calibration", s.calibration}});
  return nlohmann::json{{"valid", r.valid},
                        {"error", r.error},
                        {"workers", r.workers},
                        {"total_items", r.total_items},
                        {"makespan_s", r.makespan_s},
                        {"throughput_items_per_s", r.throughput_items_per_s},
                        {"batches", r.ledger.size()},
                        {"worker_stats", stats}};
}

// ---------------------------------------------------------------------------
// Coordinator

namespace detail {

struct QItem {
  enum Type { Msg, Tick, Gone } type = Msg;
  std::size_t worker = 0;  // Msg, Gone
  WireMessage msg;         // Msg, when parse succeeded
  bool parse_failed = false;
  std::string raw;     // offending line when parse failed
  std::int64_t tick = 0;  // Tick
  double arrival_s = 0.0;
};

class MsgQueue {
 public:
  void push(QItem item) {
    {
      std::lock_guard<std::mutex> lk(m_);
      q_.push_back(std::move(item));
    }
    cv_.notify_one();
  }
  std::optional<QItem> pop_until(std::chrono::steady_clock::time_point deadline) {
    std::unique_lock<std::mutex> lk(m_);
    if (!cv_.wait_until(lk, deadline, [&] { return !q_.empty(); }))
      return std::nullopt;
    QItem item = std::move(q_.front());
    q_.pop_front();
    return item;
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<QItem> q_;
};

inline void harness_reader(LineConn& conn, std::size_t idx, MsgQueue& q,
                           std::atomic<bool>& stop,
                           std::chrono::steady_clock::time_point t0) {
  std::string line;
  for (;;) {
    int r = conn.recv_line(line);
    if (r == 0) {
      if (stop.load()) return;
      continue;
    }
    if (r < 0) {
      QItem gone;
      gone.type = QItem::Gone;
      gone.worker = idx;
      q.push(std::move(gone));
      return;
    }
    QItem item;
    item.type = QItem::Msg;
    item.worker = idx;
    item.arrival_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    try {
      item.msg = parse_wire_line(line);
    } catch (const ProtocolError&) {
      item.parse_failed = true;
      item.raw = line;
    }
    q.push(std::move(item));
  }
}

inline WorkerStats worker_stats_from_json(const std::string& payload) {
  auto j = nlohmann::json::parse(payload);
  WorkerStats s;
  s.node_id = j.value("node_id", std::string());
  s.batches = j.value("batches", std::int64_t(0));
  s.items = j.value("items", std::int64_t(0));
  s.busy_s = j.value("busy_s", 0.0);
  s.declared_rate = j.value("declared_rate", 0.0);
  s.calibration = j.value("calibration", 1.0);
  return s;
}

}  // namespace detail

// Runs one full harness session: registration barrier, seeding, tick-driven
// assignment, drain, and stats collection. Returns an invalid report (never
// throws) for runtime failures; configuration mistakes still throw.
inline HarnessReport coordinate(const CoordinatorOptions& opt) {
  using Clock = std::chrono::steady_clock;
  namespace fs = std::filesystem;

  if (opt.expected_workers < 1)
    throw ConfigError("expected_workers must be at least 1");
  if (opt.workdir.empty()) throw ConfigError("harness workdir is required");
  validate_profile(opt.profile);
  validate_scheduler_config(opt.scheduler);
  std::int64_t total = opt.total_items.value_or(opt.profile.total_items);
  if (total < 0) throw ConfigError("total_items must be >= 0");

  HarnessReport rep;
  rep.scheduler = opt.scheduler;
  rep.total_items = total;

  fs::create_directories(fs::path(opt.workdir) / "assign");
  Listener listener = Listener::open(opt.listen_host, opt.listen_port);
  if (opt.on_listening) opt.on_listening(listener.port());

  const std::size_t n_workers = std::size_t(opt.expected_workers);
  std::vector<LineConn> conns;
  std::vector<NodeSpec> nodes;
  std::unordered_map<std::string, std::size_t> index_of;
  auto reg_deadline =
      Clock::now() + std::chrono::duration<double>(opt.worker_timeout_s);
  auto remaining = [&] {
    return std::chrono::duration<double>(reg_deadline - Clock::now()).count();
  };

  // Registration barrier: each worker sends HELLO and then an initial pull
  // request ("ACK <id> none"); the pair enrolls it without touching the
  // scheduler. Any defect here aborts the whole run.
  while (conns.size() < n_workers) {
    double left = remaining();
    if (left <= 0.0) {
      rep.error = "registration timed out with " +
                  std::to_string(conns.size()) + " of " +
                  std::to_string(n_workers) + " workers";
      for (auto& c : conns) {
        c.send_line(encode_err("registration timed out"));
        c.close();
      }
      return rep;
    }
    LineConn c = listener.accept_conn(left);
    if (!c.ok()) continue;  // re-check the deadline
    auto fail = [&](const std::string& why) {
      c.send_line(encode_err(why));
      rep.error = why;
      for (auto& other : conns) {
        other.send_line(encode_err("a peer failed registration"));
        other.close();
      }
      return rep;
    };
    auto hello_line = c.recv_line_blocking(std::max(0.1, remaining()));
    if (!hello_line) return fail("worker sent no HELLO before the deadline");
    WireMessage hello;
    try {
      hello = parse_wire_line(*hello_line);
    } catch (const ProtocolError& e) {
      return fail(std::string("worker sent malformed HELLO: ") + e.what());
    }
    if (hello.kind != WireMessage::Hello)
      return fail("worker sent '" + *hello_line + "' instead of HELLO");
    if (index_of.count(hello.node_id))
      return fail("duplicate worker id '" + hello.node_id + "'");
    auto pull_line = c.recv_line_blocking(std::max(0.1, remaining()));
    if (!pull_line)
      return fail("worker '" + hello.node_id + "' sent no initial request");
    WireMessage pull;
    try {
      pull = parse_wire_line(*pull_line);
    } catch (const ProtocolError& e) {
      return fail(std::string("worker sent a malformed initial request: ") +
                  e.what());
    }
    if (pull.kind != WireMessage::Ack || pull.batch_id ||
        pull.node_id != hello.node_id)
      return fail("worker '" + hello.node_id +
                  "' did not follow HELLO with its initial request");
    NodeSpec spec;
    spec.id = hello.node_id;
    spec.kind = hello.node_kind;
    spec.rates = hello.node_kind == NodeKind::Host ? RateSource::HostRates
                                                   : RateSource::CsdRates;
    index_of.emplace(spec.id, conns.size());
    nodes.push_back(std::move(spec));
    conns.push_back(std::move(c));
  }
  rep.workers = int(n_workers);

  // Stats collection shared by every exit path. Assumes DRAIN was sent.
  std::vector<WorkerStats> stats(n_workers);
  std::vector<bool> have_stats(n_workers, false);

  if (total == 0) {
    // Nothing to schedule: drain immediately, inline (no reader threads).
    rep.valid = true;
    for (std::size_t i = 0; i < n_workers; ++i) {
      conns[i].send_line(encode_drain());
      auto line = conns[i].recv_line_blocking(std::min(5.0, opt.worker_timeout_s));
      if (!line) continue;
      try {
        WireMessage m = parse_wire_line(*line);
        if (m.kind == WireMessage::Stats) {
          stats[i] = detail::worker_stats_from_json(m.text);
          have_stats[i] = true;
        }
      } catch (const std::exception&) {
      }
    }
    for (std::size_t i = 0; i < n_workers; ++i)
      if (have_stats[i]) rep.worker_stats.push_back(stats[i]);
    rep.nodes = std::move(nodes);
    return rep;
  }

  SchedulerState st(opt.scheduler, nodes, total);
  detail::MsgQueue queue;
  std::atomic<bool> stop_readers{false};
  std::atomic<bool> stop_ticker{false};
  std::string abort_reason;
  std::int64_t outstanding = 0;
  std::vector<HarnessOp> ops;
  double makespan = 0.0;

  auto dispatch = [&](const BatchAssignment& a) {
    write_index_file(opt.workdir, a, opt.profile.name);
    if (!conns[index_of.at(a.node_id)].send_line(
            encode_assign(a.batch_id, a.start_index, a.count)))
      throw Error("cannot send assignment to worker '" + a.node_id + "'");
    ++outstanding;
  };

  // Seed at t = 0, then let poll ticks drive all later assignment.
  for (auto& c : conns) c.set_recv_timeout(0.25);
  auto t0 = Clock::now();
  try {
    for (const auto& a : st.seed()) dispatch(a);
  } catch (const Error& e) {
    abort_reason = e.what();
  }

  std::vector<std::thread> readers;
  for (std::size_t i = 0; i < n_workers; ++i)
    readers.emplace_back([&, i] {
      detail::harness_reader(conns[i], i, queue, stop_readers, t0);
    });
  std::thread ticker([&] {
    for (std::int64_t k = 1; !stop_ticker.load(); ++k) {
      auto when = t0 + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(
                               double(k) * opt.scheduler.poll_interval_s));
      std::this_thread::sleep_until(when);
      if (stop_ticker.load()) return;
      detail::QItem item;
      item.type = detail::QItem::Tick;
      item.tick = k;
      queue.push(std::move(item));
    }
  });

  auto last_ack = Clock::now();
  while (abort_reason.empty() && !(st.exhausted() && outstanding == 0)) {
    if (outstanding > 0 &&
        std::chrono::duration<double>(Clock::now() - last_ack).count() >
            opt.worker_timeout_s) {
      abort_reason = "no acknowledgement for " +
                     std::to_string(opt.worker_timeout_s) + "s with " +
                     std::to_string(outstanding) + " batches in flight";
      break;
    }
    auto item = queue.pop_until(Clock::now() + std::chrono::milliseconds(500));
    if (!item) continue;
    try {
      if (item->type == detail::QItem::Gone) {
        abort_reason =
            "worker '" + nodes[item->worker].id + "' disconnected mid-run";
      } else if (item->type == detail::QItem::Tick) {
        HarnessOp op;
        op.kind = HarnessOp::Kind::Tick;
        op.tick = item->tick;
        ops.push_back(op);
        double t = double(item->tick) * opt.scheduler.poll_interval_s;
        for (const auto& a : st.on_poll_tick(t)) dispatch(a);
      } else if (item->parse_failed) {
        conns[item->worker].send_line(encode_err("malformed line"));
        abort_reason = "worker '" + nodes[item->worker].id +
                       "' sent a malformed line: " + item->raw;
      } else if (item->msg.kind == WireMessage::Ack && item->msg.batch_id) {
        if (index_of.at(item->msg.node_id) != item->worker)
          throw ProtocolError("ack for foreign node '" + item->msg.node_id +
                              "'");
        st.retire(item->msg.node_id, *item->msg.batch_id);
        st.on_ack(item->msg.node_id, item->arrival_s);
        HarnessOp op;
        op.kind = HarnessOp::Kind::Ack;
        op.node_id = item->msg.node_id;
        op.batch_id = *item->msg.batch_id;
        ops.push_back(op);
        --outstanding;
        makespan = item->arrival_s;
        last_ack = Clock::now();
      } else if (item->msg.kind == WireMessage::Stats) {
        stats[item->worker] = detail::worker_stats_from_json(item->msg.text);
        have_stats[item->worker] = true;
      } else if (item->msg.kind == WireMessage::Err) {
        abort_reason = "worker '" + nodes[item->worker].id +
                       "' reported: " + item->msg.text;
      } else {
        conns[item->worker].send_line(encode_err("unexpected message"));
        abort_reason = "worker '" + nodes[item->worker].id +
                       "' sent an unexpected message";
      }
    } catch (const Error& e) {
      conns[item->worker].send_line(encode_err(e.what()));
      abort_reason = e.what();
    }
  }

  // Drain everyone, then give stragglers a short window to report stats.
  for (auto& c : conns) c.send_line(encode_drain());
  std::vector<bool> done(n_workers, false);
  auto stats_deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(
                             std::min(5.0, opt.worker_timeout_s)));
  auto all_done = [&] {
    for (std::size_t i = 0; i < n_workers; ++i)
      if (!done[i] && !have_stats[i]) return false;
    return true;
  };
  while (!all_done()) {
    auto item = queue.pop_until(stats_deadline);
    if (!item) break;
    if (item->type == detail::QItem::Gone) {
      done[item->worker] = true;
    } else if (item->type == detail::QItem::Msg && !item->parse_failed &&
               item->msg.kind == WireMessage::Stats) {
      try {
        stats[item->worker] = detail::worker_stats_from_json(item->msg.text);
        have_stats[item->worker] = true;
      } catch (const std::exception&) {
      }
    }
  }

  stop_ticker.store(true);
  stop_readers.store(true);
  for (auto& c : conns) c.shutdown_both();
  for (auto& t : readers) t.join();
  ticker.join();
  for (auto& c : conns) c.close();

  rep.nodes = st.nodes();
  rep.ledger = st.assignments();
  rep.ops = std::move(ops);
  rep.makespan_s = makespan;
  if (makespan > 0.0) rep.throughput_items_per_s = double(total) / makespan;
  for (std::size_t i = 0; i < n_workers; ++i)
    if (have_stats[i]) rep.worker_stats.push_back(stats[i]);

  if (abort_reason.empty()) {
    try {
      verify_ledger_partition(rep.ledger, total);
    } catch (const Error& e) {
      abort_reason = e.what();
    }
  }
  if (abort_reason.empty()) {
    std::error_code ec;
    auto assign_dir = fs::path(opt.workdir) / "assign";
    if (fs::exists(assign_dir, ec) && !fs::is_empty(assign_dir, ec))
      abort_reason = "leftover index files after a complete run";
  }
  rep.valid = abort_reason.empty();
  rep.error = abort_reason;
  return rep;
}

// ---------------------------------------------------------------------------
// Worker

// Connects, enrolls, and serves assignments until DRAIN, ERR, or a closed
// connection. Never throws for runtime failures; the error field reports.
inline WorkerResult worker_loop(const WorkerOptions& opt) {
  using Clock = std::chrono::steady_clock;

  WorkerResult res;
  res.node_id = opt.node_id;
  if (opt.node_id.empty() ||
      opt.node_id.find_first_of(" \t\n") != std::string::npos)
    throw ConfigError("worker id must be a single non-empty token");
  if (!(opt.rate > 0.0)) throw ConfigError("worker rate must be positive");
  if (opt.workdir.empty()) throw ConfigError("worker workdir is required");

  double calibration = calibrate_work_precision(opt.work_mode);

  LineConn conn;
  auto connect_deadline =
      Clock::now() + std::chrono::duration<double>(opt.io_timeout_s);
  for (;;) {
    conn = LineConn::connect_to(opt.connect_host, opt.connect_port, 1.0);
    if (conn.ok()) break;
    if (Clock::now() >= connect_deadline) {
      res.error = "cannot connect to coordinator at " + opt.connect_host +
                  ":" + std::to_string(opt.connect_port);
      return res;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  conn.set_recv_timeout(0.25);

  if (!conn.send_line(encode_hello(opt.node_id, opt.kind, opt.rate)) ||
      !conn.send_line(encode_ack(opt.node_id, std::nullopt))) {
    res.error = "connection lost during registration";
    return res;
  }

  auto stats_payload = [&] {
    nlohmann::json j{{"node_id", opt.node_id},
                     {"kind", to_string(opt.kind)},
                     {"batches", res.batches},
                     {"items", res.items},
                     {"busy_s", res.busy_s},
                     {"declared_rate", opt.rate},
                     {"work_mode",
                      opt.work_mode == WorkMode::Sleep ? "sleep" : "spin"},
                     {"calibration", calibration}};
    return j.dump();
  };
  auto bail = [&](const std::string& why) {
    conn.send_line(encode_err(why));
    res.error = why;
    return res;
  };

  std::string line;
  for (;;) {
    int r = conn.recv_line(line);
    if (r == 0) continue;  // idle is legal; the coordinator owns liveness
    if (r < 0) {
      res.error = "coordinator connection closed";
      return res;
    }
    WireMessage msg;
    try {
      msg = parse_wire_line(line);
    } catch (const ProtocolError& e) {
      return bail(std::string("cannot parse instruction: ") + e.what());
    }
    switch (msg.kind) {
      case WireMessage::Assign: {
        auto idx_path = index_file_path(opt.workdir, *msg.batch_id);
        IndexRecord rec;
        try {
          rec = read_index_file(idx_path);
        } catch (const Error& e) {
          return bail(e.what());
        }
        if (rec.start_index != msg.start_index || rec.count != msg.count)
          return bail("index file for batch " + std::to_string(*msg.batch_id) +
                      " disagrees with the assignment");
        auto t0 = Clock::now();
        run_synthetic_work(double(msg.count) / opt.rate, opt.work_mode);
        res.busy_s +=
            std::chrono::duration<double>(Clock::now() - t0).count();
        res.batches += 1;
        res.items += msg.count;
        std::error_code ec;
        std::filesystem::remove(idx_path, ec);
        if (!conn.send_line(encode_ack(opt.node_id, *msg.batch_id))) {
          res.error = "connection lost while acknowledging";
          return res;
        }
        break;
      }
      case WireMessage::Drain:
        conn.send_line(encode_stats(stats_payload()));
        return res;
      case WireMessage::StatsReq:
        conn.send_line(encode_stats(stats_payload()));
        break;
      case WireMessage::Err:
        res.error = "coordinator reported: " + msg.text;
        return res;
      default:
        return bail("unexpected instruction '" + line + "'");
    }
  }
}

}  // namespace csdsim
