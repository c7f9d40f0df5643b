#ifndef BREP_ORACLE_HPP
#define BREP_ORACLE_HPP

// Hard-label query channel. An attack only ever sees a LabelOracle: input
// vector in, class index out. Includes exact query accounting and a
// line-delimited text protocol for serving a model over a byte stream:
//
//   "QUERY <dim> <v1> ... <vdim>\n"  ->  "LABEL <c>\n" | "ERR <reason>\n"
//   "PING\n"                         ->  "PONG\n"

#include "brep/models.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace brep {

class BudgetExhausted : public Error {
 public:
  explicit BudgetExhausted(std::uint64_t count)
      : Error("query budget exhausted after " + std::to_string(count) + " queries"), count_(count) {}
  std::uint64_t count() const { return count_; }

 private:
  std::uint64_t count_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class LabelOracle {
 public:
  virtual ~LabelOracle() = default;
  virtual std::size_t query(const Vector& x) = 0;
  virtual std::size_t input_dim() const = 0;
};

/// Answers with the hard label of an in-process model.
class ModelOracle final : public LabelOracle {
 public:
  explicit ModelOracle(AnyClassifier model) : model_(std::move(model)) {}

  std::size_t query(const Vector& x) override {
    vec::require_finite(x, "query");
    return hard_label(model_, x);
  }
  std::size_t input_dim() const override { return brep::input_dim(model_); }

 private:
  AnyClassifier model_;
};

/// Composes an oracle with a generator so queries are made in latent space.
class LatentOracle final : public LabelOracle {
 public:
  LatentOracle(LabelOracle& inner, const AnyGenerator& generator) : inner_(inner), generator_(generator) {
    if (generator_.output_dim() != inner_.input_dim()) {
      throw DimensionMismatch(inner_.input_dim(), generator_.output_dim());
    }
  }
  std::size_t query(const Vector& z) override { return inner_.query(generator_(z)); }
  std::size_t input_dim() const override { return generator_.latent_dim(); }

 private:
  LabelOracle& inner_;
  const AnyGenerator& generator_;
};

/// Counts every query and refuses the one that would exceed the budget.
/// Safe for concurrent callers: each successful query reserves exactly one
/// unit of the count atomically before it is forwarded.
class CountingOracle final : public LabelOracle {
 public:
  explicit CountingOracle(LabelOracle& inner, std::optional<std::uint64_t> budget = std::nullopt)
      : inner_(inner), budget_(budget) {
    if (budget_ && *budget_ == 0) throw InvalidArgument("budget must be positive");
  }

  std::size_t query(const Vector& x) override {
    std::uint64_t cur = count_.load(std::memory_order_relaxed);
    do {
      if (budget_ && cur >= *budget_) throw BudgetExhausted(cur);
    } while (!count_.compare_exchange_weak(cur, cur + 1, std::memory_order_acq_rel));
    return inner_.query(x);
  }

  std::size_t input_dim() const override { return inner_.input_dim(); }

  std::uint64_t count() const { return count_.load(std::memory_order_acquire); }
  std::optional<std::uint64_t> budget() const { return budget_; }

  /// Queries still available; nullopt when unlimited.
  std::optional<std::uint64_t> remaining() const {
    if (!budget_) return std::nullopt;
    const auto c = count();
    return c >= *budget_ ? 0 : *budget_ - c;
  }
  bool can_afford(std::uint64_t n) const {
    const auto r = remaining();
    return !r || *r >= n;
  }

 private:
  LabelOracle& inner_;
  std::optional<std::uint64_t> budget_;
  std::atomic<std::uint64_t> count_{0};
};

/// Queries a fixed point `repeats` times; throws if the answers disagree.
inline std::size_t probe_determinism(LabelOracle& oracle, const Vector& x, int repeats = 10) {
  const std::size_t first = oracle.query(x);
  for (int i = 1; i < repeats; ++i) {
    if (oracle.query(x) != first) throw ProtocolError("oracle is not deterministic");
  }
  return first;
}

// ---------------------------------------------------------------------------
// Wire protocol

namespace protocol {

inline std::string format_query(const Vector& x) {
  vec::require_finite(x, "query");
  std::string line = "QUERY " + std::to_string(x.size());
  char buf[40];
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %.17g", x[i]);
    line += buf;
  }
  line += '\n';
  return line;
}

inline std::vector<std::string_view> split_spaces(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    const std::size_t j = s.find(' ', i);
    const std::size_t end = j == std::string_view::npos ? s.size() : j;
    if (end > i) out.push_back(s.substr(i, end - i));
    i = end;
  }
  return out;
}

inline std::optional<double> parse_real(std::string_view tok) {
  std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> parse_index(std::string_view tok) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) return std::nullopt;
  return v;
}

/// One request line (without or with its trailing newline) to one response
/// line. `answered` is incremented for every LABEL reply.
inline std::string handle_request(const AnyClassifier& model, std::string_view line,
                                  std::atomic<std::uint64_t>* answered = nullptr) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  if (line == "PING") return "PONG\n";
  const auto tokens = split_spaces(line);
  if (tokens.empty() || tokens[0] != "QUERY") return "ERR command\n";
  if (tokens.size() < 2) return "ERR parse\n";
  const auto dim = parse_index(tokens[1]);
  if (!dim) return "ERR parse\n";
  if (*dim != tokens.size() - 2 || *dim != input_dim(model)) return "ERR dim\n";
  Vector x(static_cast<Eigen::Index>(*dim));
  for (std::size_t i = 0; i < *dim; ++i) {
    const auto v = parse_real(tokens[i + 2]);
    if (!v) return "ERR parse\n";
    if (!std::isfinite(*v)) return "ERR value\n";
    x[static_cast<Eigen::Index>(i)] = *v;
  }
  const std::size_t label = hard_label(model, x);
  if (answered) answered->fetch_add(1, std::memory_order_relaxed);
  return "LABEL " + std::to_string(label) + "\n";
}

inline std::size_t parse_label_response(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  if (line.substr(0, 4) == "ERR ") throw ProtocolError("server error: " + std::string(line.substr(4)));
  if (line.substr(0, 6) != "LABEL ") throw ProtocolError("malformed response: " + std::string(line));
  const auto v = parse_index(line.substr(6));
  if (!v) throw ProtocolError("malformed label: " + std::string(line));
  return *v;
}

/// Serves requests read from `in` until EOF; one response per line.
inline std::uint64_t serve_stream(const AnyClassifier& model, std::istream& in, std::ostream& out) {
  std::atomic<std::uint64_t> answered{0};
  std::string line;
  while (std::getline(in, line)) {
    out << handle_request(model, line, &answered);
    out.flush();
  }
  return answered.load();
}

}  // namespace protocol

// ---------------------------------------------------------------------------
// TCP transport

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// Accepts "host:port" or "tcp://host:port".
  static Endpoint parse(std::string_view text) {
    if (text.substr(0, 6) == "tcp://") text.remove_prefix(6);
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw InvalidArgument("endpoint must be host:port");
    Endpoint ep;
    ep.host = std::string(text.substr(0, colon));
    if (ep.host.empty()) ep.host = "127.0.0.1";
    const auto port = protocol::parse_index(text.substr(colon + 1));
    if (!port || *port > 65535) throw InvalidArgument("invalid port in endpoint");
    ep.port = static_cast<std::uint16_t>(*port);
    return ep;
  }
  std::string str() const { return host + ":" + std::to_string(port); }
};

namespace detail {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw InvalidArgument("cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

inline bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

/// Buffered line reader over a socket.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  /// Next line including '\n'; nullopt on EOF, error, or timeout.
  std::optional<std::string> next(std::size_t max_len = 1 << 24) {
    for (;;) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl + 1);
        buf_.erase(0, nl + 1);
        return line;
      }
      if (buf_.size() > max_len) return std::nullopt;
      char chunk[4096];
      const auto n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return std::nullopt;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buf_;
};

}  // namespace detail

/// Serves one model over TCP, one thread per connection. Malformed requests
/// get an ERR line and the connection stays open.
class OracleServer {
 public:
  OracleServer(AnyClassifier model, const Endpoint& endpoint) : model_(std::move(model)) {
    listener_ = detail::Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listener_.valid()) throw Error(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = detail::resolve(endpoint);
    if (::bind(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      throw Error("cannot bind " + endpoint.str() + ": " + std::strerror(errno));
    }
    if (::listen(listener_.fd(), 64) != 0) throw Error(std::string("listen: ") + std::strerror(errno));
    socklen_t len = sizeof addr;
    ::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    bound_ = Endpoint{endpoint.host, ntohs(addr.sin_port)};
  }

  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;
  ~OracleServer() { stop(); }

  const Endpoint& endpoint() const { return bound_; }
  std::uint64_t served() const { return served_.load(); }

  /// Runs the accept loop on a background thread.
  void start() {
    if (acceptor_.joinable()) return;
    acceptor_ = std::thread([this] { run(); });
  }

  /// Blocking accept loop; returns after stop().
  void run() {
    while (!stopping_.load()) {
      pollfd p{listener_.fd(), POLLIN, 0};
      const int r = ::poll(&p, 1, 50);
      if (r <= 0 || !(p.revents & POLLIN)) continue;
      const int fd = ::accept(listener_.fd(), nullptr, nullptr);
      if (fd < 0) continue;
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      std::lock_guard lock(mu_);
      conn_fds_.push_back(fd);
      workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
  }

  void stop() {
    stopping_.store(true);
    if (acceptor_.joinable()) acceptor_.join();
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
      workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
    std::lock_guard lock(mu_);
    for (int fd : conn_fds_) ::close(fd);
    conn_fds_.clear();
  }

 private:
  void serve_connection(int fd) {
    detail::LineReader reader(fd);
    while (!stopping_.load()) {
      auto line = reader.next();
      if (!line) break;
      if (!detail::send_all(fd, protocol::handle_request(model_, *line, &served_))) break;
    }
    ::shutdown(fd, SHUT_RDWR);
  }

  AnyClassifier model_;
  detail::Socket listener_;
  Endpoint bound_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> served_{0};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> conn_fds_;
};

/// LabelOracle over one TCP connection; one request in flight at a time.
class RemoteOracle final : public LabelOracle {
 public:
  RemoteOracle(const Endpoint& endpoint, std::size_t input_dim, int timeout_ms = 5000)
      : input_dim_(input_dim), sock_(::socket(AF_INET, SOCK_STREAM, 0)), reader_(sock_.fd()) {
    if (!sock_.valid()) throw ProtocolError(std::string("socket: ") + std::strerror(errno));
    timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
    ::setsockopt(sock_.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(sock_.fd(), SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    int one = 1;
    ::setsockopt(sock_.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    sockaddr_in addr = detail::resolve(endpoint);
    if (::connect(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      throw ProtocolError("cannot connect to " + endpoint.str() + ": " + std::strerror(errno));
    }
  }

  std::size_t query(const Vector& x) override {
    check_input(input_dim_, x);
    std::lock_guard lock(mu_);
    const std::string line = exchange(protocol::format_query(x));
    const std::size_t label = protocol::parse_label_response(line);
    ++count_;
    return label;
  }

  bool ping() {
    std::lock_guard lock(mu_);
    return exchange("PING\n") == "PONG\n";
  }

  /// Sends a raw request line and returns the raw response line.
  std::string raw_request(const std::string& request) {
    std::lock_guard lock(mu_);
    return exchange(request);
  }

  std::size_t input_dim() const override { return input_dim_; }
  std::uint64_t count() const { return count_; }

 private:
  std::string exchange(const std::string& request) {
    if (!detail::send_all(sock_.fd(), request)) throw ProtocolError("send failed");
    auto line = reader_.next();
    if (!line) throw ProtocolError("connection closed or timed out");
    return *line;
  }

  std::size_t input_dim_;
  detail::Socket sock_;
  detail::LineReader reader_;
  std::mutex mu_;
  std::uint64_t count_ = 0;
};

}  // namespace brep

#endif  // BREP_ORACLE_HPP
