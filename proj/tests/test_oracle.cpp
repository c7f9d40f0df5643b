#include "brep/oracle.hpp"

#include "golden_transcripts.hpp"

#include <gtest/gtest.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <sstream>
#include <thread>

using namespace brep;

namespace {

// Oracle whose answer flips on every call.
class FlakyOracle final : public LabelOracle {
 public:
  std::size_t query(const Vector&) override { return flip_ ^= 1u; }
  std::size_t input_dim() const override { return 2; }

 private:
  std::size_t flip_ = 0;
};

// One-connection server that answers every line with a fixed reply.
class FixedReplyServer {
 public:
  explicit FixedReplyServer(std::string reply) : reply_(std::move(reply)) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    ::listen(fd_, 1);
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] {
      const int c = ::accept(fd_, nullptr, nullptr);
      if (c < 0) return;
      char buf[4096];
      while (::recv(c, buf, sizeof buf, 0) > 0) {
        if (!reply_.empty()) ::send(c, reply_.data(), reply_.size(), MSG_NOSIGNAL);
      }
      ::close(c);
    });
  }
  ~FixedReplyServer() {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    thread_.join();
  }
  Endpoint endpoint() const { return Endpoint{"127.0.0.1", port_}; }

 private:
  std::string reply_;
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(ModelOracle, LabelsTheExampleModel) {
  ModelOracle o(golden::example_model());
  EXPECT_EQ(o.query(vec::from({2.0, 0.0})), 0u);
  EXPECT_EQ(o.query(vec::from({-2.0, 0.0})), 1u);
  EXPECT_EQ(o.input_dim(), 2u);
  EXPECT_THROW(o.query(vec::from({NAN, 0.0})), InvalidArgument);
  EXPECT_THROW(o.query(vec::from({1.0})), DimensionMismatch);
}

TEST(CountingOracle, BudgetOfThree) {
  ModelOracle inner(golden::example_model());
  CountingOracle o(inner, 3);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(o.query(vec::from({2.0, 0.0})), 0u);
  EXPECT_EQ(o.remaining(), std::optional<std::uint64_t>(0));
  try {
    o.query(vec::from({2.0, 0.0}));
    FAIL() << "fourth query was not refused";
  } catch (const BudgetExhausted& e) {
    EXPECT_EQ(e.count(), 3u);
  }
  EXPECT_EQ(o.count(), 3u);
}

TEST(CountingOracle, SameQueryTwiceCountsTwo) {
  ModelOracle inner(golden::example_model());
  CountingOracle o(inner);
  const Vector x = vec::from({2.0, 0.0});
  EXPECT_EQ(o.query(x), o.query(x));
  EXPECT_EQ(o.count(), 2u);
  EXPECT_FALSE(o.remaining().has_value());
  EXPECT_TRUE(o.can_afford(1'000'000));
  EXPECT_THROW(CountingOracle(inner, 0), InvalidArgument);
}

TEST(CountingOracle, CanAfford) {
  ModelOracle inner(golden::example_model());
  CountingOracle o(inner, 5);
  EXPECT_TRUE(o.can_afford(5));
  EXPECT_FALSE(o.can_afford(6));
  o.query(vec::from({1.0, 0.0}));
  EXPECT_TRUE(o.can_afford(4));
  EXPECT_FALSE(o.can_afford(5));
}

TEST(CountingOracle, ExactUnderConcurrency) {
  ModelOracle inner(golden::example_model());
  CountingOracle unlimited(inner);
  CountingOracle limited(inner, 1000);
  std::atomic<int> refused{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < 8; ++t) {
    pool.emplace_back([&] {
      for (int i = 0; i < 250; ++i) {
        unlimited.query(vec::from({1.0, 0.0}));
        try {
          limited.query(vec::from({1.0, 0.0}));
        } catch (const BudgetExhausted&) {
          ++refused;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  EXPECT_EQ(unlimited.count(), 2000u);
  EXPECT_EQ(limited.count(), 1000u);
  EXPECT_EQ(refused.load(), 1000);
}

TEST(LatentOracle, QueriesThroughTheGenerator) {
  ModelOracle inner(golden::example_model());
  Matrix a(2, 1);
  a << 1.0, 0.0;
  const AnyGenerator g = AffineGenerator(a, Vector::Zero(2));
  LatentOracle o(inner, g);
  EXPECT_EQ(o.input_dim(), 1u);
  EXPECT_EQ(o.query(vec::from({3.0})), 0u);
  EXPECT_EQ(o.query(vec::from({-3.0})), 1u);
  const AnyGenerator wrong = IdentityGenerator(3);
  EXPECT_THROW(LatentOracle(inner, wrong), DimensionMismatch);
}

TEST(ProbeDeterminism, DetectsFlakyOracle) {
  ModelOracle good(golden::example_model());
  EXPECT_EQ(probe_determinism(good, vec::from({2.0, 0.0})), 0u);
  FlakyOracle bad;
  EXPECT_THROW(probe_determinism(bad, vec::from({2.0, 0.0})), ProtocolError);
}

TEST(Protocol, FormatQueryUsesSeventeenDigits) {
  EXPECT_EQ(protocol::format_query(vec::from({2.0, 0.0})), "QUERY 2 2 0\n");
  EXPECT_EQ(protocol::format_query(vec::from({0.1, -1.0 / 3.0})), "QUERY 2 0.10000000000000001 -0.33333333333333331\n");
  EXPECT_THROW(protocol::format_query(vec::from({NAN})), InvalidArgument);
}

TEST(Protocol, FormattedQueriesParseBackExactly) {
  RngStream rng(5);
  const AnyClassifier m = QuadraticBallClassifier(Vector::Zero(4));
  for (int i = 0; i < 500; ++i) {
    const Vector x = rng.normal_vector(4) * 0.6;
    const std::string line = protocol::format_query(x);
    EXPECT_EQ(protocol::handle_request(m, line), "LABEL " + std::to_string(hard_label(m, x)) + "\n");
  }
}

TEST(Protocol, GoldenTranscriptInProcess) {
  const auto model = golden::example_model();
  std::atomic<std::uint64_t> answered{0};
  std::uint64_t labels = 0;
  for (const auto& [req, resp] : golden::transcript()) {
    EXPECT_EQ(protocol::handle_request(model, req, &answered), resp) << "request: " << req;
    labels += resp.rfind("LABEL", 0) == 0;
  }
  EXPECT_EQ(answered.load(), labels);
}

TEST(Protocol, GoldenTranscriptOverStreams) {
  std::string input, expected;
  for (const auto& [req, resp] : golden::transcript()) {
    input += req;
    expected += resp;
  }
  std::istringstream in(input);
  std::ostringstream out;
  protocol::serve_stream(golden::example_model(), in, out);
  EXPECT_EQ(out.str(), expected);
}

TEST(Protocol, ParseLabelResponse) {
  EXPECT_EQ(protocol::parse_label_response("LABEL 3\n"), 3u);
  EXPECT_THROW(protocol::parse_label_response("LABEL x\n"), ProtocolError);
  EXPECT_THROW(protocol::parse_label_response("LABEL -1\n"), ProtocolError);
  EXPECT_THROW(protocol::parse_label_response("ERR dim\n"), ProtocolError);
  EXPECT_THROW(protocol::parse_label_response("PONG\n"), ProtocolError);
}

TEST(Endpoint, Parse) {
  const auto a = Endpoint::parse("localhost:8080");
  EXPECT_EQ(a.host, "localhost");
  EXPECT_EQ(a.port, 8080);
  const auto b = Endpoint::parse("tcp://127.0.0.1:0");
  EXPECT_EQ(b.str(), "127.0.0.1:0");
  EXPECT_THROW(Endpoint::parse("nohost"), InvalidArgument);
  EXPECT_THROW(Endpoint::parse("h:99999"), InvalidArgument);
  EXPECT_THROW(Endpoint::parse("h:abc"), InvalidArgument);
}

TEST(Tcp, GoldenTranscriptByteExact) {
  OracleServer server(golden::example_model(), Endpoint::parse("127.0.0.1:0"));
  server.start();
  RemoteOracle client(server.endpoint(), 2);
  for (const auto& [req, resp] : golden::transcript()) {
    EXPECT_EQ(client.raw_request(req), resp) << "request: " << req;
  }
  EXPECT_TRUE(client.ping());
  EXPECT_EQ(client.query(vec::from({2.0, 0.0})), 0u);
}

TEST(Tcp, ThousandQueriesReconcile) {
  OracleServer server(golden::example_model(), Endpoint::parse("127.0.0.1:0"));
  server.start();
  RemoteOracle remote(server.endpoint(), 2);
  CountingOracle counted(remote);
  ModelOracle local(golden::example_model());
  RngStream rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = rng.normal_vector(2);
    ASSERT_EQ(counted.query(x), local.query(x));
  }
  EXPECT_EQ(counted.count(), 1000u);
  EXPECT_EQ(remote.count(), 1000u);
  EXPECT_EQ(server.served(), 1000u);
}

TEST(Tcp, ConcurrentClients) {
  OracleServer server(golden::example_model(), Endpoint::parse("127.0.0.1:0"));
  server.start();
  std::vector<std::thread> pool;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&, t] {
      RemoteOracle c(server.endpoint(), 2);
      RngStream rng(100 + static_cast<std::uint64_t>(t));
      for (int i = 0; i < 100; ++i) {
        const Vector x = rng.normal_vector(2);
        if (c.query(x) != (x[0] >= 0.0 ? 0u : 1u)) ++mismatches;
      }
    });
  }
  for (auto& th : pool) th.join();
  EXPECT_EQ(mismatches.load(), 0);
  EXPECT_EQ(server.served(), 400u);
}

TEST(Tcp, ServerErrorBecomesProtocolError) {
  OracleServer server(golden::example_model(), Endpoint::parse("127.0.0.1:0"));
  server.start();
  RemoteOracle wrong_dim(server.endpoint(), 3);
  EXPECT_THROW(wrong_dim.query(vec::from({1.0, 2.0, 3.0})), ProtocolError);
  EXPECT_EQ(wrong_dim.count(), 0u);
}

TEST(Tcp, MalformedServerResponse) {
  FixedReplyServer fake("LABEL x\n");
  RemoteOracle client(fake.endpoint(), 2);
  EXPECT_THROW(client.query(vec::from({2.0, 0.0})), ProtocolError);
}

TEST(Tcp, SilentServerTimesOut) {
  FixedReplyServer fake("");
  RemoteOracle client(fake.endpoint(), 2, 200);
  EXPECT_THROW(client.query(vec::from({2.0, 0.0})), ProtocolError);
}

TEST(Tcp, ConnectFailureAndBindFailure) {
  OracleServer server(golden::example_model(), Endpoint::parse("127.0.0.1:0"));
  EXPECT_THROW(OracleServer(golden::example_model(), server.endpoint()), Error);
  EXPECT_THROW(RemoteOracle(Endpoint{"127.0.0.1", 1}, 2), ProtocolError);
}
