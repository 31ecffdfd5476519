#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

#include "auditlab/net.hpp"

using namespace auditlab;
using Kind = ManipulationStrategy::Kind;

namespace {

PlatformState default_platform(std::uint64_t seed, std::uint64_t n = 120) {
  GeneratorConfig config;
  config.seed = seed;
  config.n_creators = n;
  return PlatformState::generate(config);
}

// Bare line-oriented socket, for protocol-level poking the RemoteClient
// wrapper would not allow.
struct RawConnection {
  int fd = -1;
  std::string rxbuf;

  RawConnection(const std::string& host, int port) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, host.c_str(), &addr.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  }
  ~RawConnection() {
    if (fd >= 0) ::close(fd);
  }

  void send_raw(const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, 0);
      REQUIRE(n > 0);
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string recv_line() {
    for (;;) {
      const auto nl = rxbuf.find('\n');
      if (nl != std::string::npos) {
        std::string line = rxbuf.substr(0, nl);
        rxbuf.erase(0, nl + 1);
        return line;
      }
      char chunk[65536];
      const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      REQUIRE(n > 0);
      rxbuf.append(chunk, static_cast<std::size_t>(n));
    }
  }

  nlohmann::json roundtrip(const std::string& line) {
    send_raw(line + "\n");
    return nlohmann::json::parse(recv_line());
  }
};

}  // namespace

TEST_CASE("server answers match the in-process sources byte for byte") {
  const PlatformState state = default_platform(1);
  const auto strategy = ManipulationStrategy::parse("demote-privileged:x=0.3:seed=9");
  PlatformServer server(state, strategy, ServeOptions{});
  server.start();

  ManipulatedApi api(state, strategy);
  RemoteClient client("127.0.0.1", server.port());

  SUBCASE("catalog mirrors the platform") {
    const auto catalog = client.creator_catalog();
    REQUIRE(catalog.size() == state.creators().size());
    for (const Creator& c : state.creators())
      CHECK(client.videos_of(c.id) == c.video_ids);
  }

  SUBCASE("api and scrape payloads") {
    for (CreatorId id = 0; id < 40; ++id)
      CHECK(client.api_query(id) == api.api_query(id));
    for (VideoId v = 0; v < 60; ++v)
      CHECK(client.scrape(v) == scrape_query(state, v));
  }

  SUBCASE("unknown ids surface in-band and keep the session alive") {
    CHECK_THROWS_AS(client.api_query(4096), UnknownId);
    CHECK_THROWS_AS(client.scrape(1 << 30), UnknownId);
    CHECK(client.api_query(0) == api.api_query(0));
  }

  server.stop();
}

TEST_CASE("budget enforcement: the fourth data request is refused") {
  const PlatformState state = default_platform(2, 30);
  ServeOptions options;
  options.session_budget = 3;
  PlatformServer server(state, ManipulationStrategy{}, options);
  server.start();

  RemoteClient client("127.0.0.1", server.port());
  (void)client.api_query(0);
  (void)client.api_query(1);
  (void)client.scrape(0);
  CHECK_THROWS_AS(client.api_query(2), BudgetExhausted);
  CHECK_THROWS_AS(client.scrape(1), BudgetExhausted);

  // The session is still alive for budget-free operations.
  const auto budget = client.budget();
  CHECK(budget.limit == 3);
  CHECK(budget.spent == 3);
  CHECK(budget.remaining == 0);
  CHECK(client.creator_catalog().size() == 30);

  SUBCASE("budgets are per session") {
    RemoteClient fresh("127.0.0.1", server.port());
    CHECK(fresh.api_query(0).creator_id == 0);
  }

  server.stop();
}

TEST_CASE("parallel sessions each get their own budget, never one query more") {
  const PlatformState state = default_platform(9, 40);
  ServeOptions options;
  options.session_budget = 20;
  PlatformServer server(state, ManipulationStrategy{}, options);
  server.start();

  std::vector<std::thread> workers;
  std::vector<int> granted(8, 0);
  for (int w = 0; w < 8; ++w) {
    workers.emplace_back([&, w] {
      RemoteClient client("127.0.0.1", server.port());
      for (int i = 0; i < 30; ++i) {
        try {
          (void)client.api_query(static_cast<CreatorId>(i % 40));
          ++granted[w];
        } catch (const BudgetExhausted&) {
        }
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (int g : granted) CHECK(g == 20);
  server.stop();
}

TEST_CASE("token-bucket refill arithmetic") {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  TokenBucket bucket(10.0, t0);  // capacity 10, refill 10/s

  int granted = 0;
  for (int i = 0; i < 15; ++i) granted += bucket.try_take(t0) ? 1 : 0;
  CHECK(granted == 10);  // the burst capacity

  CHECK_FALSE(bucket.try_take(t0 + std::chrono::milliseconds(50)));
  CHECK(bucket.try_take(t0 + std::chrono::milliseconds(150)));  // 1 refilled
  // After a long idle stretch the bucket holds capacity again, not more.
  granted = 0;
  const auto later = t0 + std::chrono::seconds(60);
  for (int i = 0; i < 15; ++i) granted += bucket.try_take(later) ? 1 : 0;
  CHECK(granted == 10);
}

TEST_CASE("rate limiting throttles a hot client to the configured rate") {
  const PlatformState state = default_platform(3, 20);
  ServeOptions options;
  options.rate_limit = 10.0;
  PlatformServer server(state, ManipulationStrategy{}, options);
  server.start();

  RemoteClient client("127.0.0.1", server.port());
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 100; ++i) (void)client.api_query(i % 20);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  // 100 requests at 10/s with a burst of 10: at least ~9 s, minus 20% slack.
  CHECK(elapsed >= 9.0 * 0.8);
  CHECK(elapsed < 60.0);
  server.stop();
}

TEST_CASE("protocol robustness against malformed lines") {
  const PlatformState state = default_platform(4, 25);
  PlatformServer server(state, ManipulationStrategy{}, ServeOptions{});
  server.start();

  RawConnection raw("127.0.0.1", server.port());

  SUBCASE("garbage stays in-band") {
    const nlohmann::json resp = raw.roundtrip("this is not json");
    CHECK(resp.at("ok") == false);
    CHECK(resp.at("error") == "bad_request");
    CHECK(resp.at("id") == 0);
  }

  SUBCASE("unknown op echoes the request id") {
    const nlohmann::json resp = raw.roundtrip(R"({"id":42,"op":"steal"})");
    CHECK(resp.at("id") == 42);
    CHECK(resp.at("error") == "bad_request");
  }

  SUBCASE("missing or mistyped parameters") {
    CHECK(raw.roundtrip(R"({"id":1,"op":"api"})").at("error") == "bad_request");
    CHECK(raw.roundtrip(R"({"id":2,"op":"api","creator_id":"zero"})").at("error") ==
          "bad_request");
    CHECK(raw.roundtrip(R"({"id":-3,"op":"api","creator_id":0})").at("id") == 0);
    CHECK(raw.roundtrip(R"([1,2,3])").at("error") == "bad_request");
  }

  SUBCASE("a fuzz burst never kills the session") {
    Rng rng(2718);
    for (int i = 0; i < 1000; ++i) {
      std::string line;
      const std::size_t len = rng.below(120);
      for (std::size_t k = 0; k < len; ++k) {
        char c = static_cast<char>(rng.below(256));
        if (c == '\n') c = ' ';
        line.push_back(c);
      }
      raw.send_raw(line + "\n");
      (void)raw.recv_line();
    }
    // deep nesting must be rejected, not recursed into
    raw.send_raw(std::string(100000, '[') + "\n");
    const nlohmann::json deep = nlohmann::json::parse(raw.recv_line());
    CHECK(deep.at("error") == "bad_request");

    const nlohmann::json resp = raw.roundtrip(R"({"id":7,"op":"budget"})");
    CHECK(resp.at("ok") == true);
  }

  server.stop();
}

TEST_CASE("remote audits reproduce in-process audits field for field") {
  const PlatformState state = default_platform(5, 150);
  const auto strategy = ManipulationStrategy::parse("demote-privileged:x=0.2:seed=4");
  PlatformServer server(state, strategy, ServeOptions{});
  server.start();

  ManipulatedApi api(state, strategy);
  PlatformScrapeSource scrape(state);
  const ProxySpec perfect = ProxySpec::perfect();

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    BudgetPlan plan{.t = 120, .beta = 0.5, .seed = seed};
    const AuditResult local = run_budgeted_audit(api, scrape, plan, perfect);
    const AuditResult remote = remote_audit("127.0.0.1", server.port(), plan, perfect);
    CHECK(local.to_json() == remote.to_json());
  }
  server.stop();
}

TEST_CASE("emulation through a session fails once B cannot be fully enumerated") {
  const PlatformState state = default_platform(8, 60);
  ServeOptions options;
  options.session_budget = 5;
  PlatformServer server(state, ManipulationStrategy{}, options);
  server.start();

  RemoteClient client("127.0.0.1", server.port());
  const auto catalog = client.creator_catalog();
  CHECK_THROWS_AS(emulate_api(client, catalog), BudgetExhausted);
  server.stop();
}

TEST_CASE("a short server budget aborts the audit with a partial ledger") {
  const PlatformState state = default_platform(6, 150);
  ServeOptions options;
  options.session_budget = 50;
  PlatformServer server(state, ManipulationStrategy{}, options);
  server.start();

  BudgetPlan plan{.t = 200, .beta = 0.5, .seed = 3};
  const AuditResult result =
      remote_audit("127.0.0.1", server.port(), plan, ProxySpec::perfect());
  CHECK(result.aborted);
  CHECK(result.abort_reason.find("budget") != std::string::npos);
  CHECK(result.queries_spent_a + result.queries_spent_b == 50);
  CHECK_FALSE(result.parity.has_value());
  server.stop();
}

TEST_CASE("bind failures are reported") {
  const PlatformState state = default_platform(7, 10);
  ServeOptions options;
  options.bind_host = "definitely-not-an-address";
  PlatformServer server(state, ManipulationStrategy{}, options);
  CHECK_THROWS_AS(server.start(), NetError);

  ServeOptions remote_host;
  remote_host.bind_host = "203.0.113.7";  // TEST-NET, not a local interface
  PlatformServer unroutable(state, ManipulationStrategy{}, remote_host);
  CHECK_THROWS_AS(unroutable.start(), NetError);

  ServeOptions taken;
  PlatformServer first(state, ManipulationStrategy{}, taken);
  first.start();
  taken.port = first.port();
  PlatformServer second(state, ManipulationStrategy{}, taken);
  CHECK_THROWS_AS(second.start(), NetError);
  first.stop();
}
