#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "auditlab/engine.hpp"
#include "auditlab/platform.hpp"
#include "auditlab/sources.hpp"

namespace auditlab {

// Wire format: UTF-8 JSON, one object per line, '\n' terminator.
// Request:  {"id":u64,"op":"catalog"|"api"|"scrape"|"budget",
//            "creator_id"?:u64,"video_id"?:u64}
// Response: {"id":u64,"ok":true,"payload":{...}}
//        or {"id":u64,"ok":false,"error":"budget_exhausted"|"rate_limited"|
//            "unknown_id"|"bad_request"}
// Money fields are integer micro-dollars. "api" and "scrape" consume the
// session budget; "catalog" and "budget" are free.

struct ServeOptions {
  std::string bind_host = "127.0.0.1";
  int port = 0;  // 0 picks an ephemeral port
  std::uint64_t session_budget = UINT64_MAX;
  double rate_limit = 0.0;  // data requests per second; 0 = unlimited
};

// Token bucket with capacity == rate and refill rate per second. Time is a
// parameter so refill arithmetic stays testable without sleeping.
class TokenBucket {
public:
  TokenBucket(double rate, std::chrono::steady_clock::time_point now)
      : rate_(rate), tokens_(rate), last_(now) {}

  bool try_take(std::chrono::steady_clock::time_point now);

private:
  double rate_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

// Serves A and B for one platform + manipulation strategy. Each connection is
// a session with its own budget and rate limiter; the platform is shared
// read-only.
class PlatformServer {
public:
  PlatformServer(PlatformState state, const ManipulationStrategy& strategy,
                 const ServeOptions& options);
  ~PlatformServer();

  PlatformServer(const PlatformServer&) = delete;
  PlatformServer& operator=(const PlatformServer&) = delete;

  void start();  // binds and begins accepting; throws NetError on failure
  void stop();   // closes the listener and all sessions, joins threads
  int port() const { return port_; }
  const std::string& host() const { return options_.bind_host; }

private:
  void accept_loop();
  void session(int fd);
  std::string handle_line(const std::string& line, std::uint64_t& spent,
                          TokenBucket& bucket);

  PlatformState state_;
  ManipulatedApi api_;
  ServeOptions options_;
  std::string catalog_payload_;  // rendered once; the index is public
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<int> session_fds_;
  std::vector<std::thread> session_threads_;
};

// Synchronous client for one session. Implements both query surfaces so the
// in-process audit code runs unchanged over the wire. Retries rate-limited
// requests after a short pause; a budget refusal throws BudgetExhausted.
class RemoteClient final : public ApiSource, public ScrapeSource {
public:
  RemoteClient(const std::string& host, int port);
  ~RemoteClient() override;

  RemoteClient(const RemoteClient&) = delete;
  RemoteClient& operator=(const RemoteClient&) = delete;

  std::vector<CreatorId> creator_catalog() override;
  std::vector<VideoId> videos_of(CreatorId id) override;
  ApiAnswer api_query(CreatorId id) override;
  ScrapAnswer scrape(VideoId id) override;

  struct BudgetInfo {
    std::uint64_t limit = 0;
    std::uint64_t spent = 0;
    std::uint64_t remaining = 0;
  };
  BudgetInfo budget();

  // One raw request line out, one response line back (retrying rate limits).
  nlohmann::json request(nlohmann::json req);

private:
  void ensure_catalog();
  std::string read_line();

  int fd_ = -1;
  std::uint64_t next_id_ = 1;
  std::string rxbuf_;
  std::optional<std::map<CreatorId, std::vector<VideoId>>> catalog_;
};

// Same contract as run_budgeted_audit, driven through a server session.
AuditResult remote_audit(const std::string& host, int port,
                         const BudgetPlan& plan, const ProxySpec& proxy);

}  // namespace auditlab
