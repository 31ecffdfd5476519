#include "auditlab/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace auditlab {

namespace {

constexpr std::size_t kMaxLineBytes = 1 << 20;

void close_quietly(int fd) {
  if (fd >= 0) ::close(fd);
}

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

nlohmann::ordered_json ok_response(std::uint64_t id, nlohmann::ordered_json payload) {
  nlohmann::ordered_json resp;
  resp["id"] = id;
  resp["ok"] = true;
  resp["payload"] = std::move(payload);
  return resp;
}

nlohmann::ordered_json error_response(std::uint64_t id, const char* code) {
  nlohmann::ordered_json resp;
  resp["id"] = id;
  resp["ok"] = false;
  resp["error"] = code;
  return resp;
}

std::optional<std::uint64_t> read_u64_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) return std::nullopt;
  return v.get<std::uint64_t>();
}

}  // namespace

bool TokenBucket::try_take(std::chrono::steady_clock::time_point now) {
  const double elapsed = std::chrono::duration<double>(now - last_).count();
  last_ = now;
  tokens_ = std::min(rate_, tokens_ + elapsed * rate_);
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

PlatformServer::PlatformServer(PlatformState state,
                               const ManipulationStrategy& strategy,
                               const ServeOptions& options)
    : state_(std::move(state)), api_(state_, strategy), options_(options) {
  nlohmann::ordered_json creators = nlohmann::json::array();
  for (const Creator& c : state_.creators()) {
    nlohmann::ordered_json entry;
    entry["creator_id"] = c.id;
    entry["video_ids"] = c.video_ids;
    creators.push_back(std::move(entry));
  }
  nlohmann::ordered_json catalog;
  catalog["creators"] = std::move(creators);
  catalog_payload_ = catalog.dump();
}

PlatformServer::~PlatformServer() { stop(); }

void PlatformServer::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw NetError("socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(options_.port));
  if (::inet_pton(AF_INET, options_.bind_host.c_str(), &addr.sin_addr) != 1) {
    close_quietly(listen_fd_);
    listen_fd_ = -1;
    throw NetError("bad bind address: " + options_.bind_host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const std::string err = std::strerror(errno);
    close_quietly(listen_fd_);
    listen_fd_ = -1;
    throw NetError("bind failed on " + options_.bind_host + ":" +
                   std::to_string(options_.port) + ": " + err);
  }
  if (::listen(listen_fd_, 64) < 0) {
    close_quietly(listen_fd_);
    listen_fd_ = -1;
    throw NetError("listen failed");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);

  accept_thread_ = std::thread([this] { accept_loop(); });
}

void PlatformServer::stop() {
  stopping_.store(true);
  // Unblock accept() but close the fd only after the thread has joined, so a
  // reused descriptor can never be accepted on.
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (accept_thread_.joinable()) accept_thread_.join();
  if (listen_fd_ >= 0) {
    close_quietly(listen_fd_);
    listen_fd_ = -1;
  }
  // With the accept loop gone, no new sessions can appear; drain the rest.
  std::vector<int> fds;
  std::vector<std::thread> threads;
  {
    std::lock_guard<std::mutex> lock(mu_);
    fds.swap(session_fds_);
    threads.swap(session_threads_);
  }
  for (int fd : fds) ::shutdown(fd, SHUT_RDWR);
  for (std::thread& t : threads)
    if (t.joinable()) t.join();
  for (int fd : fds) close_quietly(fd);
}

void PlatformServer::accept_loop() {
  while (!stopping_.load()) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_.load()) break;
      if (errno == EINTR) continue;
      break;
    }
    std::lock_guard<std::mutex> lock(mu_);
    session_fds_.push_back(fd);
    session_threads_.emplace_back([this, fd] { session(fd); });
  }
}

void PlatformServer::session(int fd) {
  std::uint64_t spent = 0;
  TokenBucket bucket(options_.rate_limit > 0.0 ? options_.rate_limit : 1.0,
                     std::chrono::steady_clock::now());
  std::string buffer;
  bool overlong = false;  // swallowing an oversized line until its newline
  char chunk[4096];

  for (;;) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));

    for (;;) {
      const auto nl = buffer.find('\n');
      if (nl == std::string::npos) {
        if (buffer.size() > kMaxLineBytes) {
          buffer.clear();
          overlong = true;
          if (!send_all(fd, error_response(0, "bad_request").dump() + "\n")) return;
        }
        break;
      }
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (overlong) {  // discard the tail of the oversized line
        overlong = false;
        continue;
      }
      const std::string response = handle_line(line, spent, bucket);
      if (!send_all(fd, response)) return;
    }
  }
}

std::string PlatformServer::handle_line(const std::string& line, std::uint64_t& spent,
                                        TokenBucket& bucket) {
  // Cheap nesting cap before the recursive parser sees the input; legitimate
  // requests are flat objects.
  int depth = 0, max_depth = 0;
  for (const char ch : line) {
    if (ch == '[' || ch == '{') max_depth = std::max(max_depth, ++depth);
    if (ch == ']' || ch == '}') --depth;
  }
  if (max_depth > 64) return error_response(0, "bad_request").dump() + "\n";

  nlohmann::json req;
  try {
    req = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    return error_response(0, "bad_request").dump() + "\n";
  }
  if (!req.is_object()) return error_response(0, "bad_request").dump() + "\n";

  const std::optional<std::uint64_t> id = read_u64_field(req, "id");
  const std::uint64_t rid = id.value_or(0);
  if (!id || !req.contains("op") || !req.at("op").is_string())
    return error_response(rid, "bad_request").dump() + "\n";
  const std::string op = req.at("op").get<std::string>();

  try {
    if (op == "catalog") {
      nlohmann::ordered_json resp;
      resp["id"] = rid;
      resp["ok"] = true;
      // Payload was rendered at startup; splice it in as raw JSON.
      std::string out = resp.dump();
      out.pop_back();  // '}'
      out += ",\"payload\":" + catalog_payload_ + "}\n";
      return out;
    }
    if (op == "budget") {
      nlohmann::ordered_json payload;
      payload["limit"] = options_.session_budget;
      payload["spent"] = spent;
      payload["remaining"] = options_.session_budget - spent;
      return ok_response(rid, std::move(payload)).dump() + "\n";
    }
    if (op == "api" || op == "scrape") {
      if (spent >= options_.session_budget)
        return error_response(rid, "budget_exhausted").dump() + "\n";
      if (options_.rate_limit > 0.0 &&
          !bucket.try_take(std::chrono::steady_clock::now()))
        return error_response(rid, "rate_limited").dump() + "\n";

      if (op == "api") {
        const auto creator = read_u64_field(req, "creator_id");
        if (!creator) return error_response(rid, "bad_request").dump() + "\n";
        const ApiAnswer answer = api_.api_query(*creator);
        ++spent;
        nlohmann::ordered_json payload;
        payload["creator_id"] = answer.creator_id;
        payload["popularity"] = answer.popularity;
        payload["earnings"] = answer.earnings;
        return ok_response(rid, std::move(payload)).dump() + "\n";
      }
      const auto video = read_u64_field(req, "video_id");
      if (!video) return error_response(rid, "bad_request").dump() + "\n";
      const ScrapAnswer answer = scrape_query(state_, *video);
      ++spent;
      nlohmann::ordered_json payload;
      payload["video_id"] = answer.video_id;
      payload["views"] = answer.views;
      payload["rate"] = answer.rate;
      payload["creator_id"] = answer.creator_id;
      return ok_response(rid, std::move(payload)).dump() + "\n";
    }
    return error_response(rid, "bad_request").dump() + "\n";
  } catch (const UnknownId&) {
    return error_response(rid, "unknown_id").dump() + "\n";
  } catch (const std::exception&) {
    return error_response(rid, "bad_request").dump() + "\n";
  }
}

RemoteClient::RemoteClient(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw NetError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    close_quietly(fd_);
    throw NetError("bad server address: " + host);
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const std::string err = std::strerror(errno);
    close_quietly(fd_);
    throw NetError("connect to " + host + ":" + std::to_string(port) +
                   " failed: " + err);
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

RemoteClient::~RemoteClient() { close_quietly(fd_); }

std::string RemoteClient::read_line() {
  for (;;) {
    const auto nl = rxbuf_.find('\n');
    if (nl != std::string::npos) {
      std::string line = rxbuf_.substr(0, nl);
      rxbuf_.erase(0, nl + 1);
      return line;
    }
    char chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) throw NetError("server closed the connection");
    rxbuf_.append(chunk, static_cast<std::size_t>(n));
  }
}

nlohmann::json RemoteClient::request(nlohmann::json req) {
  const std::uint64_t id = next_id_++;
  req["id"] = id;
  const std::string line = req.dump() + "\n";
  for (;;) {
    if (!send_all(fd_, line)) throw NetError("send failed");
    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(read_line());
    } catch (const nlohmann::json::exception& e) {
      throw NetError(std::string("unparseable server response: ") + e.what());
    }
    if (read_u64_field(resp, "id").value_or(0) != id)
      throw NetError("server response id mismatch");
    if (resp.value("ok", false)) return resp.at("payload");

    const std::string error = resp.value("error", "unknown");
    if (error == "rate_limited") {
      std::this_thread::sleep_for(std::chrono::milliseconds(25));
      continue;  // resend the identical line
    }
    if (error == "budget_exhausted")
      throw BudgetExhausted("server refused the query: session budget exhausted");
    if (error == "unknown_id") throw UnknownId("server reports an unknown id");
    throw NetError("server error: " + error);
  }
}

void RemoteClient::ensure_catalog() {
  if (catalog_) return;
  const nlohmann::json payload = request({{"op", "catalog"}});
  std::map<CreatorId, std::vector<VideoId>> catalog;
  for (const auto& entry : payload.at("creators")) {
    catalog[entry.at("creator_id").get<CreatorId>()] =
        entry.at("video_ids").get<std::vector<VideoId>>();
  }
  catalog_ = std::move(catalog);
}

std::vector<CreatorId> RemoteClient::creator_catalog() {
  ensure_catalog();
  std::vector<CreatorId> ids;
  ids.reserve(catalog_->size());
  for (const auto& [id, videos] : *catalog_) ids.push_back(id);
  return ids;
}

std::vector<VideoId> RemoteClient::videos_of(CreatorId id) {
  ensure_catalog();
  const auto it = catalog_->find(id);
  if (it == catalog_->end())
    throw UnknownId("creator " + std::to_string(id) + " not in the catalog");
  return it->second;
}

ApiAnswer RemoteClient::api_query(CreatorId id) {
  const nlohmann::json payload = request({{"op", "api"}, {"creator_id", id}});
  return ApiAnswer{payload.at("creator_id").get<CreatorId>(),
                   payload.at("popularity").get<Count>(),
                   payload.at("earnings").get<Money>()};
}

ScrapAnswer RemoteClient::scrape(VideoId id) {
  const nlohmann::json payload = request({{"op", "scrape"}, {"video_id", id}});
  return ScrapAnswer{payload.at("video_id").get<VideoId>(),
                     payload.at("views").get<Count>(),
                     payload.at("rate").get<Money>(),
                     payload.at("creator_id").get<CreatorId>()};
}

RemoteClient::BudgetInfo RemoteClient::budget() {
  const nlohmann::json payload = request({{"op", "budget"}});
  return BudgetInfo{payload.at("limit").get<std::uint64_t>(),
                    payload.at("spent").get<std::uint64_t>(),
                    payload.at("remaining").get<std::uint64_t>()};
}

AuditResult remote_audit(const std::string& host, int port,
                         const BudgetPlan& plan, const ProxySpec& proxy) {
  RemoteClient client(host, port);
  return run_budgeted_audit(client, client, plan, proxy);
}

}  // namespace auditlab
