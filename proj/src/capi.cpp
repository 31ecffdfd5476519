#include "auditlab/auditlab.h"

#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>

#include "auditlab/census.hpp"
#include "auditlab/engine.hpp"
#include "auditlab/net.hpp"
#include "auditlab/platform.hpp"
#include "auditlab/util.hpp"

using nlohmann::json;

struct audlab_platform {
  explicit audlab_platform(auditlab::PlatformState s) : state(std::move(s)) {}
  auditlab::PlatformState state;
};

struct audlab_server {
  std::unique_ptr<auditlab::PlatformServer> server;
  bool stopped = false;
};

namespace {

thread_local std::string g_last_error;

constexpr const char* kVersion = "0.1.0";

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

int fail_null(const char* what) {
  return fail(AUDLAB_ERR_NULL_ARGUMENT, std::string(what) + " must not be null");
}

// Exceptions cross the C boundary as status codes plus the thread-local
// message.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return AUDLAB_OK;
  } catch (const auditlab::BudgetExhausted& e) {
    return fail(AUDLAB_ERR_BUDGET_EXHAUSTED, e.what());
  } catch (const auditlab::UnknownId& e) {
    return fail(AUDLAB_ERR_UNKNOWN_ID, e.what());
  } catch (const auditlab::ParseError& e) {
    return fail(AUDLAB_ERR_PARSE, e.what());
  } catch (const auditlab::InvalidArgument& e) {
    return fail(AUDLAB_ERR_INVALID_ARGUMENT, e.what());
  } catch (const auditlab::IoError& e) {
    return fail(AUDLAB_ERR_IO, e.what());
  } catch (const auditlab::NetError& e) {
    return fail(AUDLAB_ERR_NET, e.what());
  } catch (const auditlab::EstimatorError& e) {
    return fail(AUDLAB_ERR_ESTIMATOR, e.what());
  } catch (const json::exception& e) {
    return fail(AUDLAB_ERR_PARSE, e.what());
  } catch (const std::exception& e) {
    return fail(AUDLAB_ERR_RUNTIME, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_params(const char* params_json) {
  if (params_json == nullptr) return json::object();
  json params = json::parse(params_json);
  if (!params.is_object())
    throw auditlab::ParseError("params must be a JSON object");
  return params;
}

std::vector<double> grid_from(const json& value, const char* what) {
  if (value.is_string()) return auditlab::parse_grid(value.get<std::string>());
  if (value.is_array()) {
    std::vector<double> out;
    for (const auto& v : value) out.push_back(v.get<double>());
    if (out.empty()) throw auditlab::InvalidArgument(std::string(what) + " grid is empty");
    return out;
  }
  if (value.is_number()) return {value.get<double>()};
  throw auditlab::ParseError(std::string(what) + " must be a grid string or array");
}

auditlab::BudgetPlan plan_from(const json& params) {
  auditlab::BudgetPlan plan;
  plan.t = params.value("t", plan.t);
  plan.beta = params.value("beta", plan.beta);
  plan.seed = params.value("seed", plan.seed);
  plan.recheck_arm1 = params.value("recheck_arm1", plan.recheck_arm1);
  return plan;
}

auditlab::ProxySpec proxy_from(const json& params, std::uint64_t input_space) {
  return auditlab::ProxySpec::parse(params.value("proxy", std::string("perfect")),
                                    input_space);
}

auditlab::ManipulationStrategy strategy_from(const json& params) {
  return auditlab::ManipulationStrategy::parse(
      params.value("strategy", std::string("none")));
}

}  // namespace

extern "C" {

const char* audlab_version(void) { return kVersion; }

const char* audlab_last_error(void) { return g_last_error.c_str(); }

void audlab_string_free(char* s) { delete[] s; }

int audlab_platform_generate(const char* config_json, audlab_platform** out) {
  if (out == nullptr) return fail_null("out");
  *out = nullptr;
  return guarded([&] {
    auditlab::GeneratorConfig config;
    if (config_json != nullptr)
      config = json::parse(config_json).get<auditlab::GeneratorConfig>();
    *out = std::make_unique<audlab_platform>(auditlab::PlatformState::generate(config))
               .release();
  });
}

int audlab_platform_from_json(const char* document, audlab_platform** out) {
  if (document == nullptr) return fail_null("document");
  if (out == nullptr) return fail_null("out");
  *out = nullptr;
  return guarded([&] {
    *out = std::make_unique<audlab_platform>(
               auditlab::PlatformState::deserialize(document))
               .release();
  });
}

int audlab_platform_to_json(const audlab_platform* platform, char** out_document) {
  if (platform == nullptr) return fail_null("platform");
  if (out_document == nullptr) return fail_null("out_document");
  return guarded([&] { *out_document = copy_string(platform->state.serialize()); });
}

void audlab_platform_free(audlab_platform* platform) { delete platform; }

int audlab_platform_counts(const audlab_platform* platform, uint64_t* out_creators,
                           uint64_t* out_videos) {
  if (platform == nullptr) return fail_null("platform");
  return guarded([&] {
    if (out_creators != nullptr) *out_creators = platform->state.creators().size();
    if (out_videos != nullptr) *out_videos = platform->state.videos().size();
  });
}

int audlab_platform_true_parity(const audlab_platform* platform, double* out) {
  if (platform == nullptr) return fail_null("platform");
  if (out == nullptr) return fail_null("out");
  return guarded([&] { *out = platform->state.true_parity(); });
}

int audlab_audit(const audlab_platform* platform, const char* params_json,
                 char** out_result) {
  if (platform == nullptr) return fail_null("platform");
  if (out_result == nullptr) return fail_null("out_result");
  return guarded([&] {
    const json params = parse_params(params_json);
    const auto plan = plan_from(params);
    const auto proxy = proxy_from(params, platform->state.creators().size());
    auditlab::ManipulatedApi api(platform->state, strategy_from(params));
    auditlab::PlatformScrapeSource scrape(platform->state);
    const auto result = auditlab::run_budgeted_audit(api, scrape, plan, proxy);
    *out_result = copy_string(result.to_json().dump());
  });
}

int audlab_remote_audit(const char* host, int port, const char* params_json,
                        char** out_result) {
  if (host == nullptr) return fail_null("host");
  if (out_result == nullptr) return fail_null("out_result");
  return guarded([&] {
    const json params = parse_params(params_json);
    const auto plan = plan_from(params);
    // The remote proxy's input space is learned from the catalog.
    auditlab::RemoteClient client(host, port);
    const auto catalog = client.creator_catalog();
    const auto proxy = proxy_from(params, catalog.size());
    const auto result = auditlab::run_budgeted_audit(client, client, plan, proxy);
    *out_result = copy_string(result.to_json().dump());
  });
}

int audlab_sweep(const audlab_platform* platform, const char* params_json,
                 char** out_result) {
  if (platform == nullptr) return fail_null("platform");
  if (out_result == nullptr) return fail_null("out_result");
  return guarded([&] {
    const json params = parse_params(params_json);
    const auto strategy = strategy_from(params);
    const auto xs = grid_from(params.value("xs", json("0:1:0.1")), "xs");
    const std::uint64_t runs = params.value("runs", std::uint64_t{50});
    const std::uint64_t seed = params.value("seed", std::uint64_t{0});
    const auto curve = auditlab::manipulation_sweep(platform->state, strategy.kind,
                                                    xs, runs, seed);
    json result = curve.to_json();
    // Subgroup sizes let callers restate x as a fraction of all answers.
    std::uint64_t privileged = 0;
    for (const auto& c : platform->state.creators())
      if (c.privileged) ++privileged;
    result["n_creators"] = platform->state.creators().size();
    result["n_privileged"] = privileged;
    *out_result = copy_string(result.dump());
  });
}

int audlab_pareto(const audlab_platform* platform, const char* params_json,
                  char** out_result) {
  if (platform == nullptr) return fail_null("platform");
  if (out_result == nullptr) return fail_null("out_result");
  return guarded([&] {
    const json params = parse_params(params_json);
    const auto strategy = strategy_from(params);
    const auto betas = grid_from(params.value("betas", json("0:1:0.1")), "betas");
    const std::uint64_t t = params.value("t", std::uint64_t{200});
    const std::uint64_t runs = params.value("runs", std::uint64_t{50});
    const std::uint64_t seed = params.value("seed", std::uint64_t{0});
    const auto proxy = proxy_from(params, platform->state.creators().size());
    const auto points = auditlab::pareto_sweep(platform->state, strategy, t, betas,
                                               runs, seed, proxy);
    *out_result = copy_string(auditlab::pareto_to_json(points).dump());
  });
}

int audlab_census(const char* params_json, char** out_result) {
  if (params_json == nullptr) return fail_null("params_json");
  if (out_result == nullptr) return fail_null("out_result");
  return guarded([&] {
    const json params = parse_params(params_json);
    auditlab::CensusAuditConfig config;
    if (!params.contains("train") || !params.contains("test"))
      throw auditlab::InvalidArgument("census params need 'train' and 'test' paths");
    config.train_path = params.at("train").get<std::string>();
    config.test_path = params.at("test").get<std::string>();
    config.error_rate = params.value("error_rate", config.error_rate);
    config.seed = params.value("seed", config.seed);
    config.hyper.epochs = params.value("epochs", config.hyper.epochs);
    config.hyper.learning_rate =
        params.value("learning_rate", config.hyper.learning_rate);
    config.orientation = auditlab::parse_di_orientation(
        params.value("di_orientation", std::string("swapped")));
    if (params.contains("name_table"))
      config.name_table_path = params.at("name_table").get<std::string>();
    *out_result = copy_string(auditlab::run_census_audit(config).dump());
  });
}

int audlab_serve(const audlab_platform* platform, const char* params_json,
                 audlab_server** out) {
  if (platform == nullptr) return fail_null("platform");
  if (out == nullptr) return fail_null("out");
  *out = nullptr;
  return guarded([&] {
    const json params = parse_params(params_json);
    auditlab::ServeOptions options;
    options.bind_host = params.value("bind", options.bind_host);
    options.port = params.value("port", options.port);
    options.session_budget = params.value("budget_limit", options.session_budget);
    options.rate_limit = params.value("rate_limit", options.rate_limit);
    auto handle = std::make_unique<audlab_server>();
    handle->server = std::make_unique<auditlab::PlatformServer>(
        platform->state, strategy_from(params), options);
    handle->server->start();
    *out = handle.release();
  });
}

int audlab_server_port(const audlab_server* server, int* out_port) {
  if (server == nullptr) return fail_null("server");
  if (out_port == nullptr) return fail_null("out_port");
  *out_port = server->server->port();
  return AUDLAB_OK;
}

int audlab_server_stop(audlab_server* server) {
  if (server == nullptr) return fail_null("server");
  return guarded([&] {
    if (!server->stopped) {
      server->server->stop();
      server->stopped = true;
    }
  });
}

void audlab_server_free(audlab_server* server) {
  if (server == nullptr) return;
  if (!server->stopped) server->server->stop();
  delete server;
}

}  // extern "C"
