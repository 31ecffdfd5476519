// auditlab command-line driver. Talks to the core exclusively through the C
// API in auditlab/auditlab.h; its own work is flag parsing, file I/O, and
// CSV/manifest rendering.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "auditlab/auditlab.h"

using nlohmann::json;

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(int rc) {
  if (rc != AUDLAB_OK) throw CliError(audlab_last_error());
}

// Wrap a C-API call returning char** into a std::string with cleanup.
template <class Fn>
std::string capi_string(Fn&& fn) {
  char* raw = nullptr;
  check(fn(&raw));
  std::string out(raw != nullptr ? raw : "");
  audlab_string_free(raw);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError("cannot write " + path);
  out << content;
  if (!out) throw CliError("write failed: " + path);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct PlatformOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> n_creators;
  std::optional<double> privileged_fraction;
  std::string video_law;
  std::optional<std::int64_t> views_min, views_max;
  std::optional<std::int64_t> rate_privileged, rate_regular;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "platform JSON produced by 'gen'");
    cmd->add_option("--seed", seed, "base seed for generation and runs");
    cmd->add_option("--n-creators", n_creators, "generator override");
    cmd->add_option("--privileged-fraction", privileged_fraction, "generator override");
    cmd->add_option("--video-law", video_law,
                    "generator override, e.g. rev-trunc-exp:3:1:100");
    cmd->add_option("--views-min", views_min, "generator override");
    cmd->add_option("--views-max", views_max, "generator override");
    cmd->add_option("--rate-privileged", rate_privileged,
                    "generator override (micro-dollars per view)");
    cmd->add_option("--rate-regular", rate_regular,
                    "generator override (micro-dollars per view)");
  }

  json generation_request() const {
    json config{{"seed", seed}};
    if (n_creators) config["n_creators"] = *n_creators;
    if (privileged_fraction) config["privileged_fraction"] = *privileged_fraction;
    if (!video_law.empty()) config["video_count_law"] = video_law;
    if (views_min) config["views_min"] = *views_min;
    if (views_max) config["views_max"] = *views_max;
    if (rate_privileged) config["rate_privileged"] = *rate_privileged;
    if (rate_regular) config["rate_regular"] = *rate_regular;
    return config;
  }
};

struct PlatformHandle {
  audlab_platform* ptr = nullptr;
  json provenance;  // platform section of the manifest

  ~PlatformHandle() { audlab_platform_free(ptr); }
};

PlatformHandle make_platform(const PlatformOpts& opts) {
  PlatformHandle handle;
  if (!opts.config_path.empty()) {
    const std::string doc = read_file(opts.config_path);
    check(audlab_platform_from_json(doc.c_str(), &handle.ptr));
    handle.provenance = {{"file", opts.config_path},
                         {"config", json::parse(doc).at("config")}};
  } else {
    const std::string request = opts.generation_request().dump();
    check(audlab_platform_generate(request.c_str(), &handle.ptr));
    const std::string doc = capi_string([&](char** out) {
      return audlab_platform_to_json(handle.ptr, out);
    });
    handle.provenance = {{"generated", true},
                         {"config", json::parse(doc).at("config")}};
  }
  return handle;
}

void write_manifest(const std::string& out_path, const std::string& subcommand,
                    const std::vector<std::string>& argv, const json& params,
                    const json& platform, const std::vector<std::string>& outputs) {
  json manifest{{"tool", "auditlab"},
                {"version", audlab_version()},
                {"subcommand", subcommand},
                {"argv", argv},
                {"params", params},
                {"outputs", outputs}};
  if (!platform.is_null()) manifest["platform"] = platform;
  write_file(out_path + ".manifest.json", manifest.dump(2) + "\n");
}

std::pair<std::string, int> split_host_port(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos)
    throw CliError("address must be host:port, got " + address);
  const std::string host = address.substr(0, colon);
  const int port = std::stoi(address.substr(colon + 1));
  return {host, port};
}

int cmd_gen(const PlatformOpts& opts, const std::string& out,
            const std::vector<std::string>& argv) {
  PlatformOpts generate = opts;
  generate.config_path.clear();  // gen always generates
  PlatformHandle platform = make_platform(generate);
  const std::string doc = capi_string(
      [&](char** o) { return audlab_platform_to_json(platform.ptr, o); });
  write_file(out, doc + "\n");

  uint64_t creators = 0, videos = 0;
  check(audlab_platform_counts(platform.ptr, &creators, &videos));
  std::cout << "wrote " << out << " (" << creators << " creators, " << videos
            << " videos)\n";
  write_manifest(out, "gen", argv, generate.generation_request(),
                 platform.provenance, {out});
  return 0;
}

int cmd_sweep(const PlatformOpts& opts, const std::string& strategy,
              const std::string& xs, std::uint64_t runs, const std::string& out,
              const std::vector<std::string>& argv) {
  PlatformHandle platform = make_platform(opts);
  const json params{
      {"strategy", strategy}, {"xs", xs}, {"runs", runs}, {"seed", opts.seed}};
  const std::string params_str = params.dump();
  const json result = json::parse(capi_string([&](char** o) {
    return audlab_sweep(platform.ptr, params_str.c_str(), o);
  }));

  std::ostringstream csv;
  csv << "strategy,x,run,parity_A,parity_B\n";
  const std::string name = result.at("strategy").get<std::string>();
  for (const auto& point : result.at("points")) {
    const double x = point.at("x").get<double>();
    const auto& pa = point.at("parity_a");
    const auto& pb = point.at("parity_b");
    for (std::size_t run = 0; run < pa.size(); ++run) {
      csv << name << ',' << fmt(x) << ',' << run << ','
          << fmt(pa[run].get<double>()) << ',' << fmt(pb[run].get<double>())
          << '\n';
    }
  }
  write_file(out, csv.str());

  // Threshold report, with x restated as a fraction of all answers.
  json threshold{{"strategy", name}};
  threshold["x_star"] = result.at("x_star");
  threshold["x_star_overall"] = json(nullptr);
  if (result.at("x_star").is_number()) {
    const double x_star = result.at("x_star").get<double>();
    const auto n = result.at("n_creators").get<double>();
    const auto n_priv = result.at("n_privileged").get<double>();
    if (name == "demote-privileged")
      threshold["x_star_overall"] = x_star * n_priv / n;
    else if (name == "promote-regular")
      threshold["x_star_overall"] = x_star * (n - n_priv) / n;
    else
      threshold["x_star_overall"] = x_star;  // pass fraction; no per-answer form
  }
  const std::string threshold_path = out + ".threshold.json";
  write_file(threshold_path, threshold.dump(2) + "\n");

  std::cout << "wrote " << out << " and " << threshold_path << "\n";
  write_manifest(out, "sweep", argv, params, platform.provenance,
                 {out, threshold_path});
  return 0;
}

int cmd_pareto(const PlatformOpts& opts, const std::string& strategy,
               std::uint64_t t, const std::string& betas, std::uint64_t runs,
               const std::string& proxy, const std::string& out,
               const std::vector<std::string>& argv) {
  PlatformHandle platform = make_platform(opts);
  const json params{{"strategy", strategy}, {"t", t},          {"betas", betas},
                    {"runs", runs},         {"seed", opts.seed}, {"proxy", proxy}};
  const std::string params_str = params.dump();
  const json result = json::parse(capi_string([&](char** o) {
    return audlab_pareto(platform.ptr, params_str.c_str(), o);
  }));

  std::ostringstream csv;
  csv << "beta,epsilon_mean,p_detect,runs,q10,q90,on_frontier\n";
  for (const auto& point : result.at("points")) {
    csv << fmt(point.at("beta").get<double>()) << ','
        << fmt(point.at("epsilon_mean").get<double>()) << ','
        << fmt(point.at("p_detect").get<double>()) << ','
        << point.at("runs").get<std::uint64_t>() << ','
        << fmt(point.at("q10").get<double>()) << ','
        << fmt(point.at("q90").get<double>()) << ','
        << (point.at("on_frontier").get<bool>() ? 1 : 0) << '\n';
  }
  write_file(out, csv.str());
  std::cout << "wrote " << out << "\n";
  write_manifest(out, "pareto", argv, params, platform.provenance, {out});
  return 0;
}

int cmd_audit(const PlatformOpts& opts, const std::string& strategy,
              std::uint64_t t, double beta, const std::string& proxy,
              const std::string& connect, const std::string& out,
              const std::string& format, const std::vector<std::string>& argv) {
  const json params{{"strategy", strategy}, {"t", t},    {"beta", beta},
                    {"seed", opts.seed},    {"proxy", proxy}};
  const std::string params_str = params.dump();

  json platform_provenance;
  std::string result_str;
  if (!connect.empty()) {
    const auto [host, port] = split_host_port(connect);
    result_str = capi_string([&](char** o) {
      return audlab_remote_audit(host.c_str(), port, params_str.c_str(), o);
    });
    platform_provenance = {{"remote", connect}};
  } else {
    PlatformHandle platform = make_platform(opts);
    result_str = capi_string([&](char** o) {
      return audlab_audit(platform.ptr, params_str.c_str(), o);
    });
    platform_provenance = platform.provenance;
  }
  const json result = json::parse(result_str);

  if (out.empty()) {
    std::cout << result.dump(2) << "\n";
    return 0;
  }
  std::vector<std::string> outputs{out};
  if (format == "json") {
    write_file(out, result.dump(2) + "\n");
  } else if (format == "csv") {
    std::ostringstream csv;
    csv << "estimator,value,decision,t_A,epsilon\n";
    const json& parity = result.at("parity");
    const json& accuracy = result.at("accuracy");
    csv << "economic_parity,";
    csv << (parity.is_null() ? "" : fmt(parity.at("value").get<double>())) << ',';
    csv << (parity.is_null() ? ""
                             : std::to_string(parity.at("decision").get<int>()))
        << ',';
    csv << result.at("t_a").get<std::uint64_t>() << ',';
    csv << (accuracy.is_null() ? "" : fmt(accuracy.at("epsilon").get<double>()))
        << '\n';
    write_file(out, csv.str());

    std::ostringstream flags;
    flags << "creator_id,declared_e,reconstructed_e,complete\n";
    for (const auto& f : result.at("consistency").at("flags")) {
      flags << f.at("creator_id").get<std::uint64_t>() << ','
            << f.at("declared_earnings").get<std::int64_t>() << ','
            << f.at("reconstructed_earnings").get<std::int64_t>() << ','
            << (f.at("complete").get<bool>() ? 1 : 0) << '\n';
    }
    const std::string flags_path = out + ".flags.csv";
    write_file(flags_path, flags.str());
    outputs.push_back(flags_path);
  } else {
    throw CliError("unknown format: " + format);
  }
  std::cout << "wrote " << out << "\n";
  write_manifest(out, "audit", argv, params, platform_provenance, outputs);
  return 0;
}

int cmd_census(const json& params, const std::string& out,
               const std::vector<std::string>& argv) {
  const std::string params_str = params.dump();
  const json result = json::parse(capi_string(
      [&](char** o) { return audlab_census(params_str.c_str(), o); }));

  std::ostringstream csv;
  csv << "channel,di,violation,proxy_error_rate,seed\n";
  for (const auto& channel : result.at("channels")) {
    const json& di = channel.at("di");
    csv << channel.at("channel").get<std::string>() << ','
        << (di.is_string() ? di.get<std::string>() : fmt(di.get<double>())) << ','
        << channel.at("violation").get<int>() << ','
        << fmt(channel.at("proxy_error_rate").get<double>()) << ','
        << channel.at("seed").get<std::uint64_t>() << '\n';
  }
  write_file(out, csv.str());

  std::cout << "counts: train " << result.at("counts").at("train_used")
            << " rows used of " << result.at("counts").at("train_raw")
            << " raw; test " << result.at("counts").at("test_used")
            << " rows used of " << result.at("counts").at("test_raw") << " raw\n";
  std::cout << "proxy agreement: " << fmt(result.at("proxy_agreement").get<double>())
            << "\n";
  if (!result.at("epsilon_di").is_null())
    std::cout << "epsilon_di (|DI_B-DI_A|/DI_A): "
              << fmt(result.at("epsilon_di").get<double>()) << "\n";
  std::cout << "wrote " << out << "\n";
  write_manifest(out, "census", argv, params, json(), {out});
  return 0;
}

int cmd_serve(const PlatformOpts& opts, const std::string& bind,
              const std::string& strategy, std::uint64_t budget_limit,
              double rate_limit, double duration_seconds) {
  PlatformHandle platform = make_platform(opts);
  const auto [host, port] = split_host_port(bind);
  const json params{{"bind", host},
                    {"port", port},
                    {"strategy", strategy},
                    {"budget_limit", budget_limit},
                    {"rate_limit", rate_limit}};
  const std::string params_str = params.dump();

  audlab_server* server = nullptr;
  check(audlab_serve(platform.ptr, params_str.c_str(), &server));
  int bound_port = 0;
  check(audlab_server_port(server, &bound_port));
  std::cout << "listening on " << host << ":" << bound_port << std::endl;

  if (duration_seconds > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(duration_seconds));
  } else {
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
  }
  check(audlab_server_stop(server));
  audlab_server_free(server);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"auditlab: a desk-scale laboratory for manipulation-aware "
               "platform audits"};
  app.set_version_flag("--version", audlab_version());
  app.require_subcommand(1);

  std::vector<std::string> raw_argv(argv, argv + argc);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a platform and write its JSON");
  PlatformOpts gen_opts;
  gen_opts.add_flags(gen);
  std::string gen_out;
  gen->add_option("--out", gen_out, "output platform JSON path")->required();

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep", "manipulation sweep: parity through A and through B per x");
  PlatformOpts sweep_opts;
  sweep_opts.add_flags(sweep);
  std::string sweep_strategy = "demote-privileged";
  std::string sweep_xs = "0:1:0.1";
  std::uint64_t sweep_runs = 50;
  std::string sweep_out;
  sweep->add_option("--strategy", sweep_strategy,
                    "strategy kind: none|demote-privileged|promote-regular|bubble");
  sweep->add_option("--xs", sweep_xs, "x grid lo:hi:step");
  sweep->add_option("--runs", sweep_runs, "runs per grid point");
  sweep->add_option("--out", sweep_out, "output CSV path")->required();

  // pareto
  auto* pareto = app.add_subcommand(
      "pareto", "two-armed budget sweep with Pareto frontier marks");
  PlatformOpts pareto_opts;
  pareto_opts.add_flags(pareto);
  std::string pareto_strategy = "demote-privileged:x=0.2";
  std::string pareto_betas = "0:1:0.05";
  std::string pareto_proxy = "perfect";
  std::uint64_t pareto_t = 200;
  std::uint64_t pareto_runs = 50;
  std::string pareto_out;
  pareto->add_option("--strategy", pareto_strategy, "strategy descriptor");
  pareto->add_option("--t", pareto_t, "total query budget");
  pareto->add_option("--betas", pareto_betas, "beta grid lo:hi:step");
  pareto->add_option("--runs", pareto_runs, "runs per beta");
  pareto->add_option("--proxy", pareto_proxy, "perfect|poor");
  pareto->add_option("--out", pareto_out, "output CSV path")->required();

  // audit
  auto* audit = app.add_subcommand("audit", "run one budgeted audit");
  PlatformOpts audit_opts;
  audit_opts.add_flags(audit);
  std::string audit_strategy = "none";
  std::string audit_proxy = "perfect";
  std::string audit_connect;
  std::string audit_out;
  std::string audit_format = "json";
  std::uint64_t audit_t = 200;
  double audit_beta = 0.5;
  audit->add_option("--strategy", audit_strategy, "strategy descriptor");
  audit->add_option("--t", audit_t, "total query budget");
  audit->add_option("--beta", audit_beta, "arm-1 share in [0,1]");
  audit->add_option("--proxy", audit_proxy, "perfect|poor");
  audit->add_option("--connect", audit_connect,
                    "host:port of a running server (remote audit)");
  audit->add_option("--out", audit_out, "output path (stdout when omitted)");
  audit->add_option("--format", audit_format, "json|csv");

  // census
  auto* census = app.add_subcommand(
      "census", "intermediate-proxy income audit over both channels");
  std::string census_train, census_test, census_table, census_out;
  std::string census_orientation = "swapped";
  double census_error = 0.309;
  std::uint64_t census_seed = 0;
  std::uint64_t census_epochs = 600;
  double census_lr = 0.5;
  census->add_option("--train", census_train, "training CSV (UCI Adult layout)")
      ->required();
  census->add_option("--test", census_test, "audited CSV (UCI Adult layout)")
      ->required();
  census->add_option("--error-rate", census_error, "noisy-channel flip rate");
  census->add_option("--seed", census_seed, "seed");
  census->add_option("--epochs", census_epochs, "training epochs");
  census->add_option("--learning-rate", census_lr, "training learning rate");
  census->add_option("--di-orientation", census_orientation, "swapped|as-written");
  census->add_option("--name-table", census_table, "name,p_male CSV (table proxy)");
  census->add_option("--out", census_out, "output CSV path")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "serve A and B over line-JSON TCP");
  PlatformOpts serve_opts;
  serve_opts.add_flags(serve);
  std::string serve_bind = "127.0.0.1:7311";
  std::string serve_strategy = "none";
  std::uint64_t serve_budget = UINT64_MAX;
  double serve_rate = 0.0;
  double serve_duration = 0.0;
  serve->add_option("--bind", serve_bind, "host:port (port 0 = ephemeral)");
  serve->add_option("--strategy", serve_strategy, "strategy descriptor");
  serve->add_option("--budget-limit", serve_budget, "per-session data-query budget");
  serve->add_option("--rate-limit", serve_rate,
                    "data requests per second per session (0 = unlimited)");
  serve->add_option("--duration-seconds", serve_duration,
                    "stop after this long (0 = run until killed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_opts, gen_out, raw_argv);
    if (sweep->parsed())
      return cmd_sweep(sweep_opts, sweep_strategy, sweep_xs, sweep_runs, sweep_out,
                       raw_argv);
    if (pareto->parsed())
      return cmd_pareto(pareto_opts, pareto_strategy, pareto_t, pareto_betas,
                        pareto_runs, pareto_proxy, pareto_out, raw_argv);
    if (audit->parsed())
      return cmd_audit(audit_opts, audit_strategy, audit_t, audit_beta, audit_proxy,
                       audit_connect, audit_out, audit_format, raw_argv);
    if (census->parsed()) {
      json params{{"train", census_train},
                  {"test", census_test},
                  {"error_rate", census_error},
                  {"seed", census_seed},
                  {"epochs", census_epochs},
                  {"learning_rate", census_lr},
                  {"di_orientation", census_orientation}};
      if (!census_table.empty()) params["name_table"] = census_table;
      return cmd_census(params, census_out, raw_argv);
    }
    if (serve->parsed())
      return cmd_serve(serve_opts, serve_bind, serve_strategy, serve_budget,
                       serve_rate, serve_duration);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
