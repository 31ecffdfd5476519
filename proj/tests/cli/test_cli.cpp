// End-to-end runs of the installed binary. Each case shells out and checks
// exit codes and produced files.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "support/census_fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("audlab_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args, const std::string& log) {
  const std::string cmd =
      std::string(AUDITLAB_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::size_t line_count(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

}  // namespace

TEST_CASE("no arguments prints usage and exits 2") {
  Workspace ws;
  CHECK(run("", ws.path("usage.log")) == 2);
  const std::string log = slurp(ws.path("usage.log"));
  CHECK(log.find("Usage") != std::string::npos);

  CHECK(run("frobnicate", ws.path("bad.log")) == 2);
  CHECK(run("gen", ws.path("gen_missing.log")) == 2);  // --out is required
}

TEST_CASE("runtime failures exit 1") {
  Workspace ws;
  CHECK(run("audit --config /nonexistent.json --out " + ws.path("x.json"),
            ws.path("fail.log")) == 1);
  CHECK(run("census --train /nope --test /nope --out " + ws.path("c.csv"),
            ws.path("fail2.log")) == 1);
}

TEST_CASE("gen writes a platform document plus manifest") {
  Workspace ws;
  const std::string out = ws.path("platform.json");
  CHECK(run("gen --seed 4 --n-creators 80 --out " + out, ws.path("gen.log")) == 0);

  const json doc = json::parse(slurp(out));
  CHECK(doc.at("creators").size() == 80);
  CHECK(doc.at("config").at("seed") == 4);

  const json manifest = json::parse(slurp(out + ".manifest.json"));
  CHECK(manifest.at("subcommand") == "gen");
  CHECK(manifest.at("tool") == "auditlab");
  CHECK(manifest.at("platform").at("config").at("n_creators") == 80);
}

TEST_CASE("sweep produces the per-run CSV and a threshold report") {
  Workspace ws;
  const std::string out = ws.path("sweep.csv");
  CHECK(run("sweep --seed 2 --n-creators 80 --strategy bubble --xs 0:1:0.5 "
            "--runs 4 --out " + out,
            ws.path("sweep.log")) == 0);

  const std::string csv = slurp(out);
  CHECK(line_count(csv) == 1 + 3 * 4);  // header + |xs| * runs
  CHECK(csv.rfind("strategy,x,run,parity_A,parity_B\n", 0) == 0);

  // the final grid point fully sorts the declared earnings
  const auto last_line_start = csv.rfind('\n', csv.size() - 2) + 1;
  std::istringstream last(csv.substr(last_line_start));
  std::string field;
  std::getline(last, field, ',');  // strategy
  std::getline(last, field, ',');  // x
  CHECK(field == "1");
  std::getline(last, field, ',');  // run
  std::getline(last, field, ',');  // parity_A
  CHECK(std::stod(field) > 0.99);

  const json threshold = json::parse(slurp(out + ".threshold.json"));
  CHECK(threshold.at("strategy") == "bubble-swap");
  CHECK(threshold.contains("x_star"));
}

TEST_CASE("pareto produces one row per beta with a frontier column") {
  Workspace ws;
  const std::string out = ws.path("pareto.csv");
  // t must cover the worst arm-2 pull (1 + max videos) even at beta = 0.
  CHECK(run("pareto --seed 3 --n-creators 100 --t 200 "
            "--strategy demote-privileged:x=0.2 --betas 0:1:0.05 --runs 5 "
            "--out " + out,
            ws.path("pareto.log")) == 0);
  const std::string csv = slurp(out);
  CHECK(line_count(csv) == 1 + 21);
  CHECK(csv.rfind("beta,epsilon_mean,p_detect,runs,q10,q90,on_frontier\n", 0) == 0);
}

TEST_CASE("identical argv yields identical bytes") {
  Workspace ws;
  const std::string args =
      "sweep --seed 9 --n-creators 60 --strategy demote-privileged "
      "--xs 0:1:0.25 --runs 3 --out ";
  CHECK(run(args + ws.path("a.csv"), ws.path("a.log")) == 0);
  CHECK(run(args + ws.path("b.csv"), ws.path("b.log")) == 0);
  CHECK(slurp(ws.path("a.csv")) == slurp(ws.path("b.csv")));
  CHECK(slurp(ws.path("a.csv")).size() > 0);
}

TEST_CASE("audit writes result JSON or estimate CSV") {
  Workspace ws;
  const std::string platform = ws.path("p.json");
  REQUIRE(run("gen --seed 6 --n-creators 90 --out " + platform,
              ws.path("g.log")) == 0);

  const std::string out = ws.path("audit.json");
  CHECK(run("audit --config " + platform +
                " --t 60 --beta 0.5 --seed 1 "
                "--strategy demote-privileged:x=1:seed=2 --out " + out,
            ws.path("audit.log")) == 0);
  const json result = json::parse(slurp(out));
  CHECK(result.at("plan").at("t") == 60);

  const std::string csv_out = ws.path("audit.csv");
  CHECK(run("audit --config " + platform +
                " --t 60 --beta 0.2 --seed 1 "
                "--strategy demote-privileged:x=1:seed=2 --format csv --out " +
                csv_out,
            ws.path("audit2.log")) == 0);
  const std::string csv = slurp(csv_out);
  CHECK(csv.rfind("estimator,value,decision,t_A,epsilon\n", 0) == 0);
  CHECK(line_count(csv) == 2);
  CHECK(fs::exists(csv_out + ".flags.csv"));
}

TEST_CASE("census subcommand end to end on synthetic files") {
  Workspace ws;
  auditlab::testing::SyntheticAdultOptions options;
  options.rows = 1500;
  options.seed = 8;
  auditlab::testing::write_synthetic_adult(ws.path("adult.data"), options);
  options.seed = 9;
  options.test_style = true;
  auditlab::testing::write_synthetic_adult(ws.path("adult.test"), options);

  const std::string out = ws.path("census.csv");
  CHECK(run("census --train " + ws.path("adult.data") + " --test " +
                ws.path("adult.test") + " --seed 2 --out " + out,
            ws.path("census.log")) == 0);
  const std::string csv = slurp(out);
  CHECK(csv.rfind("channel,di,violation,proxy_error_rate,seed\n", 0) == 0);
  CHECK(line_count(csv) == 3);
  CHECK(csv.find("via_A") != std::string::npos);
  CHECK(csv.find("via_B") != std::string::npos);
  const std::string log = slurp(ws.path("census.log"));
  CHECK(log.find("proxy agreement") != std::string::npos);

  SUBCASE("a name table stands in for the noisy channel") {
    options.with_names = true;
    options.seed = 10;
    auditlab::testing::write_synthetic_adult(ws.path("named.data"), options);
    std::ofstream table(ws.path("names.csv"));
    table << "name,p_male\njames,0.98\nmary,0.02\n";
    table.close();
    const std::string named_out = ws.path("census_names.csv");
    CHECK(run("census --train " + ws.path("named.data") + " --test " +
                  ws.path("named.data") + " --name-table " + ws.path("names.csv") +
                  " --seed 2 --out " + named_out,
              ws.path("census_names.log")) == 0);
    // unambiguous fixture names make the table proxy exact
    const std::string named_log = slurp(ws.path("census_names.log"));
    CHECK(named_log.find("proxy agreement: 1\n") != std::string::npos);
  }
}

TEST_CASE("audit --connect reproduces the local audit byte for byte") {
  Workspace ws;
  REQUIRE(run("gen --seed 12 --n-creators 120 --out " + ws.path("p.json"),
              ws.path("g.log")) == 0);

  const std::string serve_cmd =
      std::string(AUDITLAB_CLI_PATH) + " serve --config " + ws.path("p.json") +
      " --strategy demote-privileged:x=0.3:seed=4 --bind 127.0.0.1:0" +
      " --duration-seconds 10 > " + ws.path("serve.log") + " 2>&1 &";
  REQUIRE(std::system(serve_cmd.c_str()) == 0);

  std::string port;
  for (int i = 0; i < 100 && port.empty(); ++i) {
    ::usleep(100 * 1000);
    const std::string log = slurp(ws.path("serve.log"));
    const std::string needle = "listening on 127.0.0.1:";
    const auto pos = log.find(needle);
    if (pos != std::string::npos && log.find('\n', pos) != std::string::npos)
      port = log.substr(pos + needle.size(),
                        log.find('\n', pos) - pos - needle.size());
  }
  REQUIRE(!port.empty());

  const std::string plan =
      " --t 150 --beta 0.4 --seed 6 --strategy demote-privileged:x=0.3:seed=4"
      " --out ";
  CHECK(run("audit --connect 127.0.0.1:" + port + plan + ws.path("remote.json"),
            ws.path("ra.log")) == 0);
  CHECK(run("audit --config " + ws.path("p.json") + plan + ws.path("local.json"),
            ws.path("la.log")) == 0);
  const std::string remote = slurp(ws.path("remote.json"));
  CHECK(remote.size() > 0);
  CHECK(remote == slurp(ws.path("local.json")));
}

TEST_CASE("serve binds, prints its port, and exits after the duration") {
  Workspace ws;
  CHECK(run("serve --seed 3 --n-creators 30 --bind 127.0.0.1:0 "
            "--duration-seconds 0.5",
            ws.path("serve.log")) == 0);
  const std::string log = slurp(ws.path("serve.log"));
  CHECK(log.find("listening on 127.0.0.1:") != std::string::npos);
}
