#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "auditlab/auditlab.h"
#include "support/census_fixtures.hpp"

using nlohmann::json;

namespace {

std::string take(char* raw) {
  REQUIRE(raw != nullptr);
  std::string out(raw);
  audlab_string_free(raw);
  return out;
}

struct Platform {
  audlab_platform* ptr = nullptr;
  explicit Platform(const std::string& config) {
    REQUIRE(audlab_platform_generate(config.c_str(), &ptr) == AUDLAB_OK);
  }
  ~Platform() { audlab_platform_free(ptr); }
};

}  // namespace

TEST_CASE("platform lifecycle through the C surface") {
  Platform platform(R"({"seed": 11, "n_creators": 60})");

  uint64_t creators = 0, videos = 0;
  CHECK(audlab_platform_counts(platform.ptr, &creators, &videos) == AUDLAB_OK);
  CHECK(creators == 60);
  CHECK(videos > 60);

  double parity = 0.0;
  CHECK(audlab_platform_true_parity(platform.ptr, &parity) == AUDLAB_OK);
  CHECK(parity > 0.0);
  CHECK(parity <= 1.0);

  char* doc = nullptr;
  REQUIRE(audlab_platform_to_json(platform.ptr, &doc) == AUDLAB_OK);
  const std::string text = take(doc);

  audlab_platform* restored = nullptr;
  REQUIRE(audlab_platform_from_json(text.c_str(), &restored) == AUDLAB_OK);
  char* again = nullptr;
  REQUIRE(audlab_platform_to_json(restored, &again) == AUDLAB_OK);
  CHECK(take(again) == text);
  audlab_platform_free(restored);
}

TEST_CASE("error reporting contract") {
  CHECK(audlab_platform_generate("{", nullptr) == AUDLAB_ERR_NULL_ARGUMENT);

  audlab_platform* out = nullptr;
  CHECK(audlab_platform_generate("{", &out) == AUDLAB_ERR_PARSE);
  CHECK(out == nullptr);
  CHECK(std::string(audlab_last_error()).size() > 0);

  CHECK(audlab_platform_generate(R"({"n_creators": 0})", &out) ==
        AUDLAB_ERR_INVALID_ARGUMENT);
  CHECK(audlab_platform_from_json("[]", &out) == AUDLAB_ERR_PARSE);

  Platform platform(R"({"seed": 1, "n_creators": 20})");
  char* result = nullptr;
  CHECK(audlab_audit(platform.ptr, R"({"t": 0})", &result) ==
        AUDLAB_ERR_INVALID_ARGUMENT);
  CHECK(audlab_audit(platform.ptr, R"({"strategy": "confuse"})", &result) ==
        AUDLAB_ERR_PARSE);
  CHECK(audlab_census(R"({"train": "/nonexistent", "test": "/nonexistent"})",
                      &result) == AUDLAB_ERR_IO);
  CHECK(std::string(audlab_version()).size() > 0);
}

TEST_CASE("audit, sweep and pareto through the C surface") {
  Platform platform(R"({"seed": 5, "n_creators": 150})");

  SUBCASE("audit") {
    char* raw = nullptr;
    REQUIRE(audlab_audit(platform.ptr,
                         R"({"t": 100, "beta": 0.5, "seed": 3,
                             "strategy": "demote-privileged:x=0.5:seed=2"})",
                         &raw) == AUDLAB_OK);
    const json result = json::parse(take(raw));
    CHECK(result.at("t_a").get<std::uint64_t>() >= 1);
    CHECK(result.at("budget") == 100);
    CHECK(result.at("parity").is_object());
    CHECK(result.at("accuracy").at("alpha") == 1.96);
  }

  SUBCASE("sweep carries per-run curves and subgroup sizes") {
    char* raw = nullptr;
    REQUIRE(audlab_sweep(platform.ptr,
                         R"({"strategy": "bubble", "xs": [0, 0.5, 1.0],
                             "runs": 5, "seed": 2})",
                         &raw) == AUDLAB_OK);
    const json result = json::parse(take(raw));
    CHECK(result.at("points").size() == 3);
    CHECK(result.at("points")[0].at("parity_a").size() == 5);
    CHECK(result.at("n_creators") == 150);
    CHECK(result.at("n_privileged") == 50);
    CHECK(result.at("points")[2].at("median_a") == 1.0);
  }

  SUBCASE("pareto marks a frontier") {
    char* raw = nullptr;
    REQUIRE(audlab_pareto(platform.ptr,
                          R"({"strategy": "demote-privileged:x=0.5", "t": 80,
                              "betas": "0.2:0.8:0.3", "runs": 10, "seed": 4})",
                          &raw) == AUDLAB_OK);
    const json result = json::parse(take(raw));
    REQUIRE(result.at("points").size() == 3);
    bool any_frontier = false;
    for (const auto& p : result.at("points"))
      any_frontier = any_frontier || p.at("on_frontier").get<bool>();
    CHECK(any_frontier);
  }
}

TEST_CASE("serve plus remote audit through the C surface") {
  Platform platform(R"({"seed": 9, "n_creators": 80})");

  audlab_server* server = nullptr;
  REQUIRE(audlab_serve(platform.ptr,
                       R"({"bind": "127.0.0.1", "port": 0,
                           "strategy": "promote-regular:x=0.4:seed=6"})",
                       &server) == AUDLAB_OK);
  int port = 0;
  REQUIRE(audlab_server_port(server, &port) == AUDLAB_OK);
  CHECK(port > 0);

  const std::string params = R"({"t": 60, "beta": 0.4, "seed": 8,
                                 "strategy": "promote-regular:x=0.4:seed=6"})";
  char* remote_raw = nullptr;
  REQUIRE(audlab_remote_audit("127.0.0.1", port, params.c_str(), &remote_raw) ==
          AUDLAB_OK);
  char* local_raw = nullptr;
  REQUIRE(audlab_audit(platform.ptr, params.c_str(), &local_raw) == AUDLAB_OK);
  CHECK(take(remote_raw) == take(local_raw));

  CHECK(audlab_remote_audit("127.0.0.1", 1, params.c_str(), &remote_raw) ==
        AUDLAB_ERR_NET);

  CHECK(audlab_server_stop(server) == AUDLAB_OK);
  audlab_server_free(server);
}

TEST_CASE("census through the C surface") {
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() / ("audlab_capi_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  auditlab::testing::SyntheticAdultOptions options;
  options.rows = 1200;
  options.seed = 3;
  auditlab::testing::write_synthetic_adult((dir / "train.csv").string(), options);
  options.seed = 4;
  auditlab::testing::write_synthetic_adult((dir / "test.csv").string(), options);

  const json params{{"train", (dir / "train.csv").string()},
                    {"test", (dir / "test.csv").string()},
                    {"error_rate", 0.2},
                    {"seed", 1}};
  char* raw = nullptr;
  REQUIRE(audlab_census(params.dump().c_str(), &raw) == AUDLAB_OK);
  const json result = json::parse(take(raw));
  CHECK(result.at("channels").size() == 2);
  CHECK(result.at("counts").at("train_used") == 1200);
  fs::remove_all(dir);
}
