#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "auditlab/estimators.hpp"
#include "auditlab/rng.hpp"
#include "support/oracles.hpp"

using namespace auditlab;
using auditlab::testing::naive_parity;

namespace {

std::vector<std::pair<Count, Money>> as_samples(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& raw) {
  return {raw.begin(), raw.end()};
}

}  // namespace

TEST_CASE("economic parity on pinned examples") {
  const auto aligned = as_samples({{1, 10}, {2, 20}, {3, 30}});
  const ParityEstimate a = economic_parity(aligned);
  CHECK(a.value == 1.0);
  CHECK(a.decision == 1);
  CHECK(a.pairs_used == 3);

  const auto inverted = as_samples({{1, 20}, {2, 10}});
  const ParityEstimate b = economic_parity(inverted);
  CHECK(b.value == 0.0);
  CHECK(b.decision == 0);

  // Equal earnings across a p < p' pair count as a failure.
  const auto tied_e = as_samples({{1, 10}, {2, 10}});
  CHECK(economic_parity(tied_e).value == 0.0);

  // Equal popularity excludes the pair from both sides.
  const auto tied_p = as_samples({{1, 10}, {1, 999}, {2, 20}});
  const ParityEstimate c = economic_parity(tied_p);
  CHECK(c.pairs_used == 2);
  CHECK(c.value == doctest::Approx(0.5));

  // A value exactly at the threshold is not compliant: Z demands > 0.8.
  const auto at_threshold =
      as_samples({{1, 2}, {2, 1}, {3, 3}, {4, 5}, {5, 4}});
  const ParityEstimate d = economic_parity(at_threshold);
  CHECK(d.value == 0.8);
  CHECK(d.decision == 0);
}

TEST_CASE("economic parity error paths") {
  CHECK_THROWS_AS(economic_parity(as_samples({})), EstimatorError);
  CHECK_THROWS_AS(economic_parity(as_samples({{1, 10}})), EstimatorError);
  CHECK_THROWS_AS(economic_parity(as_samples({{5, 1}, {5, 2}, {5, 3}})),
                  EstimatorError);
}

TEST_CASE("economic parity equals naive pair enumeration on random sets") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(11);
    std::vector<std::pair<std::int64_t, std::int64_t>> raw;
    raw.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      raw.emplace_back(rng.uniform_int(0, 5), rng.uniform_int(0, 5));
    const auto expected = naive_parity(raw);
    if (!expected) {
      CHECK_THROWS_AS(economic_parity(as_samples(raw)), EstimatorError);
      continue;
    }
    const ParityEstimate est = economic_parity(as_samples(raw));
    CHECK(est.value == doctest::Approx(*expected).epsilon(1e-12));
  }
}

TEST_CASE("economic parity invariances") {
  Rng rng(7);
  std::vector<std::pair<std::int64_t, std::int64_t>> raw;
  for (int i = 0; i < 60; ++i)
    raw.emplace_back(rng.uniform_int(0, 1000), rng.uniform_int(0, 100000));
  const double base = economic_parity(as_samples(raw)).value;

  SUBCASE("scaling every earning by a positive constant changes nothing") {
    auto scaled = raw;
    for (auto& [p, e] : scaled) e *= 7;
    CHECK(economic_parity(as_samples(scaled)).value == base);
  }

  SUBCASE("sample order never matters") {
    auto shuffled = raw;
    rng.shuffle(shuffled);
    CHECK(economic_parity(as_samples(shuffled)).value == base);
  }
}

TEST_CASE("epsilon from budget matches the closed form") {
  CHECK(epsilon_from_budget(1) == doctest::Approx(0.98).epsilon(1e-12));
  CHECK(epsilon_from_budget(96) == doctest::Approx(0.100020831164).epsilon(1e-9));
  CHECK(epsilon_from_budget(9604) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(epsilon_from_budget(0), InvalidArgument);

  SUBCASE("strictly decreasing in the budget") {
    for (std::uint64_t t = 1; t < 2000; t += 13)
      CHECK(epsilon_from_budget(t + 1) < epsilon_from_budget(t));
  }
}

TEST_CASE("budget from epsilon") {
  CHECK(budget_from_epsilon(0.1) == 97);  // 96 gives 0.10002 > 0.1
  CHECK(budget_from_epsilon(0.98) == 1);
  CHECK(budget_from_epsilon(0.100020831164) == 96);
  CHECK_THROWS_AS(budget_from_epsilon(0.0), InvalidArgument);
  CHECK_THROWS_AS(budget_from_epsilon(0.99), InvalidArgument);
  CHECK_THROWS_AS(budget_from_epsilon(-0.1), InvalidArgument);

  SUBCASE("round trip: result budget achieves the requested error, minimally") {
    Rng rng(41);
    for (int i = 0; i < 100; ++i) {
      const double eps = 0.005 + rng.uniform01() * 0.97;
      const std::uint64_t t = budget_from_epsilon(eps);
      CHECK(epsilon_from_budget(t) <= eps);
      if (t > 1) CHECK(epsilon_from_budget(t - 1) > eps);
    }
  }
}

TEST_CASE("disparate impact") {
  using Samples = std::vector<std::pair<bool, int>>;

  SUBCASE("equal rates") {
    const Samples s{{true, 1}, {true, 0}, {false, 1}, {false, 0}};
    const auto est = disparate_impact(s);
    CHECK(est.di == doctest::Approx(1.0));
    CHECK(est.violation == 0);
  }

  SUBCASE("unprotected 0.2 vs protected 0.8") {
    Samples s;
    for (int i = 0; i < 10; ++i) s.emplace_back(false, i < 2 ? 1 : 0);
    for (int i = 0; i < 10; ++i) s.emplace_back(true, i < 8 ? 1 : 0);
    const auto est = disparate_impact(s);
    CHECK(est.di == doctest::Approx(0.25));
    CHECK(est.violation == 1);
    // Swapping the fraction inverts the ratio.
    const auto swapped = disparate_impact(s, DiOrientation::Swapped);
    CHECK(swapped.di == doctest::Approx(4.0));
    CHECK(swapped.violation == 0);
  }

  SUBCASE("zero denominator rate reports an infinite ratio, not a violation") {
    const Samples s{{true, 0}, {true, 0}, {false, 1}};
    const auto est = disparate_impact(s);
    CHECK(est.infinite());
    CHECK(est.violation == 0);
  }

  SUBCASE("an empty group is an error") {
    const Samples s{{true, 1}, {true, 0}};
    CHECK_THROWS_AS(disparate_impact(s), EstimatorError);
    CHECK_THROWS_AS(disparate_impact(Samples{}), EstimatorError);
  }

  SUBCASE("orientation names") {
    CHECK(parse_di_orientation("swapped") == DiOrientation::Swapped);
    CHECK(parse_di_orientation("as-written") == DiOrientation::AsWritten);
    CHECK_THROWS_AS(parse_di_orientation("upside-down"), ParseError);
  }
}

TEST_CASE("accuracy budget carries the fixed test constants") {
  const AccuracyBudget b = AccuracyBudget::from_budget(96);
  CHECK(b.alpha == 1.96);
  CHECK(b.delta == 0.05);
  CHECK(b.q_worst == 0.25);
  CHECK(b.epsilon == epsilon_from_budget(96));
}
