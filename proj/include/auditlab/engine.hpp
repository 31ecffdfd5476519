#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "auditlab/estimators.hpp"
#include "auditlab/proxy.hpp"
#include "auditlab/sources.hpp"

namespace auditlab {

struct BudgetPlan {
  std::uint64_t t = 200;  // total queries across both arms
  double beta = 0.5;      // arm-1 share
  std::uint64_t seed = 0;
  // After the unqueried pool is exhausted, spend leftover budget re-scraping
  // arm-1 creators (consistency only; their A answers are already held).
  bool recheck_arm1 = false;

  bool operator==(const BudgetPlan&) const = default;
};

struct AuditResult {
  BudgetPlan plan;
  // Absent when the audit aborted or gathered fewer than two
  // distinct-popularity samples.
  std::optional<ParityEstimate> parity;
  std::optional<AccuracyBudget> accuracy;    // from realized t_A
  ConsistencyReport consistency;
  std::uint64_t arm1_pulls = 0;
  std::uint64_t arm2_pulls = 0;
  std::uint64_t arm2_rechecks = 0;
  std::uint64_t queries_spent_a = 0;
  std::uint64_t queries_spent_b = 0;
  std::uint64_t budget = 0;
  std::uint64_t leftover = 0;
  bool aborted = false;
  std::string abort_reason;

  std::uint64_t t_a() const { return arm1_pulls + arm2_pulls; }
  nlohmann::json to_json() const;
};

// Two-armed budgeted audit. Arm 1 queries A alone for estimation; arm 2
// bundles one A query with a full scrape of the creator's videos and runs a
// complete consistency check. Creators are drawn uniformly without
// replacement across both arms; arm 2 stops at the first unaffordable pull
// and the leftover budget is reported. A remote source that refuses a query
// aborts the audit with the partial ledger.
AuditResult run_budgeted_audit(ApiSource& api, ScrapeSource& scrape,
                               const BudgetPlan& plan, const ProxySpec& proxy);

// P(at least one of n draws without replacement hits the M manipulated
// creators out of N) = 1 - C(N-M, n) / C(N, n).
double detect_probability(std::uint64_t n_creators, std::uint64_t n_manipulated,
                          std::uint64_t n_draws);

struct SweepPoint {
  double x = 0.0;
  std::vector<double> parity_a_runs;
  std::vector<double> parity_b_runs;
  double median_a = 0.0, q10_a = 0.0, q90_a = 0.0;
  double median_b = 0.0, q10_b = 0.0, q90_b = 0.0;
};

struct SweepCurve {
  ManipulationStrategy::Kind strategy = ManipulationStrategy::Kind::None;
  std::vector<SweepPoint> points;
  std::optional<double> x_star;  // first x whose median A-curve exceeds 0.8

  nlohmann::json to_json() const;
};

// Full-budget manipulation sweep: at each x, parity through the manipulated A
// and through emulation over honest B, across seeded runs. Manipulation draws
// are redrawn per run and shared across x, so per-run curves are comparable.
SweepCurve manipulation_sweep(const PlatformState& state,
                              ManipulationStrategy::Kind strategy,
                              std::span<const double> xs, std::uint64_t runs,
                              std::uint64_t seed);

struct ParetoPoint {
  double beta = 0.0;
  double epsilon_mean = 0.0;
  double p_detect = 0.0;
  std::uint64_t runs = 0;
  double q10 = 0.0, q90 = 0.0;  // per-run epsilon quantiles
  double arm2_mean = 0.0;
  bool on_frontier = false;
};

nlohmann::json pareto_to_json(const std::vector<ParetoPoint>& points);

// Budget-split sweep; marks the non-dominated points (minimize epsilon,
// maximize detection probability).
std::vector<ParetoPoint> pareto_sweep(const PlatformState& state,
                                      const ManipulationStrategy& strategy,
                                      std::uint64_t t, std::span<const double> betas,
                                      std::uint64_t runs, std::uint64_t seed,
                                      const ProxySpec& proxy = ProxySpec::perfect());

// Large-budget regime: estimates come from emulation alone; A is queried only
// to check consistency, over every creator.
AuditResult full_scrape_audit(ApiSource& api, ScrapeSource& scrape,
                              const ProxySpec& proxy);

}  // namespace auditlab
