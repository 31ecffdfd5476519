#include "auditlab/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "auditlab/rng.hpp"
#include "auditlab/util.hpp"

namespace auditlab {

namespace {

constexpr std::uint64_t kAuditStream = 0x61756431ULL;
constexpr std::uint64_t kRunStream = 0x72756e73ULL;
constexpr std::uint64_t kStrategyStream = 0x73747261ULL;

void fill_quantiles(SweepPoint& pt) {
  pt.median_a = quantile(pt.parity_a_runs, 0.5);
  pt.q10_a = quantile(pt.parity_a_runs, 0.1);
  pt.q90_a = quantile(pt.parity_a_runs, 0.9);
  pt.median_b = quantile(pt.parity_b_runs, 0.5);
  pt.q10_b = quantile(pt.parity_b_runs, 0.1);
  pt.q90_b = quantile(pt.parity_b_runs, 0.9);
}

void mark_frontier(std::vector<ParetoPoint>& points) {
  for (ParetoPoint& p : points) {
    p.on_frontier = true;
    for (const ParetoPoint& q : points) {
      const bool weakly_better =
          q.epsilon_mean <= p.epsilon_mean && q.p_detect >= p.p_detect;
      const bool strictly_better =
          q.epsilon_mean < p.epsilon_mean || q.p_detect > p.p_detect;
      if (weakly_better && strictly_better) {
        p.on_frontier = false;
        break;
      }
    }
  }
}

}  // namespace

AuditResult run_budgeted_audit(ApiSource& api, ScrapeSource& scrape,
                               const BudgetPlan& plan, const ProxySpec& proxy) {
  if (plan.t < 1)
    throw InvalidArgument("budget below t_A regime: need t >= 1");
  if (!(plan.beta >= 0.0 && plan.beta <= 1.0))
    throw InvalidArgument("beta must lie in [0, 1]");

  std::vector<CreatorId> order = scrape.creator_catalog();
  if (order.empty()) throw InvalidArgument("empty platform");

  Rng rng(derive_seed(plan.seed, kAuditStream));
  rng.shuffle(order);

  AuditResult result;
  result.plan = plan;
  result.budget = plan.t;

  const std::uint64_t arm1_target =
      std::min<std::uint64_t>(round_count(static_cast<double>(plan.t) * plan.beta),
                              order.size());

  std::vector<std::pair<Count, Money>> samples;
  std::vector<ApiAnswer> arm1_answers;
  auto spent = [&result] { return result.queries_spent_a + result.queries_spent_b; };

  try {
    for (std::uint64_t i = 0; i < arm1_target; ++i) {
      const ApiAnswer answer = api.api_query(order[i]);
      ++result.queries_spent_a;
      ++result.arm1_pulls;
      samples.emplace_back(answer.popularity, answer.earnings);
      arm1_answers.push_back(answer);
    }

    std::size_t next = arm1_target;
    for (; next < order.size(); ++next) {
      const CreatorId c = order[next];
      const std::vector<VideoId> videos = scrape.videos_of(c);
      const std::uint64_t cost = 1 + videos.size();
      if (cost > plan.t - spent()) break;  // stop, do not fall back to arm 1

      const ApiAnswer answer = api.api_query(c);
      ++result.queries_spent_a;
      std::vector<ScrapAnswer> scraps;
      scraps.reserve(videos.size());
      for (VideoId v : videos) {
        scraps.push_back(scrape.scrape(v));
        ++result.queries_spent_b;
      }
      ++result.arm2_pulls;
      samples.emplace_back(answer.popularity, answer.earnings);
      result.consistency.checked_creators.push_back(c);
      if (proxy.inconsistent(answer, scraps, /*complete=*/true))
        result.consistency.flags.push_back(
            ConsistencyFlag{c, answer, reconstruct(scraps), true});
    }

    if (plan.recheck_arm1) {
      // Leftover budget re-scrapes arm-1 creators; their A answers are
      // already in hand, so a recheck costs only the videos.
      for (std::uint64_t i = 0; i < arm1_answers.size(); ++i) {
        const CreatorId c = order[i];
        const std::vector<VideoId> videos = scrape.videos_of(c);
        if (videos.size() > plan.t - spent()) break;
        const ApiAnswer answer = arm1_answers[i];
        std::vector<ScrapAnswer> scraps;
        scraps.reserve(videos.size());
        for (VideoId v : videos) {
          scraps.push_back(scrape.scrape(v));
          ++result.queries_spent_b;
        }
        ++result.arm2_rechecks;
        result.consistency.checked_creators.push_back(c);
        if (proxy.inconsistent(answer, scraps, /*complete=*/true))
          result.consistency.flags.push_back(
              ConsistencyFlag{c, answer, reconstruct(scraps), true});
      }
    }
  } catch (const BudgetExhausted& e) {
    result.aborted = true;
    result.abort_reason = e.what();
  }

  result.leftover = plan.t - std::min(spent(), plan.t);
  if (!result.aborted) {
    try {
      result.parity = economic_parity(samples);
    } catch (const EstimatorError&) {
      // Too few distinct-popularity samples; the ledger still stands.
      result.parity = std::nullopt;
    }
  }
  if (result.t_a() >= 1) result.accuracy = AccuracyBudget::from_budget(result.t_a());
  return result;
}

double detect_probability(std::uint64_t n_creators, std::uint64_t n_manipulated,
                          std::uint64_t n_draws) {
  if (n_manipulated > n_creators)
    throw InvalidArgument("manipulated count exceeds population");
  if (n_draws > n_creators) throw InvalidArgument("draws exceed population");
  if (n_manipulated == 0 || n_draws == 0) return 0.0;
  if (n_draws > n_creators - n_manipulated) return 1.0;
  // P(no manipulated drawn) as a product of ratios; stable in long double.
  long double p_none = 1.0L;
  for (std::uint64_t i = 0; i < n_draws; ++i) {
    p_none *= static_cast<long double>(n_creators - n_manipulated - i) /
              static_cast<long double>(n_creators - i);
  }
  return static_cast<double>(1.0L - p_none);
}

SweepCurve manipulation_sweep(const PlatformState& state,
                              ManipulationStrategy::Kind strategy,
                              std::span<const double> xs, std::uint64_t runs,
                              std::uint64_t seed) {
  if (runs == 0) throw InvalidArgument("sweep needs at least one run");
  for (double x : xs)
    if (x < 0.0 || x > 1.0) throw InvalidArgument("sweep x must lie in [0, 1]");

  PlatformScrapeSource honest(state);
  const std::vector<CreatorId> catalog = honest.creator_catalog();

  // One manipulation seed per run, shared across x: per-run curves are
  // comparable and the manipulated sets nest as x grows.
  std::vector<std::uint64_t> run_seeds(runs);
  for (std::uint64_t r = 0; r < runs; ++r)
    run_seeds[r] = derive_seed(seed, kRunStream + r);

  SweepCurve curve;
  curve.strategy = strategy;
  for (double x : xs) {
    SweepPoint pt;
    pt.x = x;
    for (std::uint64_t r = 0; r < runs; ++r) {
      ManipulatedApi api(state, ManipulationStrategy{strategy, x, run_seeds[r]});
      std::vector<std::pair<Count, Money>> samples_a;
      samples_a.reserve(catalog.size());
      for (CreatorId c : catalog) {
        const ApiAnswer answer = api.api_query(c);
        samples_a.emplace_back(answer.popularity, answer.earnings);
      }
      pt.parity_a_runs.push_back(economic_parity(samples_a).value);

      const std::vector<ApiAnswer> emulated = emulate_api(honest, catalog);
      std::vector<std::pair<Count, Money>> samples_b;
      samples_b.reserve(emulated.size());
      for (const ApiAnswer& answer : emulated)
        samples_b.emplace_back(answer.popularity, answer.earnings);
      pt.parity_b_runs.push_back(economic_parity(samples_b).value);
    }
    fill_quantiles(pt);
    curve.points.push_back(std::move(pt));
  }

  for (const SweepPoint& pt : curve.points) {
    if (pt.median_a > 0.8) {
      curve.x_star = pt.x;
      break;
    }
  }
  return curve;
}

std::vector<ParetoPoint> pareto_sweep(const PlatformState& state,
                                      const ManipulationStrategy& strategy,
                                      std::uint64_t t, std::span<const double> betas,
                                      std::uint64_t runs, std::uint64_t seed,
                                      const ProxySpec& proxy) {
  if (runs == 0) throw InvalidArgument("pareto sweep needs at least one run");
  PlatformScrapeSource honest(state);

  std::vector<ParetoPoint> points;
  points.reserve(betas.size());
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    const double beta = betas[bi];
    std::vector<double> epsilons;
    std::vector<double> arm2_counts;
    std::uint64_t detections = 0;
    for (std::uint64_t r = 0; r < runs; ++r) {
      // The manipulation is redrawn per run and shared across betas, so the
      // detection comparison between betas is paired.
      ManipulationStrategy run_strategy = strategy;
      run_strategy.seed = derive_seed(strategy.seed, kStrategyStream + r);
      ManipulatedApi api(state, run_strategy);

      BudgetPlan plan;
      plan.t = t;
      plan.beta = beta;
      plan.seed = derive_seed(seed, bi * 1000003ULL + r);
      const AuditResult result = run_budgeted_audit(api, honest, plan, proxy);
      if (!result.accuracy)
        throw EstimatorError("pareto run realized no A samples; increase t");
      epsilons.push_back(result.accuracy->epsilon);
      arm2_counts.push_back(static_cast<double>(result.arm2_pulls));
      if (result.consistency.any_inconsistent()) ++detections;
    }
    ParetoPoint point;
    point.beta = beta;
    point.epsilon_mean = mean(epsilons);
    point.p_detect = static_cast<double>(detections) / static_cast<double>(runs);
    point.runs = runs;
    point.q10 = quantile(epsilons, 0.1);
    point.q90 = quantile(epsilons, 0.9);
    point.arm2_mean = mean(arm2_counts);
    points.push_back(point);
  }
  mark_frontier(points);
  return points;
}

AuditResult full_scrape_audit(ApiSource& api, ScrapeSource& scrape,
                              const ProxySpec& proxy) {
  const std::vector<CreatorId> catalog = scrape.creator_catalog();
  if (catalog.empty()) throw InvalidArgument("empty platform");

  AuditResult result;
  std::vector<std::pair<Count, Money>> emulated_samples;
  emulated_samples.reserve(catalog.size());
  try {
    for (CreatorId c : catalog) {
      const std::vector<VideoId> videos = scrape.videos_of(c);
      if (videos.empty())
        throw Error("creator " + std::to_string(c) + " has no scrapeable videos");
      std::vector<ScrapAnswer> scraps;
      scraps.reserve(videos.size());
      for (VideoId v : videos) {
        scraps.push_back(scrape.scrape(v));
        ++result.queries_spent_b;
      }
      const Reconstruction rec = reconstruct(scraps);
      emulated_samples.emplace_back(rec.popularity, rec.earnings);

      // A enters only through the consistency check.
      const ApiAnswer answer = api.api_query(c);
      ++result.queries_spent_a;
      ++result.arm2_pulls;
      result.consistency.checked_creators.push_back(c);
      if (proxy.inconsistent(answer, scraps, /*complete=*/true))
        result.consistency.flags.push_back(
            ConsistencyFlag{c, answer, rec, true});
    }
  } catch (const BudgetExhausted& e) {
    throw Error(std::string("full-scrape audit needs budget covering all "
                            "creators and videos: ") +
                e.what());
  }

  result.budget = result.queries_spent_a + result.queries_spent_b;
  result.parity = economic_parity(emulated_samples);
  result.accuracy = AccuracyBudget::from_budget(result.t_a());
  return result;
}

nlohmann::json AuditResult::to_json() const {
  nlohmann::json j{{"plan",
                    {{"t", plan.t},
                     {"beta", plan.beta},
                     {"seed", plan.seed},
                     {"recheck_arm1", plan.recheck_arm1}}},
                   {"arm1_pulls", arm1_pulls},
                   {"arm2_pulls", arm2_pulls},
                   {"arm2_rechecks", arm2_rechecks},
                   {"t_a", t_a()},
                   {"queries_spent_a", queries_spent_a},
                   {"queries_spent_b", queries_spent_b},
                   {"budget", budget},
                   {"leftover", leftover},
                   {"aborted", aborted},
                   {"abort_reason", abort_reason},
                   {"consistency", consistency.to_json()}};
  if (parity) {
    j["parity"] = {{"value", parity->value},
                   {"pairs_used", parity->pairs_used},
                   {"decision", parity->decision}};
  } else {
    j["parity"] = nullptr;
  }
  if (accuracy) {
    j["accuracy"] = {{"t_a", accuracy->t_a},
                     {"epsilon", accuracy->epsilon},
                     {"alpha", accuracy->alpha},
                     {"delta", accuracy->delta},
                     {"q_worst", accuracy->q_worst}};
  } else {
    j["accuracy"] = nullptr;
  }
  return j;
}

nlohmann::json SweepCurve::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const SweepPoint& p : points) {
    pts.push_back({{"x", p.x},
                   {"parity_a", p.parity_a_runs},
                   {"parity_b", p.parity_b_runs},
                   {"median_a", p.median_a},
                   {"q10_a", p.q10_a},
                   {"q90_a", p.q90_a},
                   {"median_b", p.median_b},
                   {"q10_b", p.q10_b},
                   {"q90_b", p.q90_b}});
  }
  nlohmann::json j{{"strategy", ManipulationStrategy::kind_name(strategy)},
                   {"points", std::move(pts)}};
  j["x_star"] = x_star ? nlohmann::json(*x_star) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json pareto_to_json(const std::vector<ParetoPoint>& points) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ParetoPoint& p : points) {
    arr.push_back({{"beta", p.beta},
                   {"epsilon_mean", p.epsilon_mean},
                   {"p_detect", p.p_detect},
                   {"runs", p.runs},
                   {"q10", p.q10},
                   {"q90", p.q90},
                   {"arm2_mean", p.arm2_mean},
                   {"on_frontier", p.on_frontier}});
  }
  return nlohmann::json{{"points", std::move(arr)}};
}

}  // namespace auditlab
