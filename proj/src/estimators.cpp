#include "auditlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace auditlab {

namespace {

struct Fenwick {
  explicit Fenwick(std::size_t n) : tree(n + 1, 0) {}

  void add(std::size_t i) {  // 1-based
    for (; i < tree.size(); i += i & (~i + 1)) ++tree[i];
  }

  std::uint64_t prefix(std::size_t i) const {  // count of entries <= i
    std::uint64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree[i];
    return s;
  }

  std::vector<std::uint64_t> tree;
};

}  // namespace

ParityEstimate economic_parity(std::span<const std::pair<Count, Money>> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw EstimatorError("economic parity needs at least two samples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].first < samples[b].first;
  });

  // Compress earnings to ranks for the Fenwick tree.
  std::vector<Money> earnings(n);
  for (std::size_t i = 0; i < n; ++i) earnings[i] = samples[i].second;
  std::vector<Money> sorted_earnings = earnings;
  std::sort(sorted_earnings.begin(), sorted_earnings.end());
  sorted_earnings.erase(std::unique(sorted_earnings.begin(), sorted_earnings.end()),
                        sorted_earnings.end());
  auto rank_of = [&](Money e) {
    return static_cast<std::size_t>(
               std::lower_bound(sorted_earnings.begin(), sorted_earnings.end(), e) -
               sorted_earnings.begin()) +
           1;
  };

  // Walk popularity groups in ascending order; each element pairs with every
  // previously inserted element (strictly smaller popularity), and counts as
  // aligned when its earnings strictly exceed the earlier ones.
  Fenwick bit(sorted_earnings.size());
  std::uint64_t eligible = 0;
  std::uint64_t aligned = 0;
  std::uint64_t inserted = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && samples[order[j]].first == samples[order[i]].first) ++j;
    for (std::size_t k = i; k < j; ++k)
      aligned += bit.prefix(rank_of(samples[order[k]].second) - 1);
    eligible += (j - i) * inserted;
    for (std::size_t k = i; k < j; ++k) bit.add(rank_of(samples[order[k]].second));
    inserted += j - i;
    i = j;
  }

  if (eligible == 0)
    throw EstimatorError("economic parity undefined: all popularities equal");

  ParityEstimate est;
  est.value = static_cast<double>(aligned) / static_cast<double>(eligible);
  est.pairs_used = eligible;
  est.decision = est.value > 0.8 ? 1 : 0;
  return est;
}

double epsilon_from_budget(std::uint64_t t_a, double alpha, double q_worst) {
  if (t_a == 0) throw InvalidArgument("epsilon undefined at zero budget");
  return alpha * std::sqrt(q_worst / static_cast<double>(t_a));
}

double epsilon_from_budget(std::uint64_t t_a) {
  return epsilon_from_budget(t_a, 1.96, 0.25);
}

std::uint64_t budget_from_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 0.98)
    throw InvalidArgument("epsilon must lie in (0, 0.98]");
  const double k = 0.9604 / (epsilon * epsilon);  // 1.96^2 * 0.25 / eps^2
  auto t = static_cast<std::uint64_t>(std::max(1.0, std::floor(k)));
  while (epsilon_from_budget(t) > epsilon) ++t;
  while (t > 1 && epsilon_from_budget(t - 1) <= epsilon) --t;
  return t;
}

AccuracyBudget AccuracyBudget::from_budget(std::uint64_t t_a) {
  AccuracyBudget b;
  b.t_a = t_a;
  b.epsilon = epsilon_from_budget(t_a);
  return b;
}

DiOrientation parse_di_orientation(const std::string& name) {
  if (name == "as-written") return DiOrientation::AsWritten;
  if (name == "swapped") return DiOrientation::Swapped;
  throw ParseError("unknown di-orientation: " + name);
}

std::string di_orientation_name(DiOrientation o) {
  return o == DiOrientation::AsWritten ? "as-written" : "swapped";
}

bool DisparateImpactEstimate::infinite() const { return std::isinf(di); }

DisparateImpactEstimate disparate_impact(
    std::span<const std::pair<bool, int>> samples, DiOrientation orientation) {
  std::uint64_t n_protected = 0, n_unprotected = 0;
  std::uint64_t pos_protected = 0, pos_unprotected = 0;
  for (const auto& [is_protected, outcome] : samples) {
    if (is_protected) {
      ++n_protected;
      if (outcome) ++pos_protected;
    } else {
      ++n_unprotected;
      if (outcome) ++pos_unprotected;
    }
  }
  if (n_protected == 0 || n_unprotected == 0)
    throw EstimatorError("disparate impact needs both groups nonempty");

  DisparateImpactEstimate est;
  est.rate_protected =
      static_cast<double>(pos_protected) / static_cast<double>(n_protected);
  est.rate_unprotected =
      static_cast<double>(pos_unprotected) / static_cast<double>(n_unprotected);

  const double numerator = orientation == DiOrientation::AsWritten
                               ? est.rate_unprotected
                               : est.rate_protected;
  const double denominator = orientation == DiOrientation::AsWritten
                                 ? est.rate_protected
                                 : est.rate_unprotected;
  if (denominator == 0.0) {
    // Reported distinctly: an infinite ratio is never a violation.
    est.di = std::numeric_limits<double>::infinity();
    est.violation = 0;
    return est;
  }
  est.di = numerator / denominator;
  est.violation = est.di <= 0.8 ? 1 : 0;
  return est;
}

}  // namespace auditlab
