#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "auditlab/error.hpp"
#include "auditlab/platform.hpp"

namespace auditlab {

struct ParityEstimate {
  double value = 0.0;        // P(e < e' | p < p'), strict inequalities
  std::uint64_t pairs_used = 0;
  int decision = 0;          // Z = 1 iff value > 0.8 (compliant)

  bool operator==(const ParityEstimate&) const = default;
};

// Economic parity over ordered sample pairs. Pairs with equal popularity are
// excluded from numerator and denominator; equal earnings with p < p' count
// as a failure. Throws EstimatorError when fewer than two samples have
// distinct popularity.
ParityEstimate economic_parity(std::span<const std::pair<Count, Money>> samples);

// epsilon = alpha * sqrt(q_worst / t_a) with alpha = 1.96, q_worst = 0.25.
double epsilon_from_budget(std::uint64_t t_a);
double epsilon_from_budget(std::uint64_t t_a, double alpha, double q_worst);

// Smallest t_a with epsilon_from_budget(t_a) <= epsilon; epsilon in (0, 0.98].
std::uint64_t budget_from_epsilon(double epsilon);

struct AccuracyBudget {
  std::uint64_t t_a = 0;
  double epsilon = 0.0;
  double alpha = 1.96;   // z-score at 95% confidence
  double delta = 0.05;
  double q_worst = 0.25;

  static AccuracyBudget from_budget(std::uint64_t t_a);

  bool operator==(const AccuracyBudget&) const = default;
};

// The definition's fraction puts the unprotected group's positive rate in the
// numerator; Swapped inverts it (the reading the reported census values use).
enum class DiOrientation { AsWritten, Swapped };

DiOrientation parse_di_orientation(const std::string& name);
std::string di_orientation_name(DiOrientation o);

struct DisparateImpactEstimate {
  double di = 0.0;  // +infinity when the denominator group's rate is zero
  double rate_unprotected = 0.0;
  double rate_protected = 0.0;
  int violation = 0;  // 1 iff di <= 0.8

  bool infinite() const;
};

// samples: (protected flag, binary outcome). Both groups must be nonempty.
DisparateImpactEstimate disparate_impact(
    std::span<const std::pair<bool, int>> samples,
    DiOrientation orientation = DiOrientation::AsWritten);

}  // namespace auditlab
