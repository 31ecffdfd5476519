#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "auditlab/error.hpp"

namespace auditlab {

// ceil(x * n) for a fraction x given as a decimal literal. The small epsilon
// keeps exact products (0.3 * 10) from landing one above the true ceiling.
inline std::uint64_t ceil_fraction(double x, std::uint64_t n) {
  const double raw = std::ceil(x * static_cast<double>(n) - 1e-9);
  if (raw <= 0.0) return 0;
  const auto count = static_cast<std::uint64_t>(raw);
  return std::min(count, n);
}

// Half away from zero, matching lround.
inline std::uint64_t round_count(double x) {
  const long long r = std::llround(x);
  return r <= 0 ? 0 : static_cast<std::uint64_t>(r);
}

// Linear-interpolation quantile on an unsorted sample (copies and sorts).
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  if (q <= 0.0) return values.front();
  if (q >= 1.0) return values.back();
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values[lo];
  return values[lo] + (values[lo + 1] - values[lo]) * frac;
}

inline double mean(const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("mean of empty sample");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

// "lo:hi:step" -> inclusive grid; a bare number parses as a single point.
std::vector<double> parse_grid(const std::string& text);

}  // namespace auditlab
