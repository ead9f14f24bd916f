#pragma once

// Circular uniformity (Rayleigh) and rank-based pairwise independence tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mrv/error.hpp"
#include "mrv/geometry.hpp"

namespace mrv {

struct RayleighResult {
  std::size_t n = 0;
  double r_bar = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
};

struct PairwiseIndependenceResult {
  double p_sum = 1.0;
  double p_diff = 1.0;
};

inline constexpr std::size_t kMinRayleighSize = 5;

/// Angular probability integral transform: 2*pi*rank/n with average ranks
/// for ties, reduced mod 2*pi so the maximum maps to 0.
inline AngleSample apit(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw Error(ErrorKind::TooFewValues, "apit needs at least 2 values");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  AngleSample out(n);
  const double scale = kTwoPi / static_cast<double>(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[idx[j]] == values[idx[i]]) ++j;
    // ranks i+1 .. j share their average
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    double a = scale * rank;
    if (rank == static_cast<double>(n)) a = 0.0;
    for (std::size_t t = i; t < j; ++t) out[idx[t]] = a;
    i = j;
  }
  return out;
}

/// Rayleigh test with the small-sample corrected p-value
/// p = exp(-Z)[1 + (2Z - Z^2)/(4n) - (24Z - 132Z^2 + 76Z^3 - 9Z^4)/(288n^2)],
/// Z = n*Rbar^2, clamped to [0, 1].
inline RayleighResult rayleigh_test(std::span<const double> theta) {
  const std::size_t n = theta.size();
  if (n < kMinRayleighSize) {
    throw Error(ErrorKind::TooFewValues, "Rayleigh test needs n >= 5, got " + std::to_string(n));
  }
  double c = 0.0, s = 0.0;
  for (double t : theta) {
    c += std::cos(t);
    s += std::sin(t);
  }
  const double nd = static_cast<double>(n);
  RayleighResult out;
  out.n = n;
  out.r_bar = std::min(1.0, std::sqrt(c * c + s * s) / nd);
  out.t_stat = 2.0 * nd * out.r_bar * out.r_bar;
  const double z = nd * out.r_bar * out.r_bar;
  const double z2 = z * z;
  const double p = std::exp(-z) * (1.0 + (2.0 * z - z2) / (4.0 * nd) -
                                   (24.0 * z - 132.0 * z2 + 76.0 * z2 * z - 9.0 * z2 * z2) / (288.0 * nd * nd));
  out.p_value = std::clamp(p, 0.0, 1.0);
  return out;
}

/// Tests independence of two variables through the Rayleigh uniformity of
/// the sum and the difference of their APITs (mod 2*pi).
inline PairwiseIndependenceResult pairwise_independence(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.size() < kMinRayleighSize) throw Error(ErrorKind::TooFewValues, "pairwise test needs n >= 5");
  const AngleSample ta = apit(a);
  const AngleSample tb = apit(b);
  AngleSample sum(a.size()), diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum[i] = wrap_two_pi(ta[i] + tb[i]);
    diff[i] = wrap_two_pi(ta[i] - tb[i]);
  }
  return {rayleigh_test(sum).p_value, rayleigh_test(diff).p_value};
}

}  // namespace mrv
