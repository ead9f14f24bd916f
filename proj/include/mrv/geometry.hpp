#pragma once

// Cartesian <-> hyperspherical coordinates and radius ordering.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mrv/error.hpp"

namespace mrv {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Row of d >= 2 finite coordinates.
using Observation = std::vector<double>;

/// Angles in [0, 2pi).
using AngleSample = std::vector<double>;

/// Radius plus d-1 polar angles. All angles but the last lie in [0, pi];
/// the last lies in [0, 2pi).
struct PolarPoint {
  double r = 0.0;
  std::vector<double> phi;
  // Set when the point lies on a coordinate subspace that leaves a trailing
  // angle undefined; those angles are reported as 0.
  bool degenerate = false;

  std::size_t dimension() const { return phi.size() + 1; }
};

struct PolarSample {
  std::vector<PolarPoint> points;
  std::vector<std::size_t> order;  // indices by descending radius, stable
  std::size_t d = 0;

  std::size_t size() const { return points.size(); }

  /// Radius of the i-th largest observation (0-based).
  double radius_desc(std::size_t i) const { return points[order[i]].r; }

  std::vector<double> radii_desc() const {
    std::vector<double> out(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) out[i] = points[order[i]].r;
    return out;
  }

  /// Angle j (0-based) of the top-k observations in descending-radius order.
  std::vector<double> angle_desc(std::size_t j, std::size_t k) const {
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = points[order[i]].phi[j];
    return out;
  }
};

inline double wrap_two_pi(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

/// Hyperspherical transform. Each angle is evaluated as
/// atan2(norm of the remaining tail, x_m), which equals the arccos form but
/// keeps full precision near the poles.
inline PolarPoint to_polar(std::span<const double> x) {
  const std::size_t d = x.size();
  if (d < 2) throw Error(ErrorKind::InvalidConfig, "observation needs at least 2 coordinates");
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidConfig, "observation has a non-finite coordinate");
  }

  // tail[m] = sum_{k >= m} x_k^2
  std::vector<double> tail(d + 1, 0.0);
  for (std::size_t m = d; m-- > 0;) tail[m] = tail[m + 1] + x[m] * x[m];

  PolarPoint p;
  p.r = std::sqrt(tail[0]);
  if (p.r == 0.0) throw Error(ErrorKind::ZeroVector, "observation has zero norm");

  p.phi.assign(d - 1, 0.0);
  for (std::size_t m = 0; m + 2 < d; ++m) {
    if (tail[m] == 0.0) {
      p.degenerate = true;
      return p;
    }
    p.phi[m] = std::atan2(std::sqrt(tail[m + 1]), x[m]);
  }
  if (tail[d - 2] == 0.0) {
    p.degenerate = true;
    return p;
  }
  p.phi[d - 2] = wrap_two_pi(std::atan2(x[d - 1], x[d - 2]));
  return p;
}

inline Observation from_polar(const PolarPoint& p) {
  const std::size_t d = p.dimension();
  Observation x(d);
  double s = p.r;
  for (std::size_t m = 0; m + 1 < d; ++m) {
    x[m] = s * std::cos(p.phi[m]);
    s *= std::sin(p.phi[m]);
  }
  x[d - 1] = s;
  return x;
}

inline PolarSample polar_sample(std::span<const Observation> data) {
  if (data.empty()) throw Error(ErrorKind::TooFewObservations, "empty sample");
  PolarSample out;
  out.d = data.front().size();
  out.points.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].size() != out.d) {
      throw Error(ErrorKind::RaggedInput, "row " + std::to_string(i) + " has " + std::to_string(data[i].size()) +
                                              " columns, expected " + std::to_string(out.d));
    }
    try {
      out.points.push_back(to_polar(data[i]));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ZeroVector) throw Error(ErrorKind::ZeroVector, "row " + std::to_string(i));
      throw;
    }
  }
  out.order.resize(data.size());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return out.points[a].r > out.points[b].r; });
  return out;
}

}  // namespace mrv
