#pragma once

// Nonnegative trigonometric sum densities on the circle (NNTS) and the
// sphere (SNNTS): evaluation, normalization, sampling and constrained
// maximum-likelihood fitting with AIC/BIC model selection.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrv/error.hpp"
#include "mrv/geometry.hpp"
#include "mrv/random.hpp"

namespace mrv {

using Complex = std::complex<double>;

inline constexpr int kMaxNntsOrder = 15;
inline constexpr int kMaxSnntsOrder = 6;

/// f(theta) = |sum_k c_k e^{ik theta}|^2 / (2 pi) with sum |c_k|^2 = 1 and
/// c_0 real nonnegative.
struct NntsModel {
  int M = 0;
  std::vector<Complex> c{Complex(1.0, 0.0)};

  int free_parameters() const { return 2 * (M + 1) - 2; }
};

/// f(theta1, theta2) = sin(theta2)/(4 pi) |sum c_{k1 k2} e^{i(k1 theta1 + k2 theta2)}|^2
/// for theta1 in (0, 2pi], theta2 in (0, pi]. Coefficients are stored
/// row-major: index k1 * (M2 + 1) + k2.
struct SnntsModel {
  int M1 = 0;
  int M2 = 0;
  std::vector<Complex> c{Complex(1.0, 0.0)};

  Complex at(int k1, int k2) const { return c[static_cast<std::size_t>(k1 * (M2 + 1) + k2)]; }
  int free_parameters() const { return 2 * (M1 + 1) * (M2 + 1) - 2; }
};

enum class Criterion { AIC, BIC };

template <class Model>
struct FitResult {
  Model model;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int iterations = 0;
  bool converged = false;

  double score(Criterion c) const { return c == Criterion::AIC ? aic : bic; }
};

using NntsFit = FitResult<NntsModel>;
using SnntsFit = FitResult<SnntsModel>;

struct FitOptions {
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_iterations = 1000;
  double tolerance = 1e-9;
  // Optional extra starting point (e.g. a lower-order optimum embedded in
  // this order); must have the right length.
  std::optional<std::vector<Complex>> warm_start;
};

// ---------------------------------------------------------------------------
// Constraint forms

/// Integral over theta2 in (0, pi] of sin(theta2) e^{i j theta2}.
inline Complex sine_weighted_moment(int j) {
  if (j == 1 || j == -1) return Complex(0.0, 0.5 * std::numbers::pi * j);
  const double jd = static_cast<double>(j);
  return Complex((1.0 + std::cos(jd * std::numbers::pi)) / (1.0 - jd * jd), 0.0);
}

/// Hermitian form c^H Q c equal to the integral of the unnormalized SNNTS
/// expression over the sphere; the model is normalized when it equals 1.
inline double snnts_quadratic_form(int M1, int M2, std::span<const Complex> c) {
  const int cols = M2 + 1;
  Complex acc(0.0, 0.0);
  for (int k1 = 0; k1 <= M1; ++k1) {
    for (int k2 = 0; k2 <= M2; ++k2) {
      const Complex ck = c[static_cast<std::size_t>(k1 * cols + k2)];
      for (int m2 = 0; m2 <= M2; ++m2) {
        acc += ck * std::conj(c[static_cast<std::size_t>(k1 * cols + m2)]) * sine_weighted_moment(k2 - m2);
      }
    }
  }
  return 0.5 * acc.real();
}

/// The same form restricted to |k2 - m2| != 1 (cosine moments only). It
/// agrees with snnts_quadratic_form whenever Im(c_{k1,k2} conj(c_{k1,k2+1}))
/// vanishes for all adjacent pairs, e.g. for real coefficients.
inline double snnts_cosine_form(int M1, int M2, std::span<const Complex> c) {
  const int cols = M2 + 1;
  double acc = 0.0;
  for (int k1 = 0; k1 <= M1; ++k1) {
    for (int k2 = 0; k2 <= M2; ++k2) {
      for (int m2 = 0; m2 <= M2; ++m2) {
        const int j = k2 - m2;
        if (j == 1 || j == -1) continue;
        const double w = (1.0 + std::cos(j * std::numbers::pi)) / (1.0 - static_cast<double>(j * j));
        acc += (c[static_cast<std::size_t>(k1 * cols + k2)] * std::conj(c[static_cast<std::size_t>(k1 * cols + m2)]))
                   .real() *
               w;
      }
    }
  }
  return 0.5 * acc;
}

namespace detail {

inline double sum_sq(std::span<const Complex> c) {
  double s = 0.0;
  for (const auto& z : c) s += std::norm(z);
  return s;
}

// Rotates the global phase so the first nonzero coefficient (c_0 when
// nonzero) is real and nonnegative.
inline void fix_phase(std::vector<Complex>& c) {
  for (const auto& z : c) {
    const double a = std::abs(z);
    if (a > 0.0) {
      const Complex rot = std::conj(z) / a;
      for (auto& w : c) w *= rot;
      c[static_cast<std::size_t>(&z - c.data())] = Complex(a, 0.0);
      return;
    }
  }
}

inline void check_orders_nnts(int M) {
  if (M < 0 || M > kMaxNntsOrder) throw Error(ErrorKind::InvalidModel, "NNTS order must be in [0, 15]");
}

inline void check_orders_snnts(int M1, int M2) {
  if (M1 < 0 || M2 < 0 || M1 > kMaxSnntsOrder || M2 > kMaxSnntsOrder) {
    throw Error(ErrorKind::InvalidModel, "SNNTS orders must be in [0, 6]");
  }
}

}  // namespace detail

inline NntsModel normalize_nnts(std::vector<Complex> c_raw) {
  if (c_raw.empty()) throw Error(ErrorKind::ZeroCoefficients, "empty coefficient vector");
  const double norm = std::sqrt(detail::sum_sq(c_raw));
  if (!(norm > 0.0) || !std::isfinite(norm)) throw Error(ErrorKind::ZeroCoefficients, "coefficients are all zero");
  for (auto& z : c_raw) z /= norm;
  detail::fix_phase(c_raw);
  NntsModel m;
  m.M = static_cast<int>(c_raw.size()) - 1;
  m.c = std::move(c_raw);
  return m;
}

inline SnntsModel normalize_snnts(int M1, int M2, std::vector<Complex> c_raw) {
  if (M1 < 0 || M2 < 0 || c_raw.size() != static_cast<std::size_t>((M1 + 1) * (M2 + 1))) {
    throw Error(ErrorKind::InvalidModel, "coefficient matrix does not match (M1+1) x (M2+1)");
  }
  const double q = snnts_quadratic_form(M1, M2, c_raw);
  if (!(q > 0.0) || !std::isfinite(q)) throw Error(ErrorKind::NonPositiveQuadraticForm, "form is not positive");
  const double s = 1.0 / std::sqrt(q);
  for (auto& z : c_raw) z *= s;
  detail::fix_phase(c_raw);
  SnntsModel m;
  m.M1 = M1;
  m.M2 = M2;
  m.c = std::move(c_raw);
  return m;
}

inline void validate(const NntsModel& m) {
  if (m.M < 0 || m.c.size() != static_cast<std::size_t>(m.M + 1)) {
    throw Error(ErrorKind::InvalidModel, "coefficient count does not match M");
  }
  if (std::abs(detail::sum_sq(m.c) - 1.0) > 1e-10) throw Error(ErrorKind::InvalidModel, "sum |c_k|^2 != 1");
  if (std::abs(m.c[0].imag()) > 1e-12 || m.c[0].real() < 0.0) {
    throw Error(ErrorKind::InvalidModel, "c_0 must be real and nonnegative");
  }
}

inline void validate(const SnntsModel& m) {
  if (m.M1 < 0 || m.M2 < 0 || m.c.size() != static_cast<std::size_t>((m.M1 + 1) * (m.M2 + 1))) {
    throw Error(ErrorKind::InvalidModel, "coefficient count does not match (M1, M2)");
  }
  if (std::abs(snnts_quadratic_form(m.M1, m.M2, m.c) - 1.0) > 1e-8) {
    throw Error(ErrorKind::InvalidModel, "normalization form != 1");
  }
  if (std::abs(m.c[0].imag()) > 1e-12) throw Error(ErrorKind::InvalidModel, "c_00 must be real");
}

/// |sum_k c_k e^{ik theta}|^2 without the 1/(2 pi) factor or validation.
inline double nnts_modulus_sq(std::span<const Complex> c, double theta) {
  Complex s(0.0, 0.0);
  const Complex step = std::polar(1.0, theta);
  Complex e(1.0, 0.0);
  for (const auto& ck : c) {
    s += ck * e;
    e *= step;
  }
  return std::norm(s);
}

inline double snnts_modulus_sq(int M1, int M2, std::span<const Complex> c, double theta1, double theta2) {
  const Complex step1 = std::polar(1.0, theta1);
  const Complex step2 = std::polar(1.0, theta2);
  Complex s(0.0, 0.0);
  Complex e1(1.0, 0.0);
  for (int k1 = 0; k1 <= M1; ++k1) {
    Complex inner(0.0, 0.0);
    Complex e2(1.0, 0.0);
    for (int k2 = 0; k2 <= M2; ++k2) {
      inner += c[static_cast<std::size_t>(k1 * (M2 + 1) + k2)] * e2;
      e2 *= step2;
    }
    s += inner * e1;
    e1 *= step1;
  }
  return std::norm(s);
}

inline double nnts_density(const NntsModel& m, double theta) {
  validate(m);
  return nnts_modulus_sq(m.c, theta) / kTwoPi;
}

inline double snnts_density(const SnntsModel& m, double theta1, double theta2) {
  validate(m);
  return std::sin(theta2) / (4.0 * std::numbers::pi) * snnts_modulus_sq(m.M1, m.M2, m.c, theta1, theta2);
}

// ---------------------------------------------------------------------------
// Likelihood machinery shared by both families. Each observation i carries a
// basis row b_i with f_i = w_i |b_i . c|^2; the constraint is c^H Q c = 1.

namespace detail {

struct TrigSumProblem {
  std::size_t p = 0;                // coefficient count
  std::vector<Complex> basis;   // n x p, row-major
  double log_weight_sum = 0.0;  // sum_i ln w_i
  std::vector<Complex> q;       // p x p Hermitian, row-major; empty means identity
  std::size_t n = 0;

  double form(std::span<const Complex> c) const {
    if (q.empty()) return sum_sq(c);
    Complex acc(0.0, 0.0);
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b < p; ++b) acc += c[a] * std::conj(c[b]) * q[a * p + b];
    }
    return acc.real();
  }

  // d form / d(Re c_a) + i d form / d(Im c_a) encoded as a complex vector.
  std::vector<Complex> form_gradient(std::span<const Complex> c) const {
    std::vector<Complex> g(p);
    for (std::size_t a = 0; a < p; ++a) {
      Complex v(0.0, 0.0);
      if (q.empty()) {
        v = std::conj(c[a]);
      } else {
        for (std::size_t b = 0; b < p; ++b) v += q[a * p + b] * std::conj(c[b]);
      }
      g[a] = Complex(2.0 * v.real(), -2.0 * v.imag());
    }
    return g;
  }

  // Sum of ln|b_i . c|^2; -inf when some point falls below the density floor.
  double raw_loglik(std::span<const Complex> c) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Complex* row = &basis[i * p];
      Complex z(0.0, 0.0);
      for (std::size_t j = 0; j < p; ++j) z += c[j] * row[j];
      const double m2 = std::norm(z);
      if (!(m2 > 1e-300)) return -std::numeric_limits<double>::infinity();
      s += std::log(m2);
    }
    return s;
  }

  std::vector<Complex> raw_gradient(std::span<const Complex> c) const {
    std::vector<Complex> g(p, Complex(0.0, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const Complex* row = &basis[i * p];
      Complex z(0.0, 0.0);
      for (std::size_t j = 0; j < p; ++j) z += c[j] * row[j];
      const double m2 = std::norm(z);
      const Complex zc = std::conj(z) / m2;
      for (std::size_t j = 0; j < p; ++j) {
        const Complex v = zc * row[j];
        g[j] += Complex(2.0 * v.real(), -2.0 * v.imag());
      }
    }
    return g;
  }

  double loglik(std::span<const Complex> c) const { return log_weight_sum + raw_loglik(c); }

  void retract(std::vector<Complex>& c) const {
    const double s = 1.0 / std::sqrt(form(c));
    for (auto& z : c) z *= s;
    fix_phase(c);
  }
};

struct AscentOutcome {
  std::vector<Complex> c;
  double loglik = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Gradient ascent of the scale-invariant objective
//   L(c) - n ln form(c)
// with Barzilai-Borwein step proposals, halving backtracking and retraction
// onto the constraint after every step. Accepted steps never decrease L.
inline AscentOutcome ascend(const TrigSumProblem& prob, std::vector<Complex> c, int max_iter, double tol) {
  AscentOutcome out;
  prob.retract(c);
  double f = prob.raw_loglik(c);
  if (!std::isfinite(f)) return out;
  const double nd = static_cast<double>(prob.n);
  auto objective_gradient = [&](const std::vector<Complex>& x) {
    auto g = prob.raw_gradient(x);
    const auto gf = prob.form_gradient(x);
    const double fq = prob.form(x);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] -= nd / fq * gf[j];
    return g;
  };
  auto g = objective_gradient(c);
  double step = 1.0 / (2.0 * nd);
  std::vector<Complex> trial(c.size());
  int it = 0;
  for (; it < max_iter; ++it) {
    double fn = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    double t = step;
    for (int halving = 0; halving <= 40; ++halving, t *= 0.5) {
      for (std::size_t j = 0; j < c.size(); ++j) trial[j] = c[j] + t * g[j];
      prob.retract(trial);
      fn = prob.raw_loglik(trial);
      if (std::isfinite(fn) && fn >= f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.converged = true;
      break;
    }
    auto gn = objective_gradient(trial);
    // BB step from the retracted displacement.
    double ss = 0.0, sy = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const Complex s = trial[j] - c[j];
      const Complex y = gn[j] - g[j];
      ss += std::norm(s);
      sy += s.real() * y.real() + s.imag() * y.imag();
    }
    const double change = fn - f;
    c.swap(trial);
    g.swap(gn);
    f = fn;
    step = (sy < 0.0 && ss > 0.0) ? ss / -sy : 2.0 * t;
    if (!std::isfinite(step) || step <= 0.0) step = 1.0 / (2.0 * nd);
    if (change <= tol * std::max(1.0, std::abs(prob.log_weight_sum + f))) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.c = std::move(c);
  out.loglik = prob.log_weight_sum + f;
  out.iterations = it;
  return out;
}

inline std::vector<Complex> random_coefficients(std::size_t p, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Complex> c(p);
  for (auto& z : c) {
    const double re = normal(rng);
    const double im = normal(rng);
    z = Complex(re, im);
  }
  return c;
}

template <class Model>
FitResult<Model> best_of_starts(const TrigSumProblem& prob, const FitOptions& opts, int free_params,
                                const auto& make_model) {
  std::vector<std::vector<Complex>> starts;
  std::vector<Complex> uniform(prob.p, Complex(0.0, 0.0));
  uniform[0] = Complex(1.0, 0.0);
  starts.push_back(uniform);
  if (opts.warm_start && opts.warm_start->size() == prob.p) starts.push_back(*opts.warm_start);
  for (int r = 0; r < opts.restarts; ++r) {
    Rng rng = make_rng(opts.seed, {static_cast<std::uint64_t>(r)});
    starts.push_back(random_coefficients(prob.p, rng));
  }
  AscentOutcome best;
  for (auto& s : starts) {
    AscentOutcome o = ascend(prob, std::move(s), opts.max_iterations, opts.tolerance);
    if (o.loglik > best.loglik) best = std::move(o);
  }
  if (!std::isfinite(best.loglik)) throw Error(ErrorKind::OptimizerFailure, "no start has a finite likelihood");
  FitResult<Model> fit;
  fit.model = make_model(best.c);
  fit.loglik = best.loglik;
  const double nd = static_cast<double>(prob.n);
  fit.aic = -2.0 * fit.loglik + 2.0 * free_params;
  fit.bic = -2.0 * fit.loglik + free_params * std::log(nd);
  fit.iterations = best.iterations;
  fit.converged = best.converged;
  return fit;
}

inline TrigSumProblem nnts_problem(std::span<const double> theta, int M) {
  TrigSumProblem prob;
  prob.p = static_cast<std::size_t>(M + 1);
  prob.n = theta.size();
  prob.basis.resize(prob.n * prob.p);
  for (std::size_t i = 0; i < prob.n; ++i) {
    const Complex step = std::polar(1.0, theta[i]);
    Complex e(1.0, 0.0);
    for (std::size_t k = 0; k < prob.p; ++k) {
      prob.basis[i * prob.p + k] = e;
      e *= step;
    }
  }
  prob.log_weight_sum = -static_cast<double>(prob.n) * std::log(kTwoPi);
  return prob;
}

inline TrigSumProblem snnts_problem(std::span<const double> theta1, std::span<const double> theta2, int M1, int M2) {
  TrigSumProblem prob;
  const std::size_t cols = static_cast<std::size_t>(M2 + 1);
  prob.p = static_cast<std::size_t>(M1 + 1) * cols;
  prob.n = theta1.size();
  prob.basis.resize(prob.n * prob.p);
  double lw = 0.0;
  for (std::size_t i = 0; i < prob.n; ++i) {
    const Complex s1 = std::polar(1.0, theta1[i]);
    const Complex s2 = std::polar(1.0, theta2[i]);
    Complex e1(1.0, 0.0);
    for (int k1 = 0; k1 <= M1; ++k1) {
      Complex e2(1.0, 0.0);
      for (std::size_t k2 = 0; k2 < cols; ++k2) {
        prob.basis[i * prob.p + static_cast<std::size_t>(k1) * cols + k2] = e1 * e2;
        e2 *= s2;
      }
      e1 *= s1;
    }
    lw += std::log(std::sin(theta2[i]) / (4.0 * std::numbers::pi));
  }
  prob.log_weight_sum = lw;
  prob.q.assign(prob.p * prob.p, Complex(0.0, 0.0));
  for (int k1 = 0; k1 <= M1; ++k1) {
    for (int k2 = 0; k2 <= M2; ++k2) {
      for (int m2 = 0; m2 <= M2; ++m2) {
        const std::size_t a = static_cast<std::size_t>(k1) * cols + static_cast<std::size_t>(k2);
        const std::size_t b = static_cast<std::size_t>(k1) * cols + static_cast<std::size_t>(m2);
        prob.q[a * prob.p + b] = 0.5 * sine_weighted_moment(k2 - m2);
      }
    }
  }
  return prob;
}

}  // namespace detail

/// Sum of ln f(theta_i) for an arbitrary (not necessarily normalized)
/// coefficient vector; the gradient below differentiates this function.
inline double nnts_loglik(std::span<const Complex> c, std::span<const double> theta) {
  const auto prob = detail::nnts_problem(theta, static_cast<int>(c.size()) - 1);
  return prob.loglik(c);
}

/// Gradient of nnts_loglik with respect to the real coordinates
/// (Re c_0, Im c_0, Re c_1, Im c_1, ...).
inline std::vector<double> nnts_loglik_gradient(std::span<const Complex> c, std::span<const double> theta) {
  const auto prob = detail::nnts_problem(theta, static_cast<int>(c.size()) - 1);
  const auto g = prob.raw_gradient(c);
  std::vector<double> out;
  out.reserve(2 * g.size());
  for (const auto& z : g) {
    out.push_back(z.real());
    out.push_back(z.imag());
  }
  return out;
}

inline double snnts_loglik(int M1, int M2, std::span<const Complex> c, std::span<const double> theta1,
                           std::span<const double> theta2) {
  return detail::snnts_problem(theta1, theta2, M1, M2).loglik(c);
}

inline std::vector<double> snnts_loglik_gradient(int M1, int M2, std::span<const Complex> c,
                                                 std::span<const double> theta1, std::span<const double> theta2) {
  const auto g = detail::snnts_problem(theta1, theta2, M1, M2).raw_gradient(c);
  std::vector<double> out;
  out.reserve(2 * g.size());
  for (const auto& z : g) {
    out.push_back(z.real());
    out.push_back(z.imag());
  }
  return out;
}

inline NntsFit fit_nnts(std::span<const double> theta, int M, const FitOptions& opts = {}) {
  detail::check_orders_nnts(M);
  if (theta.size() < static_cast<std::size_t>(2 * (M + 1))) {
    throw Error(ErrorKind::TooFewObservations,
                std::to_string(theta.size()) + " angles for order " + std::to_string(M));
  }
  const auto prob = detail::nnts_problem(theta, M);
  NntsModel proto;
  proto.M = M;
  return detail::best_of_starts<NntsModel>(prob, opts, proto.free_parameters(),
                                           [&](const std::vector<Complex>& c) { return normalize_nnts(c); });
}

inline SnntsFit fit_snnts(std::span<const double> theta1, std::span<const double> theta2, int M1, int M2,
                          const FitOptions& opts = {}) {
  detail::check_orders_snnts(M1, M2);
  if (theta1.size() != theta2.size()) throw Error(ErrorKind::LengthMismatch, "theta1 and theta2 differ in length");
  const std::size_t p = static_cast<std::size_t>((M1 + 1) * (M2 + 1));
  if (theta1.size() < 2 * p) {
    throw Error(ErrorKind::TooFewObservations, std::to_string(theta1.size()) + " points for " +
                                                   std::to_string(p) + " coefficients");
  }
  for (double t : theta2) {
    if (!(t > 0.0 && t < std::numbers::pi)) {
      throw Error(ErrorKind::InvalidConfig, "theta2 must lie strictly inside (0, pi) for a finite likelihood");
    }
  }
  const auto prob = detail::snnts_problem(theta1, theta2, M1, M2);
  SnntsModel proto;
  proto.M1 = M1;
  proto.M2 = M2;
  return detail::best_of_starts<SnntsModel>(
      prob, opts, proto.free_parameters(), [&](const std::vector<Complex>& c) { return normalize_snnts(M1, M2, c); });
}

// ---------------------------------------------------------------------------
// Model selection

template <class Model>
struct ModelSelection {
  std::vector<FitResult<Model>> fits;  // one per candidate, in candidate order
  std::size_t best_aic = 0;
  std::size_t best_bic = 0;

  const FitResult<Model>& best(Criterion c) const { return fits[c == Criterion::AIC ? best_aic : best_bic]; }
};

namespace detail {

template <class Model>
void rank_fits(ModelSelection<Model>& sel) {
  for (std::size_t i = 1; i < sel.fits.size(); ++i) {
    if (sel.fits[i].aic < sel.fits[sel.best_aic].aic) sel.best_aic = i;
    if (sel.fits[i].bic < sel.fits[sel.best_bic].bic) sel.best_bic = i;
  }
}

}  // namespace detail

/// Fits every candidate order. Each fit after the first also starts from the
/// best lower-order optimum padded with zeros, so nested likelihoods are
/// monotone in the order.
inline ModelSelection<NntsModel> select_model(std::span<const double> theta, std::span<const int> M_candidates,
                                              const FitOptions& opts = {}) {
  if (M_candidates.empty()) throw Error(ErrorKind::InvalidConfig, "no candidate orders");
  ModelSelection<NntsModel> sel;
  for (std::size_t i = 0; i < M_candidates.size(); ++i) {
    const int M = M_candidates[i];
    FitOptions o = opts;
    o.seed = derive_seed(opts.seed, {static_cast<std::uint64_t>(M)});
    const NntsFit* nested = nullptr;
    for (const auto& f : sel.fits) {
      if (f.model.M <= M && (!nested || f.loglik > nested->loglik)) nested = &f;
    }
    if (nested) {
      std::vector<Complex> w(static_cast<std::size_t>(M + 1), Complex(0.0, 0.0));
      std::copy(nested->model.c.begin(), nested->model.c.end(), w.begin());
      o.warm_start = std::move(w);
    }
    sel.fits.push_back(fit_nnts(theta, M, o));
  }
  detail::rank_fits(sel);
  return sel;
}

inline ModelSelection<SnntsModel> select_snnts_model(std::span<const double> theta1, std::span<const double> theta2,
                                                     std::span<const std::pair<int, int>> candidates,
                                                     const FitOptions& opts = {}) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidConfig, "no candidate orders");
  ModelSelection<SnntsModel> sel;
  for (const auto& [M1, M2] : candidates) {
    FitOptions o = opts;
    o.seed = derive_seed(opts.seed, {static_cast<std::uint64_t>(M1), static_cast<std::uint64_t>(M2)});
    const SnntsFit* nested = nullptr;
    for (const auto& f : sel.fits) {
      if (f.model.M1 <= M1 && f.model.M2 <= M2 && (!nested || f.loglik > nested->loglik)) nested = &f;
    }
    if (nested) {
      std::vector<Complex> w(static_cast<std::size_t>((M1 + 1) * (M2 + 1)), Complex(0.0, 0.0));
      for (int k1 = 0; k1 <= nested->model.M1; ++k1) {
        for (int k2 = 0; k2 <= nested->model.M2; ++k2) {
          w[static_cast<std::size_t>(k1 * (M2 + 1) + k2)] = nested->model.at(k1, k2);
        }
      }
      o.warm_start = std::move(w);
    }
    sel.fits.push_back(fit_snnts(theta1, theta2, M1, M2, o));
  }
  detail::rank_fits(sel);
  return sel;
}

// ---------------------------------------------------------------------------
// Sampling

/// Rejection sampler with uniform proposals and envelope (sum |c_k|)^2/(2 pi).
inline AngleSample sample_nnts(const NntsModel& m, std::size_t n, std::uint64_t seed) {
  validate(m);
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double l1 = 0.0;
  for (const auto& z : m.c) l1 += std::abs(z);
  const double bound = l1 * l1;
  AngleSample out;
  out.reserve(n);
  while (out.size() < n) {
    const double theta = kTwoPi * unif(rng);
    if (unif(rng) * bound <= nnts_modulus_sq(m.c, theta)) out.push_back(theta);
  }
  return out;
}

struct SphericalAngles {
  std::vector<double> theta1;  // azimuth, (0, 2pi]
  std::vector<double> theta2;  // inclination, (0, pi]
};

/// Rejection sampler with uniform-on-sphere proposals.
inline SphericalAngles sample_snnts(const SnntsModel& m, std::size_t n, std::uint64_t seed) {
  validate(m);
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double l1 = 0.0;
  for (const auto& z : m.c) l1 += std::abs(z);
  const double bound = l1 * l1;
  SphericalAngles out;
  out.theta1.reserve(n);
  out.theta2.reserve(n);
  while (out.theta1.size() < n) {
    const double t1 = kTwoPi * (1.0 - unif(rng));
    const double t2 = std::acos(1.0 - 2.0 * unif(rng));
    if (!(t2 > 0.0)) continue;
    if (unif(rng) * bound <= snnts_modulus_sq(m.M1, m.M2, m.c, t1, t2)) {
      out.theta1.push_back(t1);
      out.theta2.push_back(t2);
    }
  }
  return out;
}

}  // namespace mrv
