#pragma once

// Radial tail: Hill estimator, generalized Pareto MLE, Anderson-Darling
// goodness of fit with a parametric-bootstrap p-value, threshold selection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "mrv/error.hpp"
#include "mrv/random.hpp"

namespace mrv {

struct HillEstimate {
  std::size_t r = 0;
  double alpha_hat = 0.0;
  double evi = 0.0;
};

/// Hill estimate from the top r of a descending-sorted positive sample:
/// alpha = 1 / (mean_{i<=r} ln Y_(i) - ln Y_(r)).
inline HillEstimate hill(std::span<const double> radii_desc, std::size_t r) {
  if (r < 2 || r > radii_desc.size()) {
    throw Error(ErrorKind::InvalidConfig, "hill needs 2 <= r <= n, got r=" + std::to_string(r));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (!(radii_desc[i] > 0.0)) throw Error(ErrorKind::NonPositiveRadius, "radius at rank " + std::to_string(i));
    sum += std::log(radii_desc[i]);
  }
  const double excess = sum / static_cast<double>(r) - std::log(radii_desc[r - 1]);
  if (!(excess > 0.0)) throw Error(ErrorKind::DegenerateSample, "top-r values are all equal");
  HillEstimate h;
  h.r = r;
  h.alpha_hat = 1.0 / excess;
  h.evi = excess;
  return h;
}

// ---------------------------------------------------------------------------
// Generalized Pareto distribution

inline constexpr double kGpdExpBranch = 1e-6;
inline constexpr double kGpdMinShape = -0.5;
inline constexpr std::size_t kMinExceedances = 10;

struct GpdParams {
  double xi = 0.0;
  double sigma = 1.0;
  double loglik = -std::numeric_limits<double>::infinity();
};

/// log(1 - F(y)) for y >= 0.
inline double gpd_log_survival(double y, double xi, double sigma) {
  if (std::abs(xi) < kGpdExpBranch) return -y / sigma;
  const double t = xi * y / sigma;
  if (t <= -1.0) return -std::numeric_limits<double>::infinity();
  return -std::log1p(t) / xi;
}

inline double gpd_cdf(double y, double xi, double sigma) {
  if (y <= 0.0) return 0.0;
  return -std::expm1(gpd_log_survival(y, xi, sigma));
}

/// Inverse-CDF draw.
inline double gpd_quantile(double p, double xi, double sigma) {
  if (std::abs(xi) < kGpdExpBranch) return -sigma * std::log1p(-p);
  return sigma / xi * std::expm1(-xi * std::log1p(-p));
}

inline std::vector<double> sample_gpd(std::size_t n, double xi, double sigma, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& y : out) y = gpd_quantile(unif(rng), xi, sigma);
  return out;
}

/// Log-likelihood; -inf outside the support.
inline double gpd_loglik(std::span<const double> y, double xi, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(xi)) return -std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(y.size());
  if (std::abs(xi) < kGpdExpBranch) {
    double s = 0.0;
    for (double v : y) s += v;
    return -n * std::log(sigma) - s / sigma;
  }
  double s = 0.0;
  for (double v : y) {
    const double t = xi * v / sigma;
    if (t <= -1.0) return -std::numeric_limits<double>::infinity();
    s += std::log1p(t);
  }
  return -n * std::log(sigma) - (1.0 + 1.0 / xi) * s;
}

/// Probability-weighted-moment estimate (Hosking & Wallis), adjusted into the
/// admissible region.
inline GpdParams gpd_pwm_init(std::span<const double> y) {
  std::vector<double> s(y.begin(), y.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double a0 = 0.0, a1 = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = (static_cast<double>(i) + 1.0 - 0.35) / n;
    a0 += s[i];
    a1 += (1.0 - p) * s[i];
  }
  a0 /= n;
  a1 /= n;
  GpdParams init;
  const double denom = a0 - 2.0 * a1;
  if (denom > 0.0) {
    init.xi = 2.0 - a0 / denom;
    init.sigma = 2.0 * a0 * a1 / denom;
  } else {
    init.xi = 0.1;
    init.sigma = a0;
  }
  if (!std::isfinite(init.xi) || !(init.sigma > 0.0)) {
    init.xi = 0.1;
    init.sigma = a0;
  }
  init.xi = std::clamp(init.xi, kGpdMinShape + 0.1, 3.0);
  const double ymax = s.back();
  if (init.xi < 0.0 && init.sigma <= -init.xi * ymax) init.sigma = -init.xi * ymax * 1.1;
  init.loglik = gpd_loglik(y, init.xi, init.sigma);
  return init;
}

namespace detail {

// Negative log-likelihood and gradient in (xi, log sigma).
struct GpdObjective {
  std::span<const double> y;

  double value(const std::array<double, 2>& th) const {
    const double xi = th[0];
    if (xi <= -1.0) return std::numeric_limits<double>::infinity();
    const double ll = gpd_loglik(y, xi, std::exp(th[1]));
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  }

  std::array<double, 2> gradient(const std::array<double, 2>& th) const {
    const double xi = th[0];
    const double sigma = std::exp(th[1]);
    const double n = static_cast<double>(y.size());
    double d_xi = 0.0, d_ls = 0.0;
    if (std::abs(xi) < kGpdExpBranch) {
      for (double v : y) {
        const double z = v / sigma;
        d_xi += 0.5 * z * z - z;
        d_ls += z;
      }
      d_ls -= n;
    } else {
      double sum_log = 0.0, sum_ratio = 0.0;
      for (double v : y) {
        const double z = v / sigma;
        const double t = 1.0 + xi * z;
        sum_log += std::log1p(xi * z);
        sum_ratio += z / t;
      }
      d_xi = sum_log / (xi * xi) - (1.0 + 1.0 / xi) * sum_ratio;
      d_ls = -n + (1.0 + xi) * sum_ratio;
    }
    return {-d_xi, -d_ls};
  }
};

inline std::optional<std::array<double, 2>> bfgs_minimize(const GpdObjective& obj, std::array<double, 2> x) {
  double f = obj.value(x);
  if (!std::isfinite(f)) return std::nullopt;
  auto g = obj.gradient(x);
  std::array<double, 4> h{1.0, 0.0, 0.0, 1.0};  // inverse Hessian, row-major
  for (int iter = 0; iter < 200; ++iter) {
    if (std::max(std::abs(g[0]), std::abs(g[1])) < 1e-9 * (1.0 + std::abs(f))) break;
    std::array<double, 2> p{-(h[0] * g[0] + h[1] * g[1]), -(h[2] * g[0] + h[3] * g[1])};
    double slope = p[0] * g[0] + p[1] * g[1];
    if (!(slope < 0.0)) {
      h = {1.0, 0.0, 0.0, 1.0};
      p = {-g[0], -g[1]};
      slope = p[0] * g[0] + p[1] * g[1];
    }
    double t = 1.0;
    std::array<double, 2> xn{};
    double fn = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      xn = {x[0] + t * p[0], x[1] + t * p[1]};
      fn = obj.value(xn);
      if (std::isfinite(fn) && fn <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const auto gn = obj.gradient(xn);
    const std::array<double, 2> s{xn[0] - x[0], xn[1] - x[1]};
    const std::array<double, 2> yv{gn[0] - g[0], gn[1] - g[1]};
    const double sy = s[0] * yv[0] + s[1] * yv[1];
    const double df = f - fn;
    x = xn;
    g = gn;
    f = fn;
    if (sy > 1e-14) {
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      const double rho = 1.0 / sy;
      const std::array<double, 2> hy{h[0] * yv[0] + h[1] * yv[1], h[2] * yv[0] + h[3] * yv[1]};
      const double yhy = yv[0] * hy[0] + yv[1] * hy[1];
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          h[2 * i + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
      }
    }
    if (df < 1e-15 * (1.0 + std::abs(f))) break;
  }
  // Near the optimum the function value is flat to rounding; finish with
  // Newton steps on the gradient (Hessian by central differences) for as long
  // as they shrink it.
  auto gnorm = [](const std::array<double, 2>& v) { return std::max(std::abs(v[0]), std::abs(v[1])); };
  for (int polish = 0; polish < 8; ++polish) {
    if (gnorm(g) == 0.0) break;
    std::array<double, 4> hess{};
    for (int j = 0; j < 2; ++j) {
      const double step = 1e-6 * (1.0 + std::abs(x[j]));
      auto xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      if (!std::isfinite(obj.value(xp)) || !std::isfinite(obj.value(xm))) return x;
      const auto gp = obj.gradient(xp);
      const auto gm = obj.gradient(xm);
      hess[j] = (gp[0] - gm[0]) / (2.0 * step);
      hess[2 + j] = (gp[1] - gm[1]) / (2.0 * step);
    }
    const double a = hess[0], b = 0.5 * (hess[1] + hess[2]), d = hess[3];
    const double det = a * d - b * b;
    if (!(a > 0.0 && det > 0.0)) break;
    const std::array<double, 2> xn{x[0] - (d * g[0] - b * g[1]) / det, x[1] - (a * g[1] - b * g[0]) / det};
    if (!std::isfinite(obj.value(xn))) break;
    const auto gn = obj.gradient(xn);
    if (!(gnorm(gn) < gnorm(g))) break;
    x = xn;
    g = gn;
  }
  return x;
}

// Maximizes the likelihood over log sigma at fixed shape.
inline GpdParams profile_sigma(std::span<const double> y, double xi, double ymax, double scale_hint) {
  double lo = std::log(scale_hint) - 12.0;
  const double hi = std::log(scale_hint) + 12.0;
  if (xi < 0.0) lo = std::max(lo, std::log(-xi * ymax) + 1e-12);
  auto neg = [&](double ls) {
    const double ll = gpd_loglik(y, xi, std::exp(ls));
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::max();
  };
  const auto [ls, nll] = boost::math::tools::brent_find_minima(neg, lo, hi, 52);
  GpdParams p;
  p.xi = xi;
  p.sigma = std::exp(ls);
  p.loglik = gpd_loglik(y, xi, p.sigma);
  return p;
}

// Fit on data already scaled to unit mean.
inline GpdParams fit_gpd_scaled(std::span<const double> y) {
  const double ymax = *std::max_element(y.begin(), y.end());
  const GpdParams init = gpd_pwm_init(y);
  GpdObjective obj{y};
  GpdParams best;
  if (auto th = bfgs_minimize(obj, {init.xi, std::log(init.sigma)})) {
    best.xi = (*th)[0];
    best.sigma = std::exp((*th)[1]);
    best.loglik = gpd_loglik(y, best.xi, best.sigma);
  }
  if (!std::isfinite(best.loglik) || !std::isfinite(best.xi)) {
    // Profile search over a shape grid.
    best = GpdParams{};
    for (int i = 0; i <= 40; ++i) {
      const double xi = kGpdMinShape + 0.05 * i;
      GpdParams p = profile_sigma(y, xi, ymax, 1.0);
      if (p.loglik > best.loglik) best = p;
    }
    if (!std::isfinite(best.loglik)) throw Error(ErrorKind::OptimizerFailure, "GPD likelihood is not finite");
  }
  if (best.xi < kGpdMinShape) best = profile_sigma(y, kGpdMinShape, ymax, 1.0);
  if (init.loglik > best.loglik && init.xi >= kGpdMinShape) best = init;
  return best;
}

}  // namespace detail

/// Maximum-likelihood GPD fit with shape restricted to xi >= -0.5.
/// Data are rescaled to unit mean before optimization, which makes the fit
/// scale-equivariant.
inline GpdParams fit_gpd(std::span<const double> exceedances) {
  if (exceedances.size() < kMinExceedances) {
    throw Error(ErrorKind::TooFewExceedances,
                std::to_string(exceedances.size()) + " exceedances, need " + std::to_string(kMinExceedances));
  }
  double mean = 0.0;
  for (double v : exceedances) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidConfig, "exceedances must be finite and >= 0");
    mean += v;
  }
  mean /= static_cast<double>(exceedances.size());
  if (!(mean > 0.0)) throw Error(ErrorKind::DegenerateSample, "all exceedances are zero");
  std::vector<double> scaled(exceedances.begin(), exceedances.end());
  for (auto& v : scaled) v /= mean;
  GpdParams p = detail::fit_gpd_scaled(scaled);
  p.sigma *= mean;
  p.loglik = gpd_loglik(exceedances, p.xi, p.sigma);
  return p;
}

/// Anderson-Darling statistic of probability-integral-transformed values.
inline double anderson_darling(std::span<const double> z) {
  std::vector<double> s(z.begin(), z.end());
  std::sort(s.begin(), s.end());
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  const std::size_t k = s.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double zi = std::clamp(s[i], lo, hi);
    const double zr = std::clamp(s[k - 1 - i], lo, hi);
    acc += static_cast<double>(2 * i + 1) * (std::log(zi) + std::log1p(-zr));
  }
  return -static_cast<double>(k) - acc / static_cast<double>(k);
}

inline double ad_statistic_gpd(std::span<const double> exceedances, double xi, double sigma) {
  std::vector<double> z(exceedances.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = gpd_cdf(exceedances[i], xi, sigma);
  return anderson_darling(z);
}

struct GpdFit {
  double threshold = 0.0;
  std::size_t k_exceed = 0;
  double xi = 0.0;
  double sigma = 1.0;
  double loglik = 0.0;
  double ad_stat = 0.0;
  double p_value = 1.0;
};

inline constexpr std::size_t kDefaultBootstrap = 499;

/// GPD fit plus Anderson-Darling test. The p-value is
/// (1 + #{A*^2 >= A^2}) / (n_boot + 1) over parametric bootstrap replicates
/// drawn from the fitted model; replicate b uses substream (seed, b).
inline GpdFit ad_gpd_test(std::span<const double> exceedances, std::size_t n_boot, std::uint64_t seed,
                          double threshold = 0.0) {
  if (n_boot < 99) throw Error(ErrorKind::InvalidConfig, "n_boot must be >= 99");
  const GpdParams p = fit_gpd(exceedances);
  GpdFit out;
  out.threshold = threshold;
  out.k_exceed = exceedances.size();
  out.xi = p.xi;
  out.sigma = p.sigma;
  out.loglik = p.loglik;
  out.ad_stat = ad_statistic_gpd(exceedances, p.xi, p.sigma);

  std::size_t exceed_count = 0;
  for (std::size_t b = 0; b < n_boot; ++b) {
    Rng rng = make_rng(seed, {b});
    const auto sim = sample_gpd(exceedances.size(), p.xi, p.sigma, rng);
    double stat = std::numeric_limits<double>::infinity();
    try {
      const GpdParams q = fit_gpd(sim);
      stat = ad_statistic_gpd(sim, q.xi, q.sigma);
    } catch (const Error&) {
      // a failed refit counts against the observed statistic
    }
    if (!(stat < out.ad_stat)) ++exceed_count;
  }
  out.p_value = static_cast<double>(1 + exceed_count) / static_cast<double>(n_boot + 1);
  return out;
}

/// Exceedances of the top k over u = Y_(k+1).
inline std::vector<double> top_k_exceedances(std::span<const double> radii_desc, std::size_t k) {
  if (k + 1 > radii_desc.size()) throw Error(ErrorKind::InvalidConfig, "k must be below the sample size");
  const double u = radii_desc[k];
  std::vector<double> y(k);
  for (std::size_t i = 0; i < k; ++i) y[i] = radii_desc[i] - u;
  return y;
}

// ---------------------------------------------------------------------------
// Threshold selection

inline constexpr std::size_t kStabilityWindow = 21;

struct ThresholdSelection {
  std::size_t k_u = 0;
  double u = 0.0;
  double evi_at_ku = 0.0;
};

/// Index into `ks` of the admissible entry whose EVI series has the smallest
/// standard deviation over a centered window (clipped at the ends). Ties go to
/// the smaller index.
inline std::optional<std::size_t> most_stable_index(std::span<const double> evi, const std::vector<bool>& admissible,
                                                    std::size_t window = kStabilityWindow) {
  const std::size_t n = evi.size();
  const std::size_t half = window / 2;
  std::optional<std::size_t> best;
  double best_sd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (!admissible[i]) continue;
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    const double m = static_cast<double>(hi - lo + 1);
    double mean = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) mean += evi[j];
    mean /= m;
    double ss = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) ss += (evi[j] - mean) * (evi[j] - mean);
    const double sd = std::sqrt(ss / m);
    if (sd < best_sd) {
      best_sd = sd;
      best = i;
    }
  }
  return best;
}

/// Selection from precomputed tail-test p-values (one per entry of ks).
inline ThresholdSelection select_k_u(std::span<const double> radii_desc, std::span<const std::size_t> ks,
                                     std::span<const double> p_tail, double alpha_level) {
  if (ks.empty()) throw Error(ErrorKind::InvalidConfig, "empty k range");
  if (p_tail.size() != ks.size()) throw Error(ErrorKind::LengthMismatch, "one tail p-value per k required");
  std::vector<double> evi(ks.size());
  std::vector<bool> admissible(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    evi[i] = hill(radii_desc, ks[i]).evi;
    admissible[i] = p_tail[i] > alpha_level;
  }
  const auto idx = most_stable_index(evi, admissible);
  if (!idx) throw Error(ErrorKind::NoAdmissibleK, "the tail test rejects at every k");
  ThresholdSelection sel;
  sel.k_u = ks[*idx];
  sel.u = radii_desc[sel.k_u];
  sel.evi_at_ku = evi[*idx];
  return sel;
}

inline ThresholdSelection select_k_u(std::span<const double> radii_desc, std::span<const std::size_t> ks,
                                     double alpha_level, std::size_t n_boot, std::uint64_t seed) {
  std::vector<double> p(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const auto y = top_k_exceedances(radii_desc, ks[i]);
    p[i] = ad_gpd_test(y, n_boot, derive_seed(seed, {ks[i]}), radii_desc[ks[i]]).p_value;
  }
  return select_k_u(radii_desc, ks, p, alpha_level);
}

}  // namespace mrv
