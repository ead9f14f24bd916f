#pragma once

// Samplers for the elliptical (MRV) and independent-Pareto (non-MRV)
// alternatives, and the Monte-Carlo rejection-count study.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mrv/error.hpp"
#include "mrv/geometry.hpp"
#include "mrv/parallel.hpp"
#include "mrv/random.hpp"
#include "mrv/scan.hpp"

namespace mrv {

/// Unit diagonal, s on the first off-diagonal, zero elsewhere.
inline Eigen::MatrixXd banded_correlation(std::size_t dimension, double s) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dimension),
                                                static_cast<Eigen::Index>(dimension));
  for (Eigen::Index i = 0; i + 1 < c.rows(); ++i) {
    c(i, i + 1) = s;
    c(i + 1, i) = s;
  }
  return c;
}

/// Lower Cholesky factor; throws NotPositiveDefinite.
inline Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& corr) {
  if (corr.rows() != corr.cols() || corr.rows() < 2) {
    throw Error(ErrorKind::NotPositiveDefinite, "correlation matrix must be square with dimension >= 2");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPositiveDefinite, "correlation matrix");
  Eigen::MatrixXd l = llt.matrixL();
  if (!l.allFinite() || (l.diagonal().array() <= 0.0).any()) {
    throw Error(ErrorKind::NotPositiveDefinite, "correlation matrix");
  }
  return l;
}

/// Multivariate t: X = Z sqrt(nu / W), Z ~ N(0, corr), W ~ chi^2_nu drawn as
/// Gamma(nu/2, 2) so that non-integer nu is allowed.
inline std::vector<Observation> sample_mvt(std::size_t n, const Eigen::MatrixXd& corr, double nu, std::uint64_t seed) {
  if (!(nu > 0.0)) throw Error(ErrorKind::InvalidConfig, "nu must be positive");
  const Eigen::MatrixXd l = cholesky_factor(corr);
  const auto d = l.rows();
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> chi2(0.5 * nu, 2.0);
  std::vector<Observation> out(n, Observation(static_cast<std::size_t>(d)));
  Eigen::VectorXd z(d);
  for (auto& row : out) {
    for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
    const Eigen::VectorXd x = l * z;
    double w = chi2(rng);
    while (!(w > 0.0)) w = chi2(rng);
    const double scale = std::sqrt(nu / w);
    for (Eigen::Index j = 0; j < d; ++j) row[static_cast<std::size_t>(j)] = x(j) * scale;
  }
  return out;
}

inline std::vector<Observation> sample_cauchy(std::size_t n, const Eigen::MatrixXd& corr, std::uint64_t seed) {
  return sample_mvt(n, corr, 1.0, seed);
}

/// Independent components with survival x^{-beta} on [1, inf).
inline std::vector<Observation> sample_pareto_indep(std::size_t n, std::size_t dimension, double beta,
                                                    std::uint64_t seed) {
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidConfig, "beta must be positive");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Observation> out(n, Observation(dimension));
  for (auto& row : out) {
    for (auto& v : row) v = std::pow(1.0 - unif(rng), -1.0 / beta);
  }
  return out;
}

enum class Distribution { StudentT, Cauchy, ParetoIndep };

inline std::string to_string(Distribution d) {
  switch (d) {
    case Distribution::StudentT: return "t";
    case Distribution::Cauchy: return "cauchy";
    case Distribution::ParetoIndep: return "pareto-indep";
  }
  return "unknown";
}

inline Distribution parse_distribution(const std::string& s) {
  if (s == "t" || s == "student-t") return Distribution::StudentT;
  if (s == "cauchy") return Distribution::Cauchy;
  if (s == "pareto-indep" || s == "pareto") return Distribution::ParetoIndep;
  throw Error(ErrorKind::InvalidConfig, "unknown distribution '" + s + "'");
}

struct PowerStudyConfig {
  Distribution distribution = Distribution::StudentT;
  std::size_t dimension = 3;
  double s = 0.0;
  double nu = 2.0;
  double beta = 1.0;
  std::size_t n_samples = 1000;  // replications
  std::size_t sample_size = 1000;
  std::vector<std::size_t> k_values{250, 300, 350, 400, 450, 500};
  std::vector<double> levels{0.10, 0.05, 0.01};
  std::size_t n_boot = kDefaultBootstrap;
  std::uint64_t seed = 0;
};

struct PowerStudyResult {
  PowerStudyConfig config;
  std::vector<std::vector<std::size_t>> rejections;  // [level][k]
  std::size_t failed_replications = 0;
};

inline void validate(const PowerStudyConfig& c) {
  if (c.dimension < 2) throw Error(ErrorKind::InvalidConfig, "dimension must be >= 2");
  if (c.k_values.empty() || c.levels.empty()) throw Error(ErrorKind::InvalidConfig, "k values and levels required");
  for (auto k : c.k_values) {
    if (k < kMinExceedances || k >= c.sample_size) {
      throw Error(ErrorKind::InvalidConfig, "k=" + std::to_string(k) + " outside [10, sample_size)");
    }
  }
  if (c.distribution != Distribution::ParetoIndep) cholesky_factor(banded_correlation(c.dimension, c.s));
}

inline std::vector<Observation> simulate(const PowerStudyConfig& c, std::uint64_t seed) {
  switch (c.distribution) {
    case Distribution::StudentT: return sample_mvt(c.sample_size, banded_correlation(c.dimension, c.s), c.nu, seed);
    case Distribution::Cauchy: return sample_cauchy(c.sample_size, banded_correlation(c.dimension, c.s), seed);
    case Distribution::ParetoIndep: return sample_pareto_indep(c.sample_size, c.dimension, c.beta, seed);
  }
  return {};
}

/// Counts replications whose Bonferroni joint p-value is <= each level.
/// Replication r draws from substream (seed, r); the bootstrap at k inside it
/// from (replication seed, k).
inline PowerStudyResult power_study(const PowerStudyConfig& config, unsigned threads = 1) {
  validate(config);
  const std::size_t nk = config.k_values.size();
  std::vector<std::vector<double>> p(config.n_samples, std::vector<double>(nk, 1.0));
  std::vector<char> failed(config.n_samples, 0);
  parallel_for(config.n_samples, threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(config.seed, {r});
    try {
      const auto data = simulate(config, rep_seed);
      const auto sample = polar_sample(data);
      const auto radii = sample.radii_desc();
      for (std::size_t j = 0; j < nk; ++j) {
        const std::size_t k = config.k_values[j];
        p[r][j] = evaluate_k(sample, radii, k, config.n_boot, derive_seed(rep_seed, {k})).p_joint_bonferroni;
      }
    } catch (const Error&) {
      failed[r] = 1;
    }
  });
  PowerStudyResult res;
  res.config = config;
  res.rejections.assign(config.levels.size(), std::vector<std::size_t>(nk, 0));
  for (std::size_t r = 0; r < config.n_samples; ++r) {
    if (failed[r]) {
      ++res.failed_replications;
      continue;
    }
    for (std::size_t l = 0; l < config.levels.size(); ++l) {
      for (std::size_t j = 0; j < nk; ++j) {
        if (p[r][j] <= config.levels[l]) ++res.rejections[l][j];
      }
    }
  }
  return res;
}

}  // namespace mrv
