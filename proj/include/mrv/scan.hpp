#pragma once

// Joint MRV test over a range of top-k subsets: Pareto-tail test on the
// radial exceedances plus radius/angle pairwise independence tests, combined
// by Bonferroni; k* selection and final spectral density / EVI estimation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrv/circular.hpp"
#include "mrv/error.hpp"
#include "mrv/geometry.hpp"
#include "mrv/nnts.hpp"
#include "mrv/parallel.hpp"
#include "mrv/random.hpp"
#include "mrv/tail.hpp"

namespace mrv {

struct KRecord {
  std::size_t k = 0;
  double p_tail = 0.0;
  bool tail_failed = false;
  std::vector<double> p_sum;   // one per angle
  std::vector<double> p_diff;  // one per angle
  double p_indep_bonferroni = 1.0;
  double p_joint_bonferroni = 1.0;
  double hill_evi = std::numeric_limits<double>::quiet_NaN();

  /// Sums then differences.
  std::vector<double> p_pairs() const {
    std::vector<double> out(p_sum);
    out.insert(out.end(), p_diff.begin(), p_diff.end());
    return out;
  }
};

inline const std::vector<double> kDefaultLevels{0.01, 0.05, 0.10};

struct KScanReport {
  std::size_t d = 0;
  std::vector<KRecord> records;                   // ascending k
  std::vector<double> levels;                     // ascending
  std::vector<std::vector<std::size_t>> admissible;  // per level: k with p_joint > level
  std::optional<std::size_t> k_star;
  double final_evi = std::numeric_limits<double>::quiet_NaN();

  const std::vector<std::size_t>& admissible_at(double level) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (std::abs(levels[i] - level) < 1e-12) return admissible[i];
    }
    throw Error(ErrorKind::InvalidConfig, "level " + std::to_string(level) + " was not scanned");
  }
};

struct ScanOptions {
  std::size_t n_boot = kDefaultBootstrap;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<double> levels = kDefaultLevels;
};

/// Bonferroni-combined p-values from the pairwise and tail p-values.
inline void combine_bonferroni(KRecord& rec) {
  const auto pairs = rec.p_pairs();
  const double m = static_cast<double>(pairs.size());
  const double min_pair = pairs.empty() ? 1.0 : *std::min_element(pairs.begin(), pairs.end());
  rec.p_indep_bonferroni = std::min(1.0, m * min_pair);
  rec.p_joint_bonferroni = std::min(1.0, (m + 1.0) * std::min(min_pair, rec.p_tail));
}

/// Joint test on the k observations with the largest radius. The tail test
/// uses exceedances over the (k+1)-th largest radius; the APITs are ranks
/// within the top-k subset.
inline KRecord evaluate_k(const PolarSample& sample, std::span<const double> radii_desc, std::size_t k,
                          std::size_t n_boot, std::uint64_t seed) {
  if (k + 1 > sample.size()) throw Error(ErrorKind::InvalidConfig, "k must be below the sample size");
  KRecord rec;
  rec.k = k;
  try {
    const auto y = top_k_exceedances(radii_desc, k);
    rec.p_tail = ad_gpd_test(y, n_boot, seed, radii_desc[k]).p_value;
  } catch (const Error&) {
    rec.p_tail = 0.0;
    rec.tail_failed = true;
  }
  const std::span<const double> top(radii_desc.data(), k);
  for (std::size_t j = 0; j + 1 < sample.d; ++j) {
    const auto angle = sample.angle_desc(j, k);
    const auto res = pairwise_independence(top, angle);
    rec.p_sum.push_back(res.p_sum);
    rec.p_diff.push_back(res.p_diff);
  }
  try {
    rec.hill_evi = hill(radii_desc, k).evi;
  } catch (const Error&) {
  }
  combine_bonferroni(rec);
  return rec;
}

inline void fill_admissible(KScanReport& report) {
  report.admissible.assign(report.levels.size(), {});
  for (std::size_t l = 0; l < report.levels.size(); ++l) {
    for (const auto& r : report.records) {
      if (r.p_joint_bonferroni > report.levels[l]) report.admissible[l].push_back(r.k);
    }
  }
}

/// Evaluates every k in `ks`; substream for k is derived from (seed, k), so
/// the report does not depend on the thread count or on the input row order.
inline KScanReport mrv_scan(const PolarSample& sample, std::span<const std::size_t> ks, const ScanOptions& opts = {}) {
  if (sample.d < 2) throw Error(ErrorKind::InvalidConfig, "dimension must be >= 2");
  if (ks.empty()) throw Error(ErrorKind::InvalidConfig, "empty k range");
  std::vector<std::size_t> sorted(ks.begin(), ks.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.back() >= sample.size()) {
    throw Error(ErrorKind::InvalidConfig, "max k must be below the sample size " + std::to_string(sample.size()));
  }
  std::vector<double> levels = opts.levels;
  std::sort(levels.begin(), levels.end());

  const auto radii = sample.radii_desc();
  KScanReport report;
  report.d = sample.d;
  report.levels = levels;
  report.records.resize(sorted.size());
  parallel_for(sorted.size(), opts.threads, [&](std::size_t i) {
    report.records[i] = evaluate_k(sample, radii, sorted[i], opts.n_boot, derive_seed(opts.seed, {sorted[i]}));
  });
  fill_admissible(report);
  return report;
}

enum class KPolicy { LargestAdmissible, Manual, HillStable };

/// Picks k* among the ks admissible at `alpha_level`.
inline std::size_t select_k_star(const KScanReport& report, double alpha_level, KPolicy policy,
                                 std::size_t manual_k = 0) {
  std::vector<bool> admissible(report.records.size());
  std::vector<double> evi(report.records.size());
  bool any = false;
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    admissible[i] = report.records[i].p_joint_bonferroni > alpha_level;
    evi[i] = report.records[i].hill_evi;
    any = any || admissible[i];
  }
  if (!any) throw Error(ErrorKind::NoAdmissibleK, "the joint test rejects at every scanned k");
  switch (policy) {
    case KPolicy::Manual:
      for (std::size_t i = 0; i < report.records.size(); ++i) {
        if (report.records[i].k == manual_k) {
          if (admissible[i]) return manual_k;
          break;
        }
      }
      throw Error(ErrorKind::ManualKNotAdmissible, "k=" + std::to_string(manual_k));
    case KPolicy::LargestAdmissible:
      for (std::size_t i = report.records.size(); i-- > 0;) {
        if (admissible[i]) return report.records[i].k;
      }
      break;
    case KPolicy::HillStable:
      for (auto& v : evi) {
        if (!std::isfinite(v)) v = 0.0;
      }
      if (auto idx = most_stable_index(evi, admissible)) return report.records[*idx].k;
      break;
  }
  throw Error(ErrorKind::NoAdmissibleK, "no admissible k");
}

inline constexpr double kBoundaryNudge = 1e-12;

/// Spherical angles for the SNNTS fit of trivariate data: azimuth from the
/// last polar angle, inclination from the first, nudged off the endpoints.
inline SphericalAngles snnts_angles(const PolarSample& sample, std::size_t k) {
  if (sample.d != 3) throw Error(ErrorKind::InvalidConfig, "spherical angles need d = 3");
  SphericalAngles out;
  out.theta1 = sample.angle_desc(1, k);
  out.theta2 = sample.angle_desc(0, k);
  for (auto& t : out.theta1) {
    if (t < kBoundaryNudge) t = kBoundaryNudge;
  }
  for (auto& t : out.theta2) t = std::clamp(t, kBoundaryNudge, std::numbers::pi - kBoundaryNudge);
  return out;
}

struct FinalEstimate {
  std::size_t k_star = 0;
  HillEstimate hill;
  std::optional<ModelSelection<NntsModel>> circle;   // d = 2
  std::optional<ModelSelection<SnntsModel>> sphere;  // d = 3
  bool density_supported = true;                     // false for d > 3
};

/// Order pairs (M1, M2) over the candidate grid that the sample size can
/// support.
inline std::vector<std::pair<int, int>> snnts_candidates(std::span<const int> M_candidates, std::size_t n) {
  std::vector<std::pair<int, int>> out;
  for (int a : M_candidates) {
    for (int b : M_candidates) {
      if (a < 0 || b < 0 || a > kMaxSnntsOrder || b > kMaxSnntsOrder) continue;
      if (n < static_cast<std::size_t>(2 * (a + 1) * (b + 1))) continue;
      out.emplace_back(a, b);
    }
  }
  return out;
}

inline FinalEstimate finalize(const PolarSample& sample, std::size_t k_star, std::span<const int> M_candidates,
                              const FitOptions& opts = {}) {
  if (k_star < 2 || k_star > sample.size()) throw Error(ErrorKind::InvalidConfig, "k* outside the data");
  FinalEstimate out;
  out.k_star = k_star;
  const auto radii = sample.radii_desc();
  out.hill = hill(radii, k_star);
  if (sample.d == 2) {
    std::vector<int> ms;
    for (int m : M_candidates) {
      if (m >= 0 && m <= kMaxNntsOrder && k_star >= static_cast<std::size_t>(2 * (m + 1))) ms.push_back(m);
    }
    if (ms.empty()) throw Error(ErrorKind::TooFewObservations, "no candidate order fits k* observations");
    out.circle = select_model(sample.angle_desc(0, k_star), ms, opts);
  } else if (sample.d == 3) {
    const auto pairs = snnts_candidates(M_candidates, k_star);
    if (pairs.empty()) throw Error(ErrorKind::TooFewObservations, "no candidate order fits k* observations");
    const auto ang = snnts_angles(sample, k_star);
    out.sphere = select_snnts_model(ang.theta1, ang.theta2, pairs, opts);
  } else {
    out.density_supported = false;
  }
  return out;
}

}  // namespace mrv
