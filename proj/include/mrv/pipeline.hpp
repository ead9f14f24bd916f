#pragma once

// Batch orchestration behind the command-line tool: ingestion, the full MRV
// run, the power study and standalone NNTS/SNNTS fitting. Each command writes
// its outputs into a directory.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrv/error.hpp"
#include "mrv/geometry.hpp"
#include "mrv/io.hpp"
#include "mrv/nnts.hpp"
#include "mrv/parallel.hpp"
#include "mrv/scan.hpp"
#include "mrv/sim.hpp"
#include "mrv/tail.hpp"

namespace mrv {

inline constexpr std::string_view kVersion = "1.0.0";

enum class Transform { None, LogReturns };

inline Transform parse_transform(const std::string& s) {
  if (s == "none") return Transform::None;
  if (s == "log-returns") return Transform::LogReturns;
  throw Error(ErrorKind::InvalidConfig, "unknown transform '" + s + "'");
}

struct DataMatrix {
  std::vector<std::string> columns;
  std::vector<Observation> rows;
};

/// Reads the selected columns (by header name, or 0-based index when no
/// header matches) of a CSV file; unselected columns are never parsed.
/// An empty selection takes every column.
inline DataMatrix cmd_ingest(const std::filesystem::path& path, const std::vector<std::string>& columns,
                             Transform transform) {
  const io::CsvTable t = io::read_csv(path);
  std::vector<std::size_t> idx;
  if (columns.empty()) {
    for (std::size_t i = 0; i < t.header.size(); ++i) idx.push_back(i);
  } else {
    for (const auto& name : columns) {
      auto it = std::find(t.header.begin(), t.header.end(), name);
      if (it != t.header.end()) {
        idx.push_back(static_cast<std::size_t>(it - t.header.begin()));
        continue;
      }
      std::size_t pos = 0;
      bool numeric = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) { return c >= '0' && c <= '9'; });
      if (numeric) pos = std::stoul(name);
      if (!numeric || pos >= t.header.size()) throw Error(ErrorKind::InvalidConfig, "unknown column '" + name + "'");
      idx.push_back(pos);
    }
  }
  DataMatrix out;
  for (auto i : idx) out.columns.push_back(t.header[i]);
  std::vector<Observation> raw;
  raw.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Observation row;
    for (auto c : idx) {
      const std::string cell = c < t.rows[r].size() ? t.rows[r][c] : std::string();
      auto v = io::parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        // row numbers count the header as row 1
        throw Error(ErrorKind::NonNumericCell, "row " + std::to_string(r + 2) + ", column '" + t.header[c] +
                                                   "': '" + cell + "'");
      }
      row.push_back(*v);
    }
    raw.push_back(std::move(row));
  }
  if (transform == Transform::None) {
    out.rows = std::move(raw);
    return out;
  }
  for (std::size_t r = 0; r < raw.size(); ++r) {
    for (std::size_t c = 0; c < idx.size(); ++c) {
      if (!(raw[r][c] > 0.0)) {
        throw Error(ErrorKind::NonPositivePrice,
                    "row " + std::to_string(r + 2) + ", column '" + out.columns[c] + "'");
      }
    }
  }
  for (std::size_t r = 1; r < raw.size(); ++r) {
    Observation row(idx.size());
    for (std::size_t c = 0; c < idx.size(); ++c) row[c] = std::log(raw[r][c]) - std::log(raw[r - 1][c]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::string data_csv(const DataMatrix& m) {
  std::ostringstream out;
  for (std::size_t c = 0; c < m.columns.size(); ++c) out << (c ? "," : "") << m.columns[c];
  out << '\n';
  for (const auto& row : m.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << io::format_double(row[c]);
    out << '\n';
  }
  return out.str();
}

struct RunConfig {
  std::filesystem::path input;
  std::vector<std::string> columns;
  Transform transform = Transform::None;
  std::size_t k_min = 30;
  std::size_t k_max = 300;
  std::vector<double> levels = kDefaultLevels;
  double select_level = 0.05;  // level used for k_u and k*
  std::size_t n_boot = kDefaultBootstrap;
  std::uint64_t seed = 0;
  int m_max = 8;
  KPolicy k_policy = KPolicy::HillStable;
  std::size_t manual_k = 0;
  std::filesystem::path out = ".";
  unsigned threads = default_threads();
};

inline KPolicy parse_k_policy(const std::string& s, std::size_t& manual_k) {
  if (s == "hill-stable") return KPolicy::HillStable;
  if (s == "largest" || s == "largest-admissible") return KPolicy::LargestAdmissible;
  if (s.rfind("manual:", 0) == 0) {
    const auto v = io::parse_double(s.substr(7));
    if (!v || *v < 1.0 || *v != std::floor(*v)) throw Error(ErrorKind::InvalidConfig, "bad manual k in '" + s + "'");
    manual_k = static_cast<std::size_t>(*v);
    return KPolicy::Manual;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown k policy '" + s + "'");
}

inline std::string to_string(KPolicy p, std::size_t manual_k) {
  switch (p) {
    case KPolicy::HillStable: return "hill-stable";
    case KPolicy::LargestAdmissible: return "largest-admissible";
    case KPolicy::Manual: return "manual:" + std::to_string(manual_k);
  }
  return "unknown";
}

inline void validate(const RunConfig& c, std::size_t n) {
  if (c.k_min < 30) throw Error(ErrorKind::InvalidConfig, "k_min must be >= 30");
  if (c.k_max < c.k_min) throw Error(ErrorKind::InvalidConfig, "k_max must be >= k_min");
  if (c.k_max >= n) {
    throw Error(ErrorKind::InvalidConfig,
                "k_max=" + std::to_string(c.k_max) + " must be below the sample size " + std::to_string(n));
  }
  if (c.levels.empty() || !std::is_sorted(c.levels.begin(), c.levels.end())) {
    throw Error(ErrorKind::InvalidConfig, "levels must be sorted ascending");
  }
  for (double l : c.levels) {
    if (!(l > 0.0 && l < 1.0)) throw Error(ErrorKind::InvalidConfig, "levels must lie in (0, 1)");
  }
  if (c.n_boot < 99) throw Error(ErrorKind::InvalidConfig, "n_boot must be >= 99");
  if (c.m_max < 0) throw Error(ErrorKind::InvalidConfig, "m_max must be >= 0");
}

struct MrvRunResult {
  KScanReport report;
  std::optional<ThresholdSelection> threshold;
  std::optional<FinalEstimate> estimate;
  std::size_t dropped_zero_rows = 0;
  io::json summary;
};

/// Full pipeline on an in-memory matrix. Rows with zero norm carry no
/// direction and are dropped before the polar transform.
inline MrvRunResult run_mrv(const std::vector<Observation>& data, const RunConfig& cfg) {
  MrvRunResult res;
  std::vector<Observation> rows;
  rows.reserve(data.size());
  for (const auto& r : data) {
    if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; })) {
      ++res.dropped_zero_rows;
    } else {
      rows.push_back(r);
    }
  }
  validate(cfg, rows.size());
  const PolarSample sample = polar_sample(rows);
  std::vector<std::size_t> ks;
  for (std::size_t k = cfg.k_min; k <= cfg.k_max; ++k) ks.push_back(k);
  ScanOptions so;
  so.n_boot = cfg.n_boot;
  so.seed = cfg.seed;
  so.threads = cfg.threads;
  so.levels = cfg.levels;
  res.report = mrv_scan(sample, ks, so);

  const auto radii = sample.radii_desc();
  std::vector<double> p_tail;
  for (const auto& r : res.report.records) p_tail.push_back(r.p_tail);
  try {
    res.threshold = select_k_u(radii, ks, p_tail, cfg.select_level);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoAdmissibleK) throw;
  }

  io::json summary;
  summary["n"] = rows.size();
  summary["d"] = sample.d;
  summary["dropped_zero_rows"] = res.dropped_zero_rows;
  summary["k_range"] = io::json::array({cfg.k_min, cfg.k_max});
  summary["seed"] = cfg.seed;
  summary["n_boot"] = cfg.n_boot;
  summary["k_policy"] = to_string(cfg.k_policy, cfg.manual_k);
  summary["select_level"] = cfg.select_level;
  io::json adm = io::json::array();
  for (std::size_t l = 0; l < res.report.levels.size(); ++l) {
    adm.push_back({{"level", res.report.levels[l]},
                   {"ranges", io::ranges_json(res.report.admissible[l], res.report.records)},
                   {"count", res.report.admissible[l].size()}});
  }
  summary["admissible"] = adm;
  if (res.threshold) {
    summary["k_u"] = res.threshold->k_u;
    summary["u"] = res.threshold->u;
    summary["evi_at_k_u"] = res.threshold->evi_at_ku;
  } else {
    summary["k_u"] = nullptr;
    summary["u"] = nullptr;
    summary["evi_at_k_u"] = nullptr;
  }

  std::optional<std::size_t> k_star;
  try {
    k_star = select_k_star(res.report, cfg.select_level, cfg.k_policy, cfg.manual_k);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoAdmissibleK) throw;
  }
  summary["k_star"] = nullptr;
  summary["evi_at_k_star"] = nullptr;
  summary["aic_M"] = nullptr;
  summary["bic_M"] = nullptr;
  summary["model"] = nullptr;
  if (k_star) {
    res.report.k_star = k_star;
    std::vector<int> ms;
    for (int m = 0; m <= cfg.m_max; ++m) ms.push_back(m);
    FitOptions fo;
    fo.seed = derive_seed(cfg.seed, {0x6e6e7473ULL});
    res.estimate = finalize(sample, *k_star, ms, fo);
    res.report.final_evi = res.estimate->hill.evi;
    summary["k_star"] = *k_star;
    summary["evi_at_k_star"] = res.estimate->hill.evi;
    summary["density_supported"] = res.estimate->density_supported;
    if (res.estimate->circle) {
      summary["aic_M"] = res.estimate->circle->best(Criterion::AIC).model.M;
      summary["bic_M"] = res.estimate->circle->best(Criterion::BIC).model.M;
      summary["model"] = "model.json";
    } else if (res.estimate->sphere) {
      const auto& a = res.estimate->sphere->best(Criterion::AIC).model;
      const auto& b = res.estimate->sphere->best(Criterion::BIC).model;
      summary["aic_M"] = io::json::array({a.M1, a.M2});
      summary["bic_M"] = io::json::array({b.M1, b.M2});
      summary["model"] = "model.json";
    }
  }
  res.summary = std::move(summary);
  return res;
}

/// Writes kscan.csv, summary.json and, when a density was fitted,
/// model.json (best BIC model, with the AIC model alongside) and
/// density_grid.csv.
inline MrvRunResult cmd_mrv(const RunConfig& cfg) {
  const DataMatrix m = cmd_ingest(cfg.input, cfg.columns, cfg.transform);
  MrvRunResult res = run_mrv(m.rows, cfg);
  res.summary["input"] = cfg.input.string();
  res.summary["columns"] = m.columns;
  std::filesystem::create_directories(cfg.out);
  io::write_text(cfg.out / "kscan.csv", io::kscan_csv(res.report));
  if (res.estimate && res.estimate->circle) {
    const auto& sel = *res.estimate->circle;
    io::json model = io::to_json(sel.best(Criterion::BIC).model);
    model["criterion"] = "bic";
    model["aic_model"] = io::to_json(sel.best(Criterion::AIC).model);
    io::write_text(cfg.out / "model.json", model.dump(2) + "\n");
    io::write_text(cfg.out / "density_grid.csv", io::nnts_grid_csv(sel.best(Criterion::BIC).model));
    io::write_text(cfg.out / "scores.csv", io::scores_csv(sel));
  } else if (res.estimate && res.estimate->sphere) {
    const auto& sel = *res.estimate->sphere;
    io::json model = io::to_json(sel.best(Criterion::BIC).model);
    model["criterion"] = "bic";
    model["aic_model"] = io::to_json(sel.best(Criterion::AIC).model);
    io::write_text(cfg.out / "model.json", model.dump(2) + "\n");
    io::write_text(cfg.out / "density_grid.csv", io::snnts_grid_csv(sel.best(Criterion::BIC).model));
    io::write_text(cfg.out / "scores.csv", io::scores_csv(sel));
  }
  io::write_text(cfg.out / "summary.json", res.summary.dump(2) + "\n");
  return res;
}

/// Writes power.csv and provenance.json.
inline PowerStudyResult cmd_power(const PowerStudyConfig& cfg, const std::filesystem::path& out, unsigned threads) {
  PowerStudyResult res = power_study(cfg, threads);
  std::filesystem::create_directories(out);
  io::write_text(out / "power.csv", io::power_csv(res));
  io::json prov;
  prov["version"] = kVersion;
  prov["seed"] = cfg.seed;
  prov["distribution"] = to_string(cfg.distribution);
  prov["dimension"] = cfg.dimension;
  prov["s"] = cfg.s;
  prov["nu"] = cfg.nu;
  prov["beta"] = cfg.beta;
  prov["replications"] = cfg.n_samples;
  prov["sample_size"] = cfg.sample_size;
  prov["k_values"] = cfg.k_values;
  prov["levels"] = cfg.levels;
  prov["n_boot"] = cfg.n_boot;
  prov["failed_replications"] = res.failed_replications;
  io::write_text(out / "provenance.json", prov.dump(2) + "\n");
  return res;
}

struct FitConfig {
  std::filesystem::path input;
  std::vector<std::string> columns;  // one column: circle; two: (theta1, theta2) on the sphere
  int m_max = 8;
  Criterion criterion = Criterion::BIC;
  std::uint64_t seed = 0;
  std::filesystem::path out = ".";
};

inline Criterion parse_criterion(const std::string& s) {
  if (s == "aic" || s == "AIC") return Criterion::AIC;
  if (s == "bic" || s == "BIC") return Criterion::BIC;
  throw Error(ErrorKind::InvalidConfig, "unknown criterion '" + s + "'");
}

/// Writes scores.csv, model.json (selected criterion), model_aic.json,
/// model_bic.json and density_grid.csv.
inline io::json cmd_fit(const FitConfig& cfg) {
  const DataMatrix m = cmd_ingest(cfg.input, cfg.columns, Transform::None);
  if (m.columns.empty() || m.columns.size() > 2) {
    throw Error(ErrorKind::InvalidConfig, "fit expects one (circle) or two (sphere) angle columns");
  }
  if (cfg.m_max < 0) throw Error(ErrorKind::InvalidConfig, "m_max must be >= 0");
  std::filesystem::create_directories(cfg.out);
  FitOptions fo;
  fo.seed = cfg.seed;
  io::json summary;
  summary["n"] = m.rows.size();
  summary["criterion"] = cfg.criterion == Criterion::AIC ? "aic" : "bic";
  if (m.columns.size() == 1) {
    std::vector<double> theta;
    for (const auto& r : m.rows) theta.push_back(wrap_two_pi(r[0]));
    std::vector<int> ms;
    for (int k = 0; k <= std::min(cfg.m_max, kMaxNntsOrder); ++k) {
      if (theta.size() >= static_cast<std::size_t>(2 * (k + 1))) ms.push_back(k);
    }
    if (ms.empty()) throw Error(ErrorKind::TooFewObservations, "too few angles");
    const auto sel = select_model(theta, ms, fo);
    io::write_text(cfg.out / "scores.csv", io::scores_csv(sel));
    io::write_text(cfg.out / "model.json", io::to_json(sel.best(cfg.criterion).model).dump(2) + "\n");
    io::write_text(cfg.out / "model_aic.json", io::to_json(sel.best(Criterion::AIC).model).dump(2) + "\n");
    io::write_text(cfg.out / "model_bic.json", io::to_json(sel.best(Criterion::BIC).model).dump(2) + "\n");
    io::write_text(cfg.out / "density_grid.csv", io::nnts_grid_csv(sel.best(cfg.criterion).model));
    summary["aic_M"] = sel.best(Criterion::AIC).model.M;
    summary["bic_M"] = sel.best(Criterion::BIC).model.M;
  } else {
    std::vector<double> t1, t2;
    for (const auto& r : m.rows) {
      double a = wrap_two_pi(r[0]);
      if (a < kBoundaryNudge) a = kBoundaryNudge;
      t1.push_back(a);
      t2.push_back(std::clamp(r[1], kBoundaryNudge, std::numbers::pi - kBoundaryNudge));
    }
    std::vector<int> ms;
    for (int k = 0; k <= cfg.m_max; ++k) ms.push_back(k);
    const auto pairs = snnts_candidates(ms, t1.size());
    if (pairs.empty()) throw Error(ErrorKind::TooFewObservations, "too few points");
    const auto sel = select_snnts_model(t1, t2, pairs, fo);
    io::write_text(cfg.out / "scores.csv", io::scores_csv(sel));
    io::write_text(cfg.out / "model.json", io::to_json(sel.best(cfg.criterion).model).dump(2) + "\n");
    io::write_text(cfg.out / "model_aic.json", io::to_json(sel.best(Criterion::AIC).model).dump(2) + "\n");
    io::write_text(cfg.out / "model_bic.json", io::to_json(sel.best(Criterion::BIC).model).dump(2) + "\n");
    io::write_text(cfg.out / "density_grid.csv", io::snnts_grid_csv(sel.best(cfg.criterion).model));
    const auto& a = sel.best(Criterion::AIC).model;
    const auto& b = sel.best(Criterion::BIC).model;
    summary["aic_M"] = io::json::array({a.M1, a.M2});
    summary["bic_M"] = io::json::array({b.M1, b.M2});
  }
  io::write_text(cfg.out / "fit_summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace mrv
