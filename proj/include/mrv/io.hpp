#pragma once

// File formats: CSV tables (k-scan, power study, density grids, score
// tables), JSON models and summaries. Doubles are written in shortest
// round-trip form so re-reading reproduces them bit for bit.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mrv/error.hpp"
#include "mrv/nnts.hpp"
#include "mrv/scan.hpp"
#include "mrv/sim.hpp"

namespace mrv::io {

using json = nlohmann::json;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline double require_double(std::string_view s, const std::string& where) {
  auto v = parse_double(s);
  if (!v) throw Error(ErrorKind::ParseError, "not a number at " + where + ": '" + std::string(s) + "'");
  return *v;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorKind::ParseError, "missing column '" + std::string(name) + "'");
  }
};

/// Splits one CSV line; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw Error(ErrorKind::ParseError, "CSV has no header row");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, path.string());
  return parse_csv(in);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::FileNotFound, "cannot write " + path.string());
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Models

inline json coefficients_to_json(const std::vector<Complex>& c) {
  json arr = json::array();
  for (const auto& z : c) arr.push_back(json::array({z.real(), z.imag()}));
  return arr;
}

inline std::vector<Complex> coefficients_from_json(const json& arr) {
  std::vector<Complex> c;
  for (const auto& pair : arr) c.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
  return c;
}

inline json to_json(const NntsModel& m) {
  return json{{"type", "nnts"}, {"M", m.M}, {"coefficients", coefficients_to_json(m.c)}};
}

/// Coefficients are row-major: k1 outer, k2 inner.
inline json to_json(const SnntsModel& m) {
  return json{{"type", "snnts"}, {"M", json::array({m.M1, m.M2})}, {"coefficients", coefficients_to_json(m.c)}};
}

using AnyModel = std::variant<NntsModel, SnntsModel>;

inline AnyModel model_from_json(const json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "nnts") {
      NntsModel m;
      m.M = j.at("M").get<int>();
      m.c = coefficients_from_json(j.at("coefficients"));
      if (m.c.size() != static_cast<std::size_t>(m.M + 1)) throw Error(ErrorKind::InvalidModel, "coefficient count");
      return m;
    }
    if (type == "snnts") {
      SnntsModel m;
      m.M1 = j.at("M").at(0).get<int>();
      m.M2 = j.at("M").at(1).get<int>();
      m.c = coefficients_from_json(j.at("coefficients"));
      if (m.c.size() != static_cast<std::size_t>((m.M1 + 1) * (m.M2 + 1))) {
        throw Error(ErrorKind::InvalidModel, "coefficient count");
      }
      return m;
    }
    throw Error(ErrorKind::InvalidModel, "unknown model type '" + type + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

// ---------------------------------------------------------------------------
// k-scan report

inline std::string kscan_csv(const KScanReport& r) {
  std::ostringstream out;
  const std::size_t a = r.d - 1;
  out << "k,p_tail";
  for (std::size_t j = 1; j <= a; ++j) out << ",p_sum_" << j;
  for (std::size_t j = 1; j <= a; ++j) out << ",p_diff_" << j;
  out << ",p_indep_bonf,p_joint_bonf,hill_evi\n";
  for (const auto& rec : r.records) {
    out << rec.k << ',' << format_double(rec.p_tail);
    for (double p : rec.p_sum) out << ',' << format_double(p);
    for (double p : rec.p_diff) out << ',' << format_double(p);
    out << ',' << format_double(rec.p_indep_bonferroni) << ',' << format_double(rec.p_joint_bonferroni) << ','
        << format_double(rec.hill_evi) << '\n';
  }
  return out.str();
}

/// Rebuilds the per-k records; admissible sets are recomputed for `levels`.
inline KScanReport parse_kscan_csv(std::istream& in, const std::vector<double>& levels = kDefaultLevels) {
  const CsvTable t = parse_csv(in);
  if (t.header.size() < 6 || (t.header.size() - 5) % 2 != 0) throw Error(ErrorKind::ParseError, "kscan header");
  const std::size_t a = (t.header.size() - 5) / 2;
  KScanReport r;
  r.d = a + 1;
  r.levels = levels;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() != t.header.size()) throw Error(ErrorKind::ParseError, "kscan row " + std::to_string(i + 1));
    const std::string where = "kscan row " + std::to_string(i + 1);
    KRecord rec;
    rec.k = static_cast<std::size_t>(require_double(row[0], where));
    rec.p_tail = require_double(row[1], where);
    for (std::size_t j = 0; j < a; ++j) rec.p_sum.push_back(require_double(row[2 + j], where));
    for (std::size_t j = 0; j < a; ++j) rec.p_diff.push_back(require_double(row[2 + a + j], where));
    rec.p_indep_bonferroni = require_double(row[2 + 2 * a], where);
    rec.p_joint_bonferroni = require_double(row[3 + 2 * a], where);
    rec.hill_evi = require_double(row[4 + 2 * a], where);
    r.records.push_back(std::move(rec));
  }
  fill_admissible(r);
  return r;
}

/// Contiguous runs of consecutive scanned k values, as [first, last] pairs.
inline json ranges_json(const std::vector<std::size_t>& ks, const std::vector<KRecord>& records) {
  json out = json::array();
  std::size_t pos = 0;
  std::vector<std::size_t> all;
  for (const auto& r : records) all.push_back(r.k);
  std::size_t i = 0;
  while (i < ks.size()) {
    std::size_t j = i;
    while (pos < all.size() && all[pos] != ks[i]) ++pos;
    std::size_t p = pos;
    while (j + 1 < ks.size() && p + 1 < all.size() && all[p + 1] == ks[j + 1]) {
      ++j;
      ++p;
    }
    out.push_back(json::array({ks[i], ks[j]}));
    pos = p;
    i = j + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Power study, laid out like the published table: one row per level, one
// column per k.

inline std::string power_csv(const PowerStudyResult& r) {
  const auto& c = r.config;
  std::ostringstream params;
  params << "d=" << c.dimension;
  if (c.distribution == Distribution::ParetoIndep) {
    params << " beta=" << format_double(c.beta);
  } else {
    params << " s=" << format_double(c.s);
    if (c.distribution == Distribution::StudentT) params << " nu=" << format_double(c.nu);
  }
  std::ostringstream out;
  out << "distribution,params,level";
  for (auto k : c.k_values) out << ",k_" << k;
  out << '\n';
  for (std::size_t l = 0; l < c.levels.size(); ++l) {
    out << to_string(c.distribution) << ',' << params.str() << ',' << format_double(c.levels[l]);
    for (auto v : r.rejections[l]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

struct PowerTable {
  std::string distribution;
  std::string params;
  std::vector<std::size_t> k_values;
  std::vector<double> levels;
  std::vector<std::vector<std::size_t>> rejections;
};

inline PowerTable parse_power_csv(std::istream& in) {
  const CsvTable t = parse_csv(in);
  PowerTable p;
  for (std::size_t j = 3; j < t.header.size(); ++j) {
    if (t.header[j].rfind("k_", 0) != 0) throw Error(ErrorKind::ParseError, "power header");
    p.k_values.push_back(static_cast<std::size_t>(require_double(t.header[j].substr(2), "power header")));
  }
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw Error(ErrorKind::ParseError, "power row width");
    p.distribution = row[0];
    p.params = row[1];
    p.levels.push_back(require_double(row[2], "power level"));
    std::vector<std::size_t> counts;
    for (std::size_t j = 3; j < row.size(); ++j) {
      counts.push_back(static_cast<std::size_t>(require_double(row[j], "power count")));
    }
    p.rejections.push_back(std::move(counts));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Density grids and score tables

inline constexpr std::size_t kCircleGrid = 512;
inline constexpr std::size_t kSphereGrid = 64;

inline std::string nnts_grid_csv(const NntsModel& m, std::size_t points = kCircleGrid) {
  std::ostringstream out;
  out << "theta,density\n";
  for (std::size_t i = 0; i < points; ++i) {
    const double th = kTwoPi * static_cast<double>(i) / static_cast<double>(points);
    out << format_double(th) << ',' << format_double(nnts_density(m, th)) << '\n';
  }
  return out.str();
}

/// Cell-centred grid: theta1 over (0, 2pi], theta2 over (0, pi).
inline std::string snnts_grid_csv(const SnntsModel& m, std::size_t points = kSphereGrid) {
  std::ostringstream out;
  out << "theta1,theta2,density\n";
  for (std::size_t i = 0; i < points; ++i) {
    const double t1 = kTwoPi * (static_cast<double>(i) + 0.5) / static_cast<double>(points);
    for (std::size_t j = 0; j < points; ++j) {
      const double t2 = std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(points);
      out << format_double(t1) << ',' << format_double(t2) << ',' << format_double(snnts_density(m, t1, t2)) << '\n';
    }
  }
  return out.str();
}

inline std::string scores_csv(const ModelSelection<NntsModel>& sel) {
  std::ostringstream out;
  out << "M,loglik,aic,bic,iterations,converged\n";
  for (const auto& f : sel.fits) {
    out << f.model.M << ',' << format_double(f.loglik) << ',' << format_double(f.aic) << ',' << format_double(f.bic)
        << ',' << f.iterations << ',' << (f.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

inline std::string scores_csv(const ModelSelection<SnntsModel>& sel) {
  std::ostringstream out;
  out << "M1,M2,loglik,aic,bic,iterations,converged\n";
  for (const auto& f : sel.fits) {
    out << f.model.M1 << ',' << f.model.M2 << ',' << format_double(f.loglik) << ',' << format_double(f.aic) << ','
        << format_double(f.bic) << ',' << f.iterations << ',' << (f.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace mrv::io
