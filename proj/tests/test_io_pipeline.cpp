#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mrv/mrv.hpp"

using namespace mrv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mrv_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

fs::path write_rows(const fs::path& dir, const std::vector<Observation>& rows, const std::string& header) {
  std::ostringstream s;
  s << header << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) s << (j ? "," : "") << io::format_double(r[j]);
    s << '\n';
  }
  const fs::path p = dir / "data.csv";
  write_file(p, s.str());
  return p;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(Format, DoubleRoundTripIsExact) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  int checked = 0;
  while (checked < 20000) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    ++checked;
    const auto back = io::parse_double(io::format_double(v));
    ASSERT_TRUE(back);
    ASSERT_TRUE(same_bits(*back, v)) << io::format_double(v);
  }
  EXPECT_FALSE(io::parse_double("abc"));
  EXPECT_FALSE(io::parse_double("1.5x"));
  EXPECT_FALSE(io::parse_double(""));
}

TEST(Csv, QuotedFields) {
  EXPECT_EQ(io::split_csv_line("a,\"b,c\",d"), (std::vector<std::string>{"a", "b,c", "d"}));
  EXPECT_EQ(io::split_csv_line("\"x\"\"y\",2"), (std::vector<std::string>{"x\"y", "2"}));
}

TEST(ModelJson, RoundTripIsBitExact) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<Complex> c(4);
  for (auto& z : c) z = Complex(g(rng), g(rng));
  const auto m = normalize_nnts(c);
  const auto j = io::json::parse(io::to_json(m).dump());
  const auto back = std::get<NntsModel>(io::model_from_json(j));
  EXPECT_EQ(back.M, m.M);
  for (std::size_t i = 0; i < m.c.size(); ++i) {
    EXPECT_TRUE(same_bits(back.c[i].real(), m.c[i].real()));
    EXPECT_TRUE(same_bits(back.c[i].imag(), m.c[i].imag()));
  }

  std::vector<Complex> d(6);
  for (auto& z : d) z = Complex(g(rng), g(rng));
  const auto s = normalize_snnts(1, 2, d);
  const auto sj = io::json::parse(io::to_json(s).dump());
  EXPECT_EQ(sj["M"], io::json::array({1, 2}));
  const auto sback = std::get<SnntsModel>(io::model_from_json(sj));
  EXPECT_EQ(sback.M1, 1);
  EXPECT_EQ(sback.M2, 2);
  EXPECT_EQ(sback.c, s.c);
  // row-major: entry (k1=1, k2=0) sits at index 3
  EXPECT_EQ(sj["coefficients"][3][0].get<double>(), s.at(1, 0).real());

  EXPECT_THROW(io::model_from_json(io::json{{"type", "other"}}), Error);
  EXPECT_THROW(io::model_from_json(io::json{{"type", "nnts"}, {"M", 2}, {"coefficients", io::json::array()}}), Error);
}

TEST(KscanCsv, RoundTrip) {
  const auto data = sample_mvt(300, banded_correlation(3, 0.1), 2.0, 3);
  ScanOptions o;
  o.n_boot = 99;
  const std::vector<std::size_t> ks{30, 60, 90, 120};
  const auto rep = mrv_scan(polar_sample(data), ks, o);
  const std::string text = io::kscan_csv(rep);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "k,p_tail,p_sum_1,p_sum_2,p_diff_1,p_diff_2,p_indep_bonf,p_joint_bonf,hill_evi");
  std::istringstream in(text);
  const auto back = io::parse_kscan_csv(in);
  ASSERT_EQ(back.records.size(), rep.records.size());
  EXPECT_EQ(back.d, 3u);
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    EXPECT_EQ(back.records[i].k, rep.records[i].k);
    EXPECT_EQ(back.records[i].p_tail, rep.records[i].p_tail);
    EXPECT_EQ(back.records[i].p_sum, rep.records[i].p_sum);
    EXPECT_EQ(back.records[i].p_diff, rep.records[i].p_diff);
    EXPECT_EQ(back.records[i].p_indep_bonferroni, rep.records[i].p_indep_bonferroni);
    EXPECT_EQ(back.records[i].p_joint_bonferroni, rep.records[i].p_joint_bonferroni);
    EXPECT_EQ(back.records[i].hill_evi, rep.records[i].hill_evi);
  }
  EXPECT_EQ(back.admissible, rep.admissible);
}

TEST(Ranges, ContiguousRuns) {
  std::vector<KRecord> recs;
  for (std::size_t k : {30, 31, 32, 33, 34, 35}) {
    KRecord r;
    r.k = k;
    recs.push_back(r);
  }
  const auto j = io::ranges_json({30, 31, 33, 34, 35}, recs);
  EXPECT_EQ(j, io::json::parse("[[30,31],[33,35]]"));
}

TEST(PowerCsv, RoundTrip) {
  PowerStudyResult r;
  r.config.k_values = {250, 300};
  r.config.levels = {0.1, 0.05, 0.01};
  r.rejections = {{9, 8}, {5, 4}, {1, 0}};
  std::istringstream in(io::power_csv(r));
  const auto t = io::parse_power_csv(in);
  EXPECT_EQ(t.distribution, "t");
  EXPECT_EQ(t.params, "d=3 s=0 nu=2");
  EXPECT_EQ(t.k_values, r.config.k_values);
  EXPECT_EQ(t.levels, r.config.levels);
  EXPECT_EQ(t.rejections, r.rejections);
}

TEST(Grids, Sizes) {
  NntsModel m;
  const auto circle = io::nnts_grid_csv(m);
  EXPECT_EQ(std::count(circle.begin(), circle.end(), '\n'), 513);
  SnntsModel s;
  const auto sphere = io::snnts_grid_csv(s);
  EXPECT_EQ(std::count(sphere.begin(), sphere.end(), '\n'), 64 * 64 + 1);
}

TEST(Ingest, LogReturns) {
  const auto dir = scratch("ingest");
  write_file(dir / "p.csv", "date,A,B\n2020-01-01,100,50\n2020-01-02,110,25\n");
  const auto m = cmd_ingest(dir / "p.csv", {"A", "B"}, Transform::LogReturns);
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_NEAR(m.rows[0][0], std::log(1.1), 1e-15);
  EXPECT_NEAR(m.rows[0][0], 0.09531, 1e-5);
  EXPECT_NEAR(m.rows[0][1], std::log(0.5), 1e-15);
  const auto by_index = cmd_ingest(dir / "p.csv", {"2", "1"}, Transform::None);
  EXPECT_EQ(by_index.columns, (std::vector<std::string>{"B", "A"}));
  EXPECT_EQ(by_index.rows[1], (Observation{25, 110}));
}

TEST(Ingest, Errors) {
  const auto dir = scratch("ingest_err");
  write_file(dir / "t.csv", "A,B\n1,2\n3,oops\n");
  try {
    cmd_ingest(dir / "t.csv", {"A", "B"}, Transform::None);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonNumericCell);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("'B'"), std::string::npos);
  }
  EXPECT_NO_THROW(cmd_ingest(dir / "t.csv", {"A"}, Transform::None));
  write_file(dir / "z.csv", "A\n1\n0\n");
  try {
    cmd_ingest(dir / "z.csv", {"A"}, Transform::LogReturns);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositivePrice);
  }
  try {
    cmd_ingest(dir / "missing.csv", {}, Transform::None);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FileNotFound);
  }
  EXPECT_THROW(cmd_ingest(dir / "t.csv", {"C"}, Transform::None), Error);
}

TEST(Ingest, DataCsvRoundTrip) {
  const auto dir = scratch("roundtrip");
  const auto rows = sample_cauchy(50, banded_correlation(2, 0.0), 4);
  const auto p = write_rows(dir, rows, "x,y");
  const auto m = cmd_ingest(p, {}, Transform::None);
  EXPECT_EQ(m.rows, rows);
  write_file(dir / "again.csv", data_csv(m));
  EXPECT_EQ(cmd_ingest(dir / "again.csv", {}, Transform::None).rows, rows);
}

TEST(RunConfig, Validation) {
  RunConfig c;
  EXPECT_THROW(validate(c, 300), Error);  // k_max = 300 must be below n
  EXPECT_NO_THROW(validate(c, 301));
  c.k_min = 20;
  EXPECT_THROW(validate(c, 1000), Error);
  c.k_min = 30;
  c.levels = {0.1, 0.05};
  EXPECT_THROW(validate(c, 1000), Error);
  std::size_t manual = 0;
  EXPECT_EQ(parse_k_policy("manual:120", manual), KPolicy::Manual);
  EXPECT_EQ(manual, 120u);
  EXPECT_EQ(parse_k_policy("largest", manual), KPolicy::LargestAdmissible);
  EXPECT_EQ(parse_k_policy("hill-stable", manual), KPolicy::HillStable);
  EXPECT_THROW(parse_k_policy("best", manual), Error);
}

TEST(CmdMrv, BivariateCauchyEndToEnd) {
  const auto dir = scratch("mrv2");
  RunConfig c;
  c.input = write_rows(dir, sample_cauchy(1000, banded_correlation(2, 0.0), 5), "u,v");
  c.n_boot = 99;
  c.seed = 3;
  c.m_max = 3;
  c.out = dir / "out";
  const auto res = cmd_mrv(c);

  const auto summary = io::json::parse(io::read_text(c.out / "summary.json"));
  EXPECT_EQ(summary, res.summary);
  EXPECT_EQ(summary["d"], 2);
  bool nonempty_5 = false;
  for (const auto& a : summary["admissible"]) {
    if (std::abs(a["level"].get<double>() - 0.05) < 1e-12) nonempty_5 = a["count"].get<int>() > 0;
  }
  EXPECT_TRUE(nonempty_5);
  ASSERT_FALSE(summary["k_star"].is_null());
  EXPECT_FALSE(summary["bic_M"].is_null());

  std::ifstream ks(c.out / "kscan.csv");
  const auto back = io::parse_kscan_csv(ks);
  EXPECT_EQ(back.records.size(), 271u);
  const auto model = io::model_from_json(io::json::parse(io::read_text(c.out / "model.json")));
  const auto& nm = std::get<NntsModel>(model);
  EXPECT_NO_THROW(validate(nm));
  EXPECT_EQ(nm.M, summary["bic_M"].get<int>());
  const auto grid = io::read_csv(c.out / "density_grid.csv");
  EXPECT_EQ(grid.rows.size(), 512u);
  EXPECT_TRUE(fs::exists(c.out / "scores.csv"));

  const auto again = run_mrv(cmd_ingest(c.input, {}, Transform::None).rows, c);
  EXPECT_EQ(again.summary["k_star"], summary["k_star"]);
  EXPECT_EQ(io::kscan_csv(again.report), io::read_text(c.out / "kscan.csv"));
}

TEST(CmdMrv, TrivariateWritesSphericalGrid) {
  const auto dir = scratch("mrv3");
  RunConfig c;
  c.input = write_rows(dir, sample_mvt(600, banded_correlation(3, 0.3), 2.0, 6), "a,b,c");
  c.k_max = 120;
  c.n_boot = 99;
  c.m_max = 1;
  c.k_policy = KPolicy::LargestAdmissible;
  c.out = dir / "out";
  const auto res = cmd_mrv(c);
  if (!res.summary["k_star"].is_null()) {
    EXPECT_EQ(io::read_csv(c.out / "density_grid.csv").rows.size(), 64u * 64u);
    const auto m = std::get<SnntsModel>(io::model_from_json(io::json::parse(io::read_text(c.out / "model.json"))));
    EXPECT_NO_THROW(validate(m));
  }
  EXPECT_TRUE(fs::exists(c.out / "summary.json"));
}

TEST(CmdMrv, ZeroRowsAreDropped) {
  auto rows = sample_cauchy(400, banded_correlation(2, 0.0), 7);
  rows[3] = {0.0, 0.0};
  RunConfig c;
  c.k_max = 100;
  c.n_boot = 99;
  c.m_max = 1;
  const auto res = run_mrv(rows, c);
  EXPECT_EQ(res.dropped_zero_rows, 1u);
  EXPECT_EQ(res.summary["n"], 399);
  c.k_max = 399;
  EXPECT_THROW(run_mrv(rows, c), Error);
}

TEST(CmdPower, WritesTableAndProvenance) {
  const auto dir = scratch("power");
  PowerStudyConfig c;
  c.n_samples = 4;
  c.sample_size = 300;
  c.k_values = {100, 200};
  c.n_boot = 99;
  const auto res = cmd_power(c, dir, 2);
  std::ifstream in(dir / "power.csv");
  const auto t = io::parse_power_csv(in);
  EXPECT_EQ(t.rejections, res.rejections);
  const auto prov = io::json::parse(io::read_text(dir / "provenance.json"));
  EXPECT_EQ(prov["seed"], 0);
  EXPECT_EQ(prov["replications"], 4);
}

TEST(CmdFit, CircleAndSphere) {
  const auto dir = scratch("fit");
  const double h = 1.0 / std::sqrt(2.0);
  const auto theta = sample_nnts(normalize_nnts({Complex(h, 0), Complex(h, 0)}), 800, 8);
  std::ostringstream s;
  s << "theta\n";
  for (double t : theta) s << io::format_double(t) << '\n';
  write_file(dir / "angles.csv", s.str());
  FitConfig f;
  f.input = dir / "angles.csv";
  f.columns = {"theta"};
  f.m_max = 3;
  f.out = dir / "circle";
  const auto summary = cmd_fit(f);
  EXPECT_EQ(io::read_csv(f.out / "scores.csv").rows.size(), 4u);
  EXPECT_EQ(summary["bic_M"], 1);
  for (const char* name : {"model.json", "model_aic.json", "model_bic.json", "density_grid.csv", "fit_summary.json"}) {
    EXPECT_TRUE(fs::exists(f.out / name)) << name;
  }

  const auto ang = sample_snnts(normalize_snnts(1, 0, {Complex(1, 0), Complex(0.5, 0.5)}), 600, 9);
  std::ostringstream s2;
  s2 << "t1,t2\n";
  for (std::size_t i = 0; i < ang.theta1.size(); ++i) {
    s2 << io::format_double(ang.theta1[i]) << ',' << io::format_double(ang.theta2[i]) << '\n';
  }
  write_file(dir / "sphere.csv", s2.str());
  f.input = dir / "sphere.csv";
  f.columns = {"t1", "t2"};
  f.m_max = 1;
  f.out = dir / "sphere";
  cmd_fit(f);
  EXPECT_EQ(io::read_csv(f.out / "scores.csv").rows.size(), 4u);
  EXPECT_EQ(io::read_csv(f.out / "density_grid.csv").rows.size(), 64u * 64u);
}
