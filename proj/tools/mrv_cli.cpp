// mrv: batch front end for the multivariate regular variation test.
//
//   mrv ingest --input prices.csv --columns GBPUSD,JPYUSD --transform log-returns --out run/
//   mrv mrv    --input prices.csv --columns GBPUSD,JPYUSD --transform log-returns --out run/
//   mrv power  --distribution t --s 0 --nu 2 --reps 200 --k-values 250 --out power/
//   mrv fit    --input angles.csv --columns theta --m-max 8 --out fit/
//
// Failures print a JSON object {"error", "message"} on stderr (and to
// <out>/error.json when --out is given) and exit with status 1.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mrv/mrv.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    auto v = mrv::io::parse_double(tok);
    if (!v) throw mrv::Error(mrv::ErrorKind::InvalidConfig, std::string("bad value in ") + what + ": " + tok);
    out.push_back(*v);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  for (double v : parse_doubles(s, what)) {
    if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw mrv::Error(mrv::ErrorKind::InvalidConfig, std::string("bad integer in ") + what);
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

int report_error(const std::string& kind, const std::string& message, const std::string& out_dir) {
  nlohmann::json err{{"error", kind}, {"message", message}};
  std::cerr << err.dump() << "\n";
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    std::ofstream f(std::filesystem::path(out_dir) / "error.json");
    if (f) f << err.dump(2) << "\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate regular variation test and spectral density estimation"};
  app.require_subcommand(1);

  std::string input, columns, transform = "none", levels = "0.01,0.05,0.10", k_policy = "hill-stable", out;
  std::size_t k_min = 30, k_max = 300, n_boot = mrv::kDefaultBootstrap;
  std::uint64_t seed = 0;
  int m_max = 8;
  double select_level = 0.05;

  auto* ingest = app.add_subcommand("ingest", "Read selected CSV columns, optionally as log-returns");
  ingest->add_option("--input", input, "CSV file with a header row")->required();
  ingest->add_option("--columns", columns, "Comma-separated column names or 0-based indices");
  ingest->add_option("--transform", transform, "none | log-returns");
  ingest->add_option("--out", out, "Output directory (data.csv); stdout when omitted");

  auto* run = app.add_subcommand("mrv", "k-scan of the joint MRV test and final estimation");
  run->add_option("--input", input, "CSV file with a header row")->required();
  run->add_option("--columns", columns, "Comma-separated column names or 0-based indices");
  run->add_option("--transform", transform, "none | log-returns");
  run->add_option("--k-min", k_min, "Smallest k (>= 30)");
  run->add_option("--k-max", k_max, "Largest k (< n)");
  run->add_option("--levels", levels, "Significance levels, ascending");
  run->add_option("--select-level", select_level, "Level used to pick k_u and k*");
  run->add_option("--n-boot", n_boot, "Bootstrap replicates for the tail test");
  run->add_option("--seed", seed, "Random seed");
  run->add_option("--m-max", m_max, "Largest NNTS order considered");
  run->add_option("--k-policy", k_policy, "hill-stable | largest | manual:<k>");
  run->add_option("--out", out, "Output directory")->required();

  std::string distribution = "t", k_values = "250,300,350,400,450,500", power_levels = "0.10,0.05,0.01";
  std::size_t dimension = 3, reps = 1000, sample_size = 1000;
  double s = 0.0, nu = 2.0, beta = 1.0;
  auto* power = app.add_subcommand("power", "Monte-Carlo rejection counts of the joint MRV test");
  power->add_option("--distribution", distribution, "t | cauchy | pareto-indep");
  power->add_option("--dimension", dimension, "Dimension of the simulated vectors");
  power->add_option("--s", s, "Correlation between neighbouring components");
  power->add_option("--nu", nu, "Degrees of freedom (t)");
  power->add_option("--beta", beta, "Pareto index (pareto-indep)");
  power->add_option("--reps", reps, "Number of simulated samples");
  power->add_option("--sample-size", sample_size, "Observations per sample");
  power->add_option("--k-values", k_values, "Comma-separated k values");
  power->add_option("--levels", power_levels, "Comma-separated significance levels");
  power->add_option("--n-boot", n_boot, "Bootstrap replicates for the tail test");
  power->add_option("--seed", seed, "Random seed");
  power->add_option("--out", out, "Output directory")->required();

  std::string criterion = "bic";
  auto* fit = app.add_subcommand("fit", "Fit NNTS (one angle column) or SNNTS (two columns) densities");
  fit->add_option("--input", input, "CSV file of angles with a header row")->required();
  fit->add_option("--columns", columns, "theta, or theta1,theta2");
  fit->add_option("--m-max", m_max, "Largest order considered");
  fit->add_option("--criterion", criterion, "aic | bic");
  fit->add_option("--seed", seed, "Random seed");
  fit->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*ingest) {
      const auto m = mrv::cmd_ingest(input, split_list(columns), mrv::parse_transform(transform));
      if (out.empty()) {
        std::cout << mrv::data_csv(m);
      } else {
        std::filesystem::create_directories(out);
        mrv::io::write_text(std::filesystem::path(out) / "data.csv", mrv::data_csv(m));
      }
    } else if (*run) {
      mrv::RunConfig cfg;
      cfg.input = input;
      cfg.columns = split_list(columns);
      cfg.transform = mrv::parse_transform(transform);
      cfg.k_min = k_min;
      cfg.k_max = k_max;
      cfg.levels = parse_doubles(levels, "--levels");
      cfg.select_level = select_level;
      cfg.n_boot = n_boot;
      cfg.seed = seed;
      cfg.m_max = m_max;
      cfg.k_policy = mrv::parse_k_policy(k_policy, cfg.manual_k);
      cfg.out = out;
      const auto res = mrv::cmd_mrv(cfg);
      std::cout << res.summary.dump(2) << "\n";
    } else if (*power) {
      mrv::PowerStudyConfig cfg;
      cfg.distribution = mrv::parse_distribution(distribution);
      cfg.dimension = dimension;
      cfg.s = s;
      cfg.nu = nu;
      cfg.beta = beta;
      cfg.n_samples = reps;
      cfg.sample_size = sample_size;
      cfg.k_values = parse_sizes(k_values, "--k-values");
      cfg.levels = parse_doubles(power_levels, "--levels");
      cfg.n_boot = n_boot;
      cfg.seed = seed;
      const auto res = mrv::cmd_power(cfg, out, mrv::default_threads());
      std::cout << mrv::io::power_csv(res);
    } else if (*fit) {
      mrv::FitConfig cfg;
      cfg.input = input;
      cfg.columns = split_list(columns);
      cfg.m_max = m_max;
      cfg.criterion = mrv::parse_criterion(criterion);
      cfg.seed = seed;
      cfg.out = out;
      std::cout << mrv::cmd_fit(cfg).dump(2) << "\n";
    }
  } catch (const mrv::Error& e) {
    return report_error(std::string(mrv::to_string(e.kind())), e.what(), out);
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what(), out);
  }
  return 0;
}
