// Acceptance suite: one PASS/FAIL/SKIP line per criterion, exit status 1 if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mrv/mrv.hpp"
#include "test_support.hpp"

using namespace mrv;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  enum Status { Pass, Fail, Skip } status;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)}; }

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

std::vector<Complex> gaussian_coefficients(std::size_t p, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<Complex> c(p);
  for (auto& z : c) z = Complex(g(rng), g(rng));
  return c;
}

NntsModel cosine_model() {
  const double h = 1.0 / std::sqrt(2.0);
  return normalize_nnts({Complex(h, 0), Complex(h, 0)});
}

Outcome nnts_normalization() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int M = 0; M <= 5; ++M) {
    for (int rep = 0; rep < 100; ++rep) {
      const auto m = normalize_nnts(gaussian_coefficients(static_cast<std::size_t>(M + 1), rng));
      const double integral = mrv::testing::circle_trapezoid([&](double t) { return nnts_density(m, t); }, 4096);
      worst = std::max(worst, std::abs(integral - 1.0));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return verdict(worst <= 1e-8 && secs < 10.0, "max |integral - 1| = " + fmt(worst) + ", " + fmt(secs, 3) + " s");
}

Outcome snnts_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> order(0, 3);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int M1 = order(rng), M2 = order(rng);
    const auto c = gaussian_coefficients(static_cast<std::size_t>((M1 + 1) * (M2 + 1)), rng);
    const double integral = mrv::testing::sphere_integral(
        [&](double t1, double t2) { return std::sin(t2) / (4 * kPi) * snnts_modulus_sq(M1, M2, c, t1, t2); });
    worst = std::max(worst, std::abs(snnts_quadratic_form(M1, M2, c) - integral));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return verdict(worst <= 1e-6 && secs < 60.0, "max |form - integral| = " + fmt(worst) + ", " + fmt(secs, 3) + " s");
}

Outcome gradient_check() {
  std::mt19937_64 rng(103);
  const auto theta = sample_nnts(cosine_model(), 300, 7);
  double worst = 0.0;
  for (int M = 1; M <= 3; ++M) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto c = gaussian_coefficients(static_cast<std::size_t>(M + 1), rng);
      const auto g = nnts_loglik_gradient(c, theta);
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double h = 1e-6;
        auto cp = c, cm = c;
        const Complex dir = (j % 2 == 0) ? Complex(h, 0) : Complex(0, h);
        cp[j / 2] += dir;
        cm[j / 2] -= dir;
        const double fd = (nnts_loglik(cp, theta) - nnts_loglik(cm, theta)) / (2 * h);
        worst = std::max(worst, std::abs(fd - g[j]) / std::max(1.0, std::abs(g[j])));
      }
    }
  }
  return verdict(worst <= 1e-5, "max relative error = " + fmt(worst));
}

Outcome fitting_recovery() {
  const auto truth = cosine_model();
  int good = 0;
  for (std::uint64_t r = 0; r < 50; ++r) {
    const auto theta = sample_nnts(truth, 2000, derive_seed(104, {r}));
    FitOptions o;
    o.seed = r;
    const auto fit = fit_nnts(theta, 1, o);
    double sup = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double t = kTwoPi * i / 100.0;
      sup = std::max(sup, std::abs(nnts_density(fit.model, t) - nnts_density(truth, t)));
    }
    good += sup <= 0.05;
  }
  return verdict(good >= 45, std::to_string(good) + "/50 fits within 0.05 sup-norm");
}

Outcome rayleigh_size() {
  int rejected = 0;
  std::vector<double> t(10000);
  for (std::uint64_t r = 0; r < 1000; ++r) {
    Rng rng = make_rng(105, {r});
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    for (auto& a : t) a = u(rng);
    rejected += rayleigh_test(t).p_value <= 0.05;
  }
  const double rate = rejected / 1000.0;
  return verdict(rate >= 0.035 && rate <= 0.065, "rejection rate " + fmt(rate));
}

Outcome hill_consistency() {
  double sum = 0.0;
  for (std::uint64_t r = 0; r < 20; ++r) {
    Rng rng = make_rng(106, {r});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(100000);
    for (auto& v : x) v = std::pow(1.0 - u(rng), -0.5);
    std::sort(x.begin(), x.end(), std::greater<>());
    sum += hill(x, 10000).evi;
  }
  const double mean = sum / 20.0;
  return verdict(std::abs(mean - 0.5) <= 0.03, "mean EVI " + fmt(mean, 5));
}

PowerStudyConfig table_config(Distribution d) {
  PowerStudyConfig c;
  c.distribution = d;
  c.dimension = 3;
  c.s = 0.0;
  c.nu = 2.0;
  c.beta = 1.0;
  c.n_samples = 200;
  c.sample_size = 1000;
  c.k_values = {250};
  c.levels = {0.05};
  c.seed = 107;
  return c;
}

Outcome null_calibration() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = power_study(table_config(Distribution::StudentT), default_threads());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double prop = r.rejections[0][0] / 200.0;
  return verdict(prop >= 0.02 && prop <= 0.11 && secs <= 1800.0,
                 std::to_string(r.rejections[0][0]) + "/200 rejected (" + fmt(prop, 3) + "), " + fmt(secs, 3) + " s");
}

Outcome pareto_power() {
  const auto r = power_study(table_config(Distribution::ParetoIndep), default_threads());
  return verdict(r.rejections[0][0] == 200 && r.failed_replications == 0,
                 std::to_string(r.rejections[0][0]) + "/200 rejected");
}

Outcome round_trip() {
  double worst = 0.0;
  for (int d = 2; d <= 5; ++d) {
    Rng rng = make_rng(109, {static_cast<std::uint64_t>(d)});
    std::normal_distribution<double> g;
    int used = 0;
    while (used < 100000) {
      std::vector<double> x(static_cast<std::size_t>(d));
      double n2 = 0.0;
      for (auto& v : x) {
        v = g(rng);
        n2 += v * v;
      }
      bool ok = true;
      for (auto& v : x) {
        v /= std::sqrt(n2);
        ok = ok && std::abs(v) > 1e-6;
      }
      if (!ok) continue;
      ++used;
      const auto back = from_polar(to_polar(x));
      for (int j = 0; j < d; ++j) worst = std::max(worst, std::abs(back[j] - x[j]));
    }
  }
  return verdict(worst <= 1e-10, "max reconstruction error " + fmt(worst));
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "mrv_acceptance_determinism";
  fs::remove_all(base);
  const std::string args =
      " power --distribution t --dimension 3 --reps 12 --sample-size 500 --k-values 100,200,300 --n-boot 99 --seed 110";
  std::vector<std::string> files;
  for (const char* threads : {"1", "4"}) {
    const fs::path out = base / (std::string("threads_") + threads);
    const std::string cmd = std::string("MRV_THREADS=") + threads + " \"" + MRV_CLI_PATH + "\"" + args + " --out \"" +
                            out.string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return verdict(false, "cli run failed: " + cmd);
    files.push_back(io::read_text(out / "power.csv"));
  }
  const bool same = files[0] == files[1] && !files[0].empty();
  return verdict(same, same ? "power.csv identical (" + std::to_string(files[0].size()) + " bytes)" : "power.csv differs");
}

Outcome fx_reproduction() {
  const char* path = std::getenv("MRV_FX_DATA");
  if (!path || !*path) return {Outcome::Skip, "set MRV_FX_DATA to a CSV of GBPUSD and JPYUSD prices"};
  const char* cols_env = std::getenv("MRV_FX_COLUMNS");
  std::string cols = cols_env && *cols_env ? cols_env : "GBPUSD,JPYUSD";
  std::vector<std::string> columns;
  std::stringstream ss(cols);
  for (std::string c; std::getline(ss, c, ',');) columns.push_back(c);
  const auto data = cmd_ingest(path, columns, Transform::LogReturns);
  RunConfig cfg;
  cfg.seed = 111;
  cfg.threads = default_threads();
  const auto res = run_mrv(data.rows, cfg);
  if (!res.threshold) return verdict(false, "no admissible k_u");
  std::vector<Observation> rows;
  for (const auto& r : data.rows) {
    if (r[0] != 0.0 || r[1] != 0.0) rows.push_back(r);
  }
  const auto sample = polar_sample(rows);
  std::vector<int> ms;
  for (int m = 0; m <= cfg.m_max; ++m) ms.push_back(m);
  FitOptions fo;
  fo.seed = cfg.seed;
  const auto fin = finalize(sample, 200, ms, fo);
  const double u = res.threshold->u;
  const double evi = fin.hill.evi;
  const int bic_m = fin.circle->best(Criterion::BIC).model.M;
  const bool ok = std::abs(u - 0.014) <= 0.002 && std::abs(evi - 0.2873) <= 0.02 && bic_m == 2;
  return verdict(ok, "n=" + std::to_string(rows.size()) + " u=" + fmt(u) + " k_u=" + std::to_string(res.threshold->k_u) +
                         " EVI@200=" + fmt(evi) + " BIC M=" + std::to_string(bic_m));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1  NNTS normalization", nnts_normalization},
      {"2  SNNTS constraint identity", snnts_identity},
      {"3  likelihood gradient check", gradient_check},
      {"4  NNTS fitting recovery", fitting_recovery},
      {"5  Rayleigh size", rayleigh_size},
      {"6  Hill consistency", hill_consistency},
      {"7  t null calibration (200 reps, k=250)", null_calibration},
      {"8  independent Pareto power (200 reps, k=250)", pareto_power},
      {"9  polar round trip", round_trip},
      {"10 power.csv determinism across thread counts", determinism},
      {"11 FX pair reproduction (optional)", fx_reproduction},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.status == Outcome::Pass ? "PASS" : o.status == Outcome::Fail ? "FAIL" : "SKIP";
    failed += o.status == Outcome::Fail;
    std::printf("[%s] %-48s %s [%.2f s]\n", tag, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%s\n", failed ? "acceptance: FAILED" : "acceptance: all required criteria passed");
  return failed ? 1 : 0;
}
