// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Runs at full scale (reps 500 for the null variance ratio, 1000 for
// power and sampling distributions), so expect a few minutes on one core.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "rankjoint/amce.hpp"
#include "rankjoint/consistency.hpp"
#include "rankjoint/efficiency.hpp"
#include "rankjoint/expansion.hpp"
#include "rankjoint/simulation.hpp"

using namespace rankjoint;
using rjtest::random_ranked;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s  %2d  %-34s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt2(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// Independent CR2: dense hat matrix and explicit eigendecomposition of each
// I - H_gg.
Eigen::MatrixXd brute_force_cr2(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const std::vector<int>& cluster) {
  const Eigen::MatrixXd B = (X.transpose() * X).inverse();
  const Eigen::VectorXd e = y - X * (B * (X.transpose() * y));
  const Eigen::MatrixXd H = X * B * X.transpose();
  const int G = *std::max_element(cluster.begin(), cluster.end()) + 1;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(X.cols(), X.cols());
  for (int g = 0; g < G; ++g) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < cluster.size(); ++i) {
      if (cluster[i] == g) idx.push_back(static_cast<Eigen::Index>(i));
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd M(n, n), Xg(n, X.cols());
    Eigen::VectorXd eg(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      Xg.row(a) = X.row(idx[static_cast<std::size_t>(a)]);
      eg(a) = e(idx[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < n; ++b) {
        M(a, b) = (a == b ? 1.0 : 0.0) - H(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    Eigen::VectorXd inv_sqrt = es.eigenvalues();
    for (Eigen::Index k = 0; k < n; ++k) inv_sqrt(k) = 1.0 / std::sqrt(inv_sqrt(k));
    const Eigen::MatrixXd A = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd u = Xg.transpose() * (A * eg);
    meat += u * u.transpose();
  }
  return B * meat * B;
}

DesignMatrix as_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& cl) {
  DesignMatrix dm;
  dm.X = X;
  dm.y = y;
  for (int c : cl) dm.cluster.push_back(static_cast<std::uint32_t>(c));
  dm.n_clusters = static_cast<std::size_t>(*std::max_element(cl.begin(), cl.end()) + 1);
  return dm;
}

SimDesign paper_design() {
  SimDesign d;
  d.n_subjects = 500;
  d.n_tasks = 3;
  d.K = 3;
  d.schema = AttributeSchema::binary(6);
  d.gamma.assign(6, 0.0);
  d.noise_sd = 1.0;
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(RANKJOINT_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main() {
  std::printf("rankjoint acceptance suite\n");

  report(1, "expansion row counts", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t expected[] = {2, 6, 12, 20, 30};
    std::string got;
    bool ok = true;
    for (int K = 2; K <= 6; ++K) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(K));
      const auto d = random_ranked(rng, AttributeSchema::binary(2), 1, 1, K, K);
      const auto n = expand_dataset(d).size();
      ok = ok && n == expected[K - 2];
      got += (got.empty() ? "" : ",") + std::to_string(n);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return Outcome{ok && secs < 1.0, "rows per task K=2..6: " + got};
  });

  report(2, "pairwise == normalized-rank OLS", [] {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    int fitted = 0;
    for (int rep = 0; rep < 100; ++rep) {
      const auto n_attr = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
      const auto schema = rjtest::random_schema(rng, n_attr);
      const auto N = std::uniform_int_distribution<std::size_t>(20, 80)(rng);
      const auto J = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
      // first half: one K per dataset; second half: K varies across tasks
      const int k1 = std::uniform_int_distribution<int>(2, 6)(rng);
      const int k2 = rep < 50 ? k1 : std::uniform_int_distribution<int>(k1, 6)(rng);
      const auto d = random_ranked(rng, schema, N, J, k1, k2);
      const auto pair_fit = fit_ols(design_from_pairs(expand_dataset(d), ClusterBy::Subject));
      const auto rank_fit = fit_ols(design_from_normalized_rank(d, ClusterBy::Subject));
      worst = std::max(worst, (pair_fit.beta - rank_fit.beta).cwiseAbs().maxCoeff());
      ++fitted;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return Outcome{fitted == 100 && worst <= 1e-10 && secs < 30.0,
                   "100 datasets, max |diff| = " + fmt("%.2e", worst)};
  });

  report(3, "theoretical efficiency table", [] {
    const double eps = std::numeric_limits<double>::epsilon();
    const int Ks[] = {2, 3, 4, 6};
    const double exact[] = {1.0, 4.0 / 9.0, 5.0 / 18.0, 7.0 / 45.0};
    const long pct[] = {0, 33, 47, 61};
    bool ok = true;
    std::string got;
    for (int i = 0; i < 4; ++i) {
      const double v = theoretical_variance_ratio(Ks[i]);
      ok = ok && std::abs(v - exact[i]) <= 2.0 * eps * exact[i];
      const long r = std::lround(100.0 * theoretical_se_reduction(Ks[i]));
      ok = ok && r == pct[i];
      got += (got.empty() ? "" : ", ") + std::to_string(r) + "%";
    }
    return Outcome{ok, "SE reductions " + got};
  });

  report(4, "null variance-ratio simulation", [] {
    SimDesign d = paper_design();
    d.seed = 4;
    SimulationOptions o;
    o.reps = 500;
    const auto rows = null_efficiency_check({2, 3, 6}, d, o);
    const double r3 = rows[1].empirical_ratio, r6 = rows[2].empirical_ratio;
    const bool ok = std::abs(r3 - 2.0 / 3.0) <= 0.03 && std::abs(r6 - 0.394) <= 0.03;
    return Outcome{ok, fmt2("K=3 ratio %.4f, K=6 ratio %.4f", r3, r6)};
  });

  report(5, "power replication", [] {
    SimDesign d = paper_design();
    d.seed = 5;
    SimulationOptions o;
    o.reps = 1000;
    const std::vector<double> grid{0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.15, 0.2, 0.25, 0.5, 1, 2};
    const auto p = power_comparison(grid, d, o);
    bool ok = true;
    double min_mid = 1.0, max_high = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double g = grid[i];
      if (g >= 0.06 && g <= 0.2) {
        min_mid = std::min(min_mid, p.difference[i]);
        ok = ok && p.difference[i] > 0.0;
      }
      if (g >= 1.0) {
        max_high = std::max(max_high, std::abs(p.difference[i]));
        ok = ok && std::abs(p.difference[i]) < 0.03;
      }
    }
    const double size_r = p.rcc.coefficients[0].power, size_f = p.fcc.coefficients[0].power;
    ok = ok && std::abs(size_r - o.alpha) <= 0.03 && std::abs(size_f - o.alpha) <= 0.03;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "min diff on [0.06,0.2] %.3f, max |diff| at >=1 %.3f, power@0.01 rcc %.3f fcc %.3f",
                  min_mid, max_high, size_r, size_f);
    return Outcome{ok, buf};
  });

  report(6, "sampling distributions centered", [] {
    SimDesign d = paper_design();
    d.gamma = {0.01, 0.02, 0.04, 0.06, 0.08, 0.1};
    d.seed = 6;
    SimulationOptions o;
    o.reps = 1000;
    const auto s = sampling_distribution(d, o);
    bool ok = true;
    double worst = 0.0;
    for (std::size_t c = 0; c < s.labels.size(); ++c) {
      const auto& r = s.ranked_summary[c];
      const auto& f = s.forced_summary[c];
      const double z = std::abs(r.mean - f.mean) / std::sqrt(r.mc_se * r.mc_se + f.mc_se * f.mc_se);
      worst = std::max(worst, z);
      ok = ok && z < 2.0 && r.variance < f.variance;
    }
    return Outcome{ok, "max |mean diff| = " + fmt("%.2f", worst) + " combined MC SEs; RCC variance smaller"};
  });

  report(7, "CR2 against brute force", [] {
    Eigen::MatrixXd X(6, 3);
    X << 1, 0.2, 1, 1, 1.5, 0, 1, -0.7, 0, 1, 1.1, 1, 1, 2.3, 0, 1, 0.4, 1;
    Eigen::VectorXd y(6);
    y << 1, 0, 1, 1, 0, 0;
    const std::vector<int> cl{0, 0, 1, 1, 2, 2};
    const auto dm = as_design(X, y, cl);
    const double toy = (vcov_clustered(fit_ols(dm), dm, VcovType::CR2).vcov - brute_force_cr2(X, y, cl))
                           .cwiseAbs()
                           .maxCoeff();
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N01;
    double hc2 = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const int n = 20 + rep, p = 2 + rep % 4;
      Eigen::MatrixXd Xr(n, p);
      Eigen::VectorXd yr(n);
      std::vector<int> single(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        Xr(i, 0) = 1.0;
        for (int j = 1; j < p; ++j) Xr(i, j) = N01(rng);
        yr(i) = N01(rng);
        single[static_cast<std::size_t>(i)] = i;
      }
      // HC2 with the textbook leverage formula
      const Eigen::MatrixXd B = (Xr.transpose() * Xr).inverse();
      const Eigen::VectorXd e = yr - Xr * (B * (Xr.transpose() * yr));
      Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
      for (int i = 0; i < n; ++i) {
        const double h = Xr.row(i) * B * Xr.row(i).transpose();
        meat += Xr.row(i).transpose() * Xr.row(i) * (e(i) * e(i) / (1.0 - h));
      }
      const auto dr = as_design(Xr, yr, single);
      hc2 = std::max(hc2, (vcov_clustered(fit_ols(dr), dr, VcovType::CR2).vcov - B * meat * B).cwiseAbs().maxCoeff());
    }
    return Outcome{toy <= 1e-10 && hc2 <= 1e-12,
                   fmt2("toy max |diff| %.2e, singleton vs HC2 max |diff| %.2e", toy, hc2)};
  });

  report(8, "corruption sensitivity", [] {
    SimDesign d = paper_design();
    d.gamma = {0.1, 0.2, 0.3, 0.5, 0.8, 1.0};
    d.seed = 8;
    const auto data = simulate_dataset(d, ResponseMode::Ranked);
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(0.05 * i);
    SensitivityOptions o;
    o.iterations = 200;
    o.seed = 8;
    const auto res = corruption_sensitivity(data, grid, o);
    const double iters = static_cast<double>(res.iterations);
    bool ok = res.rows[0].mean_deviation == 0.0;
    bool monotone = true;
    for (std::size_t i = 1; i < res.rows.size(); ++i) {
      const double se_prev = res.rows[i - 1].sd_deviation / std::sqrt(iters);
      const double se_cur = res.rows[i].sd_deviation / std::sqrt(iters);
      monotone = monotone && res.rows[i].mean_deviation >=
                                 res.rows[i - 1].mean_deviation - std::sqrt(se_prev * se_prev + se_cur * se_cur);
    }
    // at p = 0.5 every AMCE averages to zero within 3 Monte Carlo SEs
    const auto& half = res.rows.back();
    double worst = 0.0;
    for (std::size_t c = 0; c < res.labels.size(); ++c) {
      if (res.labels[c].is_intercept()) continue;
      const double mc = half.sd_coefficients[c] / std::sqrt(iters);
      worst = std::max(worst, std::abs(half.mean_coefficients[c]) / mc);
    }
    ok = ok && monotone && worst <= 3.0;
    char buf[200];
    std::snprintf(buf, sizeof buf, "dev(0)=%g, dev(0.5)=%.4f, monotone=%s, max |coef|/MC SE at 0.5 = %.2f",
                  res.rows[0].mean_deviation, half.mean_deviation, monotone ? "yes" : "no", worst);
    return Outcome{ok, buf};
  });

  report(9, "consistency proportion tests", [] {
    const auto s = summarize_counts({{"K2", 950, 124, 0}, {"K4", 950, 209, 0}, {"K6", 950, 209, 0}});
    double p24 = -1, p46 = -1;
    for (const auto& t : s.tests) {
      if (t.condition_a == "K2" && t.condition_b == "K4") p24 = t.p;
      if (t.condition_a == "K4" && t.condition_b == "K6") p46 = t.p;
    }
    return Outcome{p24 >= 0.0 && p24 < 0.001 && std::abs(p46 - 1.0) < 1e-9,
                   fmt2("K2 vs K4 p = %.3g, K4 vs K6 p = %.3f", p24, p46)};
  });

  report(10, "z-test arithmetic", [] {
    const auto r = z_test(0.1, 0.03, 0.2, 0.04);
    // 2 * (1 - Phi(2)) to 20 digits, from arbitrary-precision erfc(sqrt(2))
    const double oracle = 0.045500263896358414;
    return Outcome{std::abs(r.z + 2.0) < 1e-12 && std::abs(r.p - oracle) < 1e-6,
                   fmt2("z = %.12f, p = %.12f", r.z, r.p)};
  });

  report(11, "determinism across --threads", [] {
    const auto dir = fs::temp_directory_path() / ("rj_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const auto config = dir / "sim.json";
    std::ofstream(config) << R"({"n_subjects":200,"n_tasks":3,"K":4,"n_binary_attributes":3,"gamma":[0.1,0.3,0.0]})";
    const auto data = dir / "data.csv";
    const auto schema = dir / "schema.json";
    std::ofstream(schema) << R"({"attributes":[{"name":"A1","levels":["0","1"]},{"name":"A2","levels":["0","1"]},{"name":"A3","levels":["0","1"]}]})";
    const std::string cfg = " --config " + config.string();
    const std::vector<std::pair<std::string, bool>> commands{
        {"simulate-power" + cfg + " --seed 11 --reps 40 --oracle-pairs 20000", false},
        {"simulate-power --analysis null-efficiency --k 2 4" + cfg + " --seed 11 --reps 20", false},
        {"simulate-power --analysis sampling --draws" + cfg + " --seed 11 --reps 20", false},
        {"sensitivity --in " + data.string() + " --schema " + schema.string() +
             " --p 0 0.1 0.25 0.5 --iters 40 --seed 11", false},
        {"simulate-data" + cfg + " --seed 11 --out ", true}};
    if (run_cli("simulate-data" + cfg + " --seed 3 --out " + data.string(), dir / "log") != 0) {
      return Outcome{false, "could not create input data"};
    }
    int compared = 0;
    bool ok = true;
    for (const auto& [cmd, csv_out] : commands) {
      std::string reference;
      for (const char* threads : {"1", "2", "4", "1"}) {
        const auto out = dir / (std::string("out_") + threads + ".json");
        const auto csv = dir / "out.csv";  // same path, so the echoed output name matches
        const std::string full = std::string("--canonical --threads ") + threads + " " + cmd +
                                 (csv_out ? csv.string() : "");
        if (run_cli(full, out) != 0) return Outcome{false, "command failed: " + full};
        auto bytes = slurp(out);
        if (csv_out) bytes = slurp(csv) + bytes;
        if (reference.empty()) {
          reference = bytes;
        } else {
          ok = ok && bytes == reference;
        }
        ++compared;
      }
    }
    fs::remove_all(dir);
    return Outcome{ok, std::to_string(commands.size()) + " subcommands x threads {1,2,4,1}: " +
                           (ok ? "byte-identical" : "outputs differ")};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
