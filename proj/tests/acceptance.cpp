// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails. Informational lines start with "  ".

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hmmob/error.hpp"
#include "hmmob/experiment.hpp"
#include "hmmob/hmm.hpp"
#include "hmmob/marginals.hpp"
#include "hmmob/order.hpp"
#include "hmmob/sampler.hpp"
#include "support.hpp"

using namespace hmmob;
using namespace hmmob::testing;
namespace fs = std::filesystem;

namespace {

const EmissionModel kGauss = EmissionModel::gaussian(1.0);

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < budget_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("criterion %d: %s  %s  [%.1f s, budget %.0f s%s]\n", id, ok ? "PASS" : "FAIL", o.detail.c_str(),
              secs, budget_s, in_time ? "" : ", over budget");
  std::fflush(stdout);
}

void info(const std::string& line) {
  std::printf("  %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> random_y(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::vector<double> y(n);
  for (auto& v : y) v = u(rng);
  return y;
}

int jobs_from_env() {
  const char* env = std::getenv("HMMOB_JOBS");
  return env ? std::max(1, std::atoi(env)) : 1;
}

ExperimentConfig in_dir(Scenario s, const fs::path& root, const std::string& name) {
  ExperimentConfig cfg = preset_config(s);
  cfg.output_dir = root / name;
  fs::remove_all(cfg.output_dir);
  return cfg;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

Outcome oracle_equivalence() {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int k = 1 + rep % 3;
    const std::size_t n = 1 + static_cast<std::size_t>(rep % 8);
    const HmmParams th = random_gaussian_params(k, rng);
    const auto y = random_y(n, rng);
    const Eigen::VectorXd mu = power_iteration(th.transition(), 5000);
    worst = std::max(worst, std::abs(log_likelihood(th, y, Stationary{}) - brute_force_loglik(th, y, mu)));
  }
  return {worst <= 1e-9, fmt("max |forward - enumeration| = %.3g over 100 instances (tol 1e-9)", worst)};
}

Outcome stationary_correctness() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int k = 1 + rep % 5;
    const Eigen::MatrixXd q = random_positive_q(k, rng, 1e-4);
    const Eigen::VectorXd mu = stationary_distribution(q).mu;
    worst = std::max(worst, (mu.transpose() * q - mu.transpose()).cwiseAbs().maxCoeff());
  }
  std::uniform_real_distribution<double> u(0.01, 0.99);
  double worst2 = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const double p = u(rng), q = u(rng);
    const Eigen::VectorXd mu = stationary_distribution(HmmParams::two_state(p, q, 0, 1, kGauss)).mu;
    worst2 = std::max({worst2, std::abs(mu[0] - q / (p + q)), std::abs(mu[1] - p / (p + q))});
  }
  return {worst <= 1e-8 && worst2 <= 1e-12,
          fmt("max |mu'Q - mu'| = %.3g (tol 1e-8), two-state closed form max err = %.3g (tol 1e-12)", worst,
              worst2)};
}

Outcome ffbs_exactness() {
  const HmmParams th = HmmParams::two_state(0.3, 0.4, -1.0, 1.0, kGauss);
  const std::vector<double> y = {-0.5, 0.3, 1.4, -0.2};
  const Eigen::VectorXd mu = power_iteration(th.transition(), 5000);
  std::map<std::vector<int>, double> exact;
  double z = 0.0;
  for_each_path(2, 4, [&](const std::vector<int>& x) { z += exact[x] = path_weight(th, y, x, mu); });
  std::map<std::vector<int>, int> counts;
  Rng rng(3);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) ++counts[ffbs_states(th, y, rng)];
  int within = 0;
  double worst = 0.0;
  for (const auto& [x, w] : exact) {
    const double p = w / z;
    const double zscore = std::abs(static_cast<double>(counts[x]) / draws - p) / std::sqrt(p * (1.0 - p) / draws);
    worst = std::max(worst, zscore);
    if (zscore <= 3.0) ++within;
  }
  return {within == 16, fmt("%d/16 paths within 3 binomial SEs, worst z = %.2f", within, worst)};
}

Outcome l1_oracle() {
  const HmmParams a(Eigen::MatrixXd::Ones(1, 1), {0.0}, kGauss);
  const HmmParams b(Eigen::MatrixXd::Ones(1, 1), {1.0}, kGauss);
  const double quad = l1_marginal_distance_quadrature(a, b).value;
  const auto mc = l1_marginal_distance(a, b, 1, 200000, 4);
  const bool ok = std::abs(quad - 0.76584) < 1e-5 && mc.std_err < 0.005 && std::abs(mc.value - quad) <= 3.0 * mc.std_err;
  return {ok, fmt("MC %.5f +/- %.5f vs quadrature %.5f", mc.value, mc.std_err, quad)};
}

Outcome likelihood_bound() {
  std::mt19937_64 rng(5);
  int violations = 0, doeblin_violations = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const int k = 2 + rep % 2;
    const HmmParams th = random_gaussian_params(k, rng);
    const auto y = random_y(30, rng);
    const double rho = forgetting_rho(th);
    const double bound = 2.0 * std::pow(rho / (rho - 1.0), 2);
    const double rd = mixing_profile(th).rho;
    const double doeblin_bound = 2.0 * std::pow(rd / (rd - 1.0), 2);
    for (int x = 0; x < k; ++x)
      for (int x2 = x + 1; x2 < k; ++x2) {
        const double gap = std::abs(log_likelihood(th, y, PointMass{x}) - log_likelihood(th, y, PointMass{x2}));
        if (gap > bound) ++violations;
        if (gap > doeblin_bound) ++doeblin_violations;
      }
  }
  info(fmt("with the Doeblin coefficient in place of the min/max transition ratio: %d violations",
           doeblin_violations));
  return {violations == 0, fmt("%d violations over 500 parameter sets, n = 30, all start pairs", violations)};
}

Outcome concentration_trend(const fs::path& root, int jobs) {
  const ExperimentConfig cfg = in_dir(Scenario::CorrectOrder, root, "correct_order");
  cmd_simulate(cfg, jobs);
  cmd_fit(cfg, jobs);
  const auto rows = cmd_distance(cfg, jobs);
  std::map<std::size_t, std::map<int, const DistanceRow*>> by;
  for (const auto& r : rows) by[r.n][r.replicate] = &r;
  const std::size_t small = cfg.n_grid.front(), large = cfg.n_grid.back();
  int improved = 0;
  std::vector<double> q_small, q_large, g_small, g_large;
  for (int r = 0; r < cfg.replicates; ++r) {
    const auto& s = *by[small][r];
    const auto& l = *by[large][r];
    if (median(l.l1) < median(s.l1)) ++improved;
    q_small.push_back(median(s.q_err));
    q_large.push_back(median(l.q_err));
    g_small.push_back(median(s.gamma_err));
    g_large.push_back(median(l.gamma_err));
  }
  const double q_ratio = median(q_small) / median(q_large);
  const double g_ratio = median(g_small) / median(g_large);
  const bool ok = improved * 10 >= 9 * cfg.replicates && q_ratio >= 1.5 && g_ratio >= 1.5;
  return {ok, fmt("median l1 lower at n=%zu in %d/%d pairings; median error shrink q %.2fx, gamma %.2fx", large,
                  improved, cfg.replicates, q_ratio, g_ratio)};
}

Outcome order_consistency(const fs::path& root, int jobs) {
  const ExperimentConfig cfg = in_dir(Scenario::OverfitMerge, root, "overfit_merge");
  cmd_simulate(cfg, jobs);
  cmd_fit(cfg, jobs);
  const auto rows = cmd_order(cfg, jobs);
  int hits = 0;
  std::size_t emptied = 0, samples = 0;
  for (const auto& r : rows) {
    if (r.mode == 1) ++hits;
    emptied += r.emptied_all_count;
  }
  samples = rows.size() * static_cast<std::size_t>((cfg.sampler.n_iter - cfg.sampler.burn_in) / cfg.sampler.thin);
  const auto sched = threshold_schedule(cfg.n_grid.back(), cfg.fit_k, 1, cfg.row_prior, cfg.schedule);
  info(fmt("u_n = %.3f, v_n = %.3f; %zu/%zu samples had every state emptied", sched.u_n, sched.v_n, emptied, samples));

  ExperimentConfig scaled = in_dir(Scenario::OverfitMerge, root, "overfit_merge_scaled");
  scaled.schedule.w_scale = 0.15;
  cmd_simulate(scaled, jobs);
  cmd_fit(scaled, jobs);
  int scaled_hits = 0;
  std::size_t scaled_emptied = 0;
  for (const auto& r : cmd_order(scaled, jobs)) {
    if (r.mode == 1) ++scaled_hits;
    scaled_emptied += r.emptied_all_count;
  }
  const auto s2 = threshold_schedule(scaled.n_grid.back(), scaled.fit_k, 1, scaled.row_prior, scaled.schedule);
  info(fmt("with w_scale = 0.15 (u_n = %.3f, v_n = %.3f): mode L = 1 in %d/%d replicates, %zu emptied samples",
           s2.u_n, s2.v_n, scaled_hits, scaled.replicates, scaled_emptied));
  return {hits * 10 >= 8 * cfg.replicates, fmt("posterior mode L = 1 in %d/%d replicates", hits, cfg.replicates)};
}

Outcome no_emptying(const fs::path& root, int jobs) {
  const ExperimentConfig cfg = in_dir(Scenario::TwoStateEmpty, root, "two_state_empty");
  const auto rows = cmd_twostate(cfg, jobs);
  int mass_ok = 0, gap_ok = 0, both = 0;
  std::vector<double> gaps;
  for (const auto& r : rows) {
    const bool m = r.mass_empty < 0.2;
    const bool g = r.gap_q50 < 0.3;
    mass_ok += m;
    gap_ok += g;
    both += m && g;
    gaps.push_back(r.gap_q50);
    info(fmt("replicate %d: A_n mass %.4f, merge mass %.4f, gap median %.3f", r.replicate, r.mass_empty,
             r.mass_merge, r.gap_q50));
  }
  info(fmt("median over replicates of the gap median: %.3f", median(gaps)));
  return {both * 10 >= 8 * cfg.replicates,
          fmt("A_n mass < 0.2 in %d/%d, gap median < 0.3 in %d/%d, both in %d/%d replicates", mass_ok,
              cfg.replicates, gap_ok, cfg.replicates, both, cfg.replicates)};
}

Outcome rate_gate() {
  bool rejected = false;
  for (double a : {1.0, 1.5, 2.0}) {
    try {
      (void)threshold_schedule(1000, 2, 1, DirichletType{{a, a}, {}});
      return {false, fmt("alpha_bar = %.1f was accepted", 2 * a)};
    } catch (const RateConditionError&) {
      rejected = true;
    }
  }
  const auto s = threshold_schedule(1000, 2, 1, DirichletType{{2.005, 2.005}, {}});
  return {rejected && s.u_n > 0.0, "alpha_bar in {2, 3, 4} rejected, alpha_bar = 4.01 accepted for k = 2, d = 1"};
}

Outcome invariant_suites() {
  std::vector<std::string> failed;
  std::istringstream list(HMMOB_UNIT_TESTS);
  int count = 0;
  for (std::string bin; std::getline(list, bin, ':');) {
    ++count;
    const std::string cmd = bin + " >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) failed.push_back(fs::path(bin).filename().string());
  }
  std::string detail = fmt("%d/%d unit suites passed", count - static_cast<int>(failed.size()), count);
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  const int jobs = jobs_from_env();
  report(1, 10, oracle_equivalence);
  report(2, 5, stationary_correctness);
  report(3, 30, ffbs_exactness);
  report(4, 10, l1_oracle);
  report(5, 30, likelihood_bound);
  report(6, 20 * 60, [&] { return concentration_trend(root, jobs); });
  report(7, 30 * 60, [&] { return order_consistency(root, jobs); });
  report(8, 15 * 60, [&] { return no_emptying(root, jobs); });
  report(9, 1, rate_gate);
  report(10, 10 * 60, invariant_suites);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
