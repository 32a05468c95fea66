#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmmob/hmm.hpp"
#include "hmmob/io.hpp"
#include "hmmob/order.hpp"
#include "hmmob/priors.hpp"
#include "hmmob/sampler.hpp"

namespace hmmob {

enum class Scenario { OverfitMerge, CorrectOrder, TwoStateEmpty, Custom };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct DistanceOptions {
  std::size_t n_mc = 2000;
  std::size_t max_evals = 500;
};

struct TwoStateOptions {
  double alpha = 2.0;
  double beta = 2.0;
  /// eps_n = n^eps_exponent unless eps_n is pinned explicitly.
  double eps_exponent = -0.25;
  std::optional<double> eps_n;
  double merge_radius = 0.3;

  double eps_for(std::size_t n) const;
};

/// Beta(alpha, beta) priors on p = q_12 and q = q_21, written as per-row
/// Dirichlet priors: row 1 ~ Dir(beta, alpha), row 2 ~ Dir(alpha, beta).
DirichletType beta_row_prior(double alpha, double beta);

struct ExperimentConfig {
  Scenario scenario = Scenario::Custom;
  HmmParams theta_true = HmmParams(Eigen::MatrixXd::Ones(1, 1), {0.0}, EmissionModel::gaussian(1.0));
  int fit_k = 2;
  RowPrior row_prior = DirichletType{{4.0, 4.0}, {}};
  EmissionPrior em_prior = GaussianMean{};
  std::vector<std::size_t> n_grid = {1000};
  int replicates = 1;
  SamplerConfig sampler;
  int marginal_l = 2;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 20261019;
  ScheduleOptions schedule;
  DistanceOptions distance;
  TwoStateOptions twostate;

  void validate() const;
};

/// Every field, defaults included, so outputs are self-describing.
json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Hash of the canonical JSON form, excluding output_dir.
std::string config_hash(const ExperimentConfig& cfg);

ExperimentConfig preset_config(Scenario scenario);

/// Seeds for task (n index, replicate): task = n_index * replicates + r,
/// base = split_seed(seed, task), stream s = split_seed(base, s) with
/// 0 = data, 1 = chain, 2 = distance Monte Carlo.
enum class Stream : std::uint64_t { Data = 0, Chain = 1, Distance = 2 };
std::uint64_t task_seed(const ExperimentConfig& cfg, std::size_t n_index, int replicate,
                        Stream stream);

std::string task_name(std::size_t n, int replicate);

struct DatasetEntry {
  std::size_t n = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::filesystem::path file;
};

std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& cfg, int jobs = 1);
std::vector<std::filesystem::path> cmd_fit(const ExperimentConfig& cfg, int jobs = 1);

struct OrderRow {
  std::size_t n = 0;
  int replicate = 0;
  int mode = 1;
  double p_eq_k0 = 0.0;
  std::size_t emptied_all_count = 0;
};
std::vector<OrderRow> cmd_order(const ExperimentConfig& cfg, int jobs = 1);

struct DistanceRow {
  std::size_t n = 0;
  int replicate = 0;
  std::vector<double> l1;
  std::vector<double> weighted;
  std::vector<double> q_err;      // empty unless fit_k equals the true order
  std::vector<double> gamma_err;  // likewise
};
std::vector<DistanceRow> cmd_distance(const ExperimentConfig& cfg, int jobs = 1);

struct TwoStateRow {
  std::size_t n = 0;
  int replicate = 0;
  double eps_n = 0.0;
  double mass_empty = 0.0;  // posterior mass of {min mu <= eps_n}
  double mass_merge = 0.0;  // posterior mass of {|gamma_1 - gamma_2| <= merge_radius}
  double gap_q25 = 0.0;
  double gap_q50 = 0.0;
  double gap_q75 = 0.0;
  double mixing_q50 = 0.0;  // median of min(p+q, 2-(p+q))
};
/// Simulates, fits and reports in one go; requires fit_k = 2.
std::vector<TwoStateRow> cmd_twostate(const ExperimentConfig& cfg, int jobs = 1);

/// Emptying-set mass and merge statistics over a two-state trace.
TwoStateRow twostate_summary(std::span<const HmmParams> samples, double eps_n,
                             double merge_radius);

/// Errors minimised over state relabelings:
///   q: min_perm max_ij |q_hat - q0|, gamma: min_perm ||gamma_hat - gamma0||.
struct ParameterError {
  double q = 0.0;
  double gamma = 0.0;
};
ParameterError permutation_min_error(const HmmParams& fit, const HmmParams& truth);

/// Linear-interpolation quantile of unsorted data.
double quantile(std::vector<double> data, double p);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the
/// exception of the lowest failing index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace hmmob
