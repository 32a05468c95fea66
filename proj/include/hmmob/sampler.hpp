#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hmmob/hmm.hpp"
#include "hmmob/priors.hpp"
#include "hmmob/rng.hpp"

namespace hmmob {

struct FromPrior {};
struct UserSupplied {
  HmmParams theta;
};
using ChainInit = std::variant<FromPrior, UserSupplied>;

struct SamplerConfig {
  int n_iter = 6000;
  int burn_in = 1000;
  int thin = 1;
  double rw_scale = 0.1;
  ChainInit init = FromPrior{};
  std::uint64_t seed = 1;

  void validate() const;
};

/// Thinned post-burn-in draws. accept_rows/accept_em hold the fraction of
/// accepted block updates in the sweep that produced each sample.
struct PosteriorTrace {
  std::vector<int> iterations;
  std::vector<HmmParams> samples;
  std::vector<double> log_post;
  std::vector<double> accept_rows;
  std::vector<double> accept_em;
  double accept_rate_rows = 1.0;
  double accept_rate_em = 1.0;
  SamplerConfig config;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return samples.size(); }
};

/// Exact draw of the hidden path given theta and y, with X_1 ~ mu_theta.
std::vector<int> ffbs_states(const HmmParams& theta, std::span<const double> y, Rng& rng);
std::vector<int> ffbs_states(const HmmParams& theta, std::span<const double> y,
                             std::uint64_t seed);

/// counts(i, j) = number of transitions i -> j along the path.
Eigen::MatrixXd transition_counts(std::span<const int> path, int k);

/// Row i ~ Dirichlet(alpha_i + counts_i).
Eigen::MatrixXd gibbs_rows(std::span<const int> path, int k, const DirichletType& prior,
                           Rng& rng);
Eigen::MatrixXd gibbs_rows(std::span<const int> path, int k, const DirichletType& prior,
                           std::uint64_t seed);

struct RowUpdate {
  Eigen::MatrixXd rows;
  std::vector<bool> accepted;
};

/// Conjugate rows used as an independence proposal, accepted with
/// probability min(1, mu'(x_1)/mu(x_1)); the resulting kernel leaves the
/// stationary-start path posterior invariant.
RowUpdate dirichlet_rows_step(const HmmParams& theta, std::span<const int> path,
                              const DirichletType& prior, Rng& rng);

/// log Metropolis-Hastings ratio for replacing row `row` by `proposed`
/// under the exponential-type prior with a Dirichlet(current / rw_scale)
/// proposal. With `stationary_start` the mu(x_1) factor of the path
/// likelihood is included.
double mh_row_log_accept_ratio(const HmmParams& theta, int row, const Eigen::VectorXd& proposed,
                               std::span<const int> path, double C, double rw_scale,
                               bool stationary_start = true);

/// One Metropolis-within-Gibbs pass over the rows. C may be 0 (flat prior).
RowUpdate mh_rows_exponential(const HmmParams& theta, std::span<const int> path, double C,
                              double rw_scale, Rng& rng, bool stationary_start = true);
RowUpdate mh_rows_exponential(const HmmParams& theta, std::span<const int> path, double C,
                              double rw_scale, std::uint64_t seed, bool stationary_start = true);

/// Conjugate posterior of each state's emission parameter.
/// Gaussian: (mean, sd) of the normal posterior. Poisson: (shape, rate).
struct EmissionPosterior {
  std::vector<double> first;
  std::vector<double> second;
};

EmissionPosterior emission_posterior(std::span<const int> path, std::span<const double> y,
                                     int k, const EmissionPrior& prior,
                                     const EmissionModel& emission);

std::vector<double> gibbs_emissions(std::span<const int> path, std::span<const double> y, int k,
                                    const EmissionPrior& prior, const EmissionModel& emission,
                                    Rng& rng);
std::vector<double> gibbs_emissions(std::span<const int> path, std::span<const double> y, int k,
                                    const EmissionPrior& prior, const EmissionModel& emission,
                                    std::uint64_t seed);

struct SweepResult {
  HmmParams theta;
  std::vector<int> path;
  double accept_rows = 1.0;
  double accept_em = 1.0;
};

/// One systematic-scan sweep: states, then rows, then emissions.
SweepResult gibbs_sweep(const HmmParams& theta, std::span<const double> y,
                        const RowPrior& row_prior, const EmissionPrior& em_prior,
                        double rw_scale, Rng& rng);

PosteriorTrace run_chain(std::span<const double> y, int k, const RowPrior& row_prior,
                         const EmissionPrior& em_prior, const EmissionModel& emission,
                         const SamplerConfig& cfg);

}  // namespace hmmob
