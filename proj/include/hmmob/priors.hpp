#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hmmob/hmm.hpp"
#include "hmmob/rng.hpp"

namespace hmmob {

/// Dirichlet(alphas) on every transition row. `per_row`, when non-empty,
/// overrides the shared vector row by row (used for Beta(a, b) priors on
/// the two off-diagonal entries of a 2-state chain).
struct DirichletType {
  std::vector<double> alphas;
  std::vector<std::vector<double>> per_row;

  const std::vector<double>& row(int i) const;
  /// Sum of the concentration parameters; the smallest row sum when rows differ.
  double alpha_bar() const;
};

/// Row density proportional to prod_j exp(-C / u_j).
struct ExponentialType {
  double C = 1.0;
};

using RowPrior = std::variant<DirichletType, ExponentialType>;

struct GaussianMean {
  double m0 = 0.0;
  double s0 = 5.0;
};

/// Gamma(shape a0, rate b0) on a Poisson rate.
struct GammaRate {
  double a0 = 1.0;
  double b0 = 1.0;
};

using EmissionPrior = std::variant<GaussianMean, GammaRate>;

/// Throws PreconditionError unless the hyperparameters are valid for k states.
void validate(const RowPrior& prior, int k);
void validate(const EmissionPrior& prior, const EmissionModel& emission);

EmissionPrior default_emission_prior(const EmissionModel& emission);

/// Dirichlet log-density w.r.t. Lebesgue measure on the first k-1
/// coordinates. Zero coordinates follow 0^0 = 1; a zero coordinate with
/// alpha > 1 gives -inf, with alpha < 1 gives +inf.
double dirichlet_log_density(std::span<const double> u, std::span<const double> alpha);

/// log of the integral of prod_j exp(-C/u_j) over the open simplex,
/// estimated once per (k, C) by importance sampling and cached.
double exponential_log_normalizer(int k, double C);

/// Probability that a uniform-simplex proposal is accepted by the
/// exponential-type rejection sampler.
double exponential_acceptance_rate(int k, double C);

double exponential_row_log_density(std::span<const double> u, double C);

double row_log_density(std::span<const double> u, const RowPrior& prior, int row_index);
double emission_log_prior(double gamma, const EmissionPrior& prior);

double log_prior(const HmmParams& theta, const RowPrior& row_prior,
                 const EmissionPrior& em_prior);

Eigen::VectorXd sample_row(const RowPrior& prior, int row_index, int k, Rng& rng);
double sample_emission(const EmissionPrior& prior, Rng& rng);

HmmParams sample_prior(int k, const RowPrior& row_prior, const EmissionPrior& em_prior,
                       const EmissionModel& emission, std::uint64_t seed);
HmmParams sample_prior(int k, const RowPrior& row_prior, const EmissionPrior& em_prior,
                       const EmissionModel& emission, Rng& rng);

}  // namespace hmmob
