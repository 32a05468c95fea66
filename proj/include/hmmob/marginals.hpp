#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "hmmob/hmm.hpp"

namespace hmmob {

/// Dimension l of the joint law of (Y_1, ..., Y_l). Capped at 4 because the
/// marginal is a mixture of k^l product densities.
struct MarginalSpec {
  static constexpr int kMaxDimension = 4;
  int l = 2;

  void validate() const;
};

struct MarginalValue {
  double value = 0.0;
  double log_value = 0.0;
  bool underflow = false;
};

/// log f_{l,theta}(y) with l = y.size(), via log-sum-exp over state tuples.
double log_marginal_density(const HmmParams& theta, std::span<const double> y);
MarginalValue marginal_density(const HmmParams& theta, int l, std::span<const double> y);

enum class DistanceMethod { MonteCarlo, Quadrature1D };

struct DistanceEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::size_t n_mc = 0;
  DistanceMethod method = DistanceMethod::MonteCarlo;
};

inline constexpr int kDistanceShards = 16;

/// Monte-Carlo estimate of || f_{l,a} - f_{l,b} ||_1 by importance sampling
/// from h = (f_a + f_b)/2, stratified half/half. The integrand
/// |f_a - f_b|/h = 2|tanh((log f_a - log f_b)/2)| is bounded by 2.
/// The two parameter sets are put in a canonical order first, so the
/// estimate is exactly symmetric for a fixed seed.
DistanceEstimate l1_marginal_distance(const HmmParams& a, const HmmParams& b, int l,
                                      std::size_t n_mc, std::uint64_t seed);

/// Adaptive Simpson quadrature of |f_a - f_b| for l = 1 and the Gaussian
/// family, over [min mean - 10 sigma, max mean + 10 sigma].
DistanceEstimate l1_marginal_distance_quadrature(const HmmParams& a, const HmmParams& b,
                                                 double tol = 1e-10);

/// l1 distance times the mixing weight tau(theta).
double weighted_distance(const HmmParams& theta, const HmmParams& theta0, int l,
                         std::size_t n_mc, std::uint64_t seed);

/// Bracketed lower bound relating the l1 distance to parameter
/// discrepancies, without its unknown leading constant.
struct LowerBoundTerms {
  double eps = 0.0;
  double emptied_mass = 0.0;     // weight of states far from every true gamma
  double probability_gap = 0.0;  // sum_I |P_theta(A(I)) - P_theta0(I)|
  double first_moment = 0.0;     // sum_I || sum_{J in A(I)} P(J)(gamma_J - gamma0_I) ||
  double quadratic = 0.0;        // 1/2 sum_I sum_{J in A(I)} P(J)||gamma_J - gamma0_I||^2

  double total() const noexcept { return emptied_mass + probability_gap + first_moment + quadratic; }
};

/// Quarter of the smallest gap between true emission parameters, or 0.5
/// for a single true state.
double default_cell_radius(const HmmParams& theta0);

LowerBoundTerms lower_bound_diagnostic(const HmmParams& theta, const HmmParams& theta0, int l,
                                       double eps);

}  // namespace hmmob
