#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hmmob/rng.hpp"

namespace hmmob {

enum class EmissionFamily { GaussianKnownVariance, Poisson };

/// Parametric emission family g_gamma(y). Both shipped families have a
/// scalar parameter (dimension 1): a Gaussian mean with known standard
/// deviation, or a Poisson rate.
class EmissionModel {
 public:
  static EmissionModel gaussian(double sigma);
  static EmissionModel poisson();

  EmissionFamily family() const noexcept { return family_; }
  double sigma() const noexcept { return sigma_; }
  int dim() const noexcept { return 1; }

  bool admissible(double gamma) const noexcept;
  double log_density(double gamma, double y) const noexcept;
  double sample(double gamma, Rng& rng) const;

  friend bool operator==(const EmissionModel&, const EmissionModel&) = default;

 private:
  EmissionModel(EmissionFamily family, double sigma) : family_(family), sigma_(sigma) {}

  EmissionFamily family_;
  double sigma_;
};

/// A point theta of the k-state model: transition matrix plus one emission
/// parameter per state. States are 0-based.
class HmmParams {
 public:
  static constexpr double kRowTolerance = 1e-12;

  HmmParams(Eigen::MatrixXd transition, std::vector<double> gammas, EmissionModel emission);

  /// Q = [[1-p, p], [q, 1-q]].
  static HmmParams two_state(double p, double q, double gamma1, double gamma2,
                             EmissionModel emission);

  int k() const noexcept { return static_cast<int>(gammas_.size()); }
  const Eigen::MatrixXd& transition() const noexcept { return transition_; }
  double q(int i, int j) const { return transition_(i, j); }
  const std::vector<double>& gammas() const noexcept { return gammas_; }
  double gamma(int i) const { return gammas_[static_cast<std::size_t>(i)]; }
  const EmissionModel& emission() const noexcept { return emission_; }

  /// Relabel states: new state a is old state perm[a].
  HmmParams permuted(std::span<const int> perm) const;

  HmmParams with_transition(Eigen::MatrixXd transition) const;
  HmmParams with_gammas(std::vector<double> gammas) const;

  friend bool operator==(const HmmParams& a, const HmmParams& b);

 private:
  Eigen::MatrixXd transition_;
  std::vector<double> gammas_;
  EmissionModel emission_;
};

struct StationaryDist {
  Eigen::VectorXd mu;
  /// False when Q admits several stationary laws and the power-iteration
  /// fallback picked one.
  bool unique = true;
};

struct MixingProfile {
  double s = 0.0;    // Doeblin mass sum_j min_i q_ij
  double rho = 1.0;  // 1/(1-s), +inf at s=1
  double tau = 0.0;  // (rho-1)/(2+rho-1) == s/(2-s)
};

struct ObservationSequence {
  std::vector<double> y;
  std::vector<int> x_true;  // 0-based, empty when unknown
  std::uint64_t seed = 0;
  std::optional<HmmParams> theta_true;

  std::size_t size() const noexcept { return y.size(); }
};

struct PointMass {
  int state = 0;
};
struct InitDistribution {
  Eigen::VectorXd pi0;
};
struct Stationary {};

/// Law of the chain before the first emission. PointMass and
/// InitDistribution describe X_0 and take one transition before Y_1 is
/// emitted; Stationary emits Y_1 from X_1 ~ mu directly.
using InitSpec = std::variant<PointMass, InitDistribution, Stationary>;

StationaryDist stationary_distribution(const HmmParams& theta);
/// Same solver on a bare row-stochastic matrix (not re-validated).
StationaryDist stationary_distribution(const Eigen::MatrixXd& q);

MixingProfile mixing_profile(const HmmParams& theta);

/// Alternative two-state coefficient rho-1 = min(p+q, 2-(p+q)).
double two_state_mixing(const HmmParams& theta);

/// Forgetting rate (1 - min q / max q)^{-1} of the filter. Unlike the Doeblin
/// rho this one bounds |l_n(theta, x) - l_n(theta, x')| by 2 (rho/(rho-1))^2.
/// Returns 1 when some transition is zero.
double forgetting_rho(const HmmParams& theta);

ObservationSequence simulate(const HmmParams& theta, std::size_t n, std::uint64_t seed);

/// n x k matrix of log g_{gamma_j}(y_t).
Eigen::MatrixXd emission_log_densities(const HmmParams& theta, std::span<const double> y);

/// Terms more than this far below the per-step maximum log-density are
/// treated as exact zeros.
inline constexpr double kLogUnderflowGuard = -700.0;

double log_likelihood(const HmmParams& theta, std::span<const double> y, const InitSpec& init);
double log_likelihood(const HmmParams& theta, const ObservationSequence& obs,
                      const InitSpec& init);

/// Two-state one-step predictions P(X_t = first state | Y_{1:t-1}), t = 1..n.
std::vector<double> prediction_filter(const HmmParams& theta, std::span<const double> y);

/// Central-difference Jacobian of mu with respect to the free transition
/// coordinates q_ij, j < k-1 (last column absorbs the perturbation).
/// Column i*(k-1)+j holds d mu / d q_ij.
Eigen::MatrixXd stationary_jacobian_fd(const HmmParams& theta, double h);

}  // namespace hmmob
