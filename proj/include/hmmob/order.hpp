#pragma once

#include <cstddef>
#include <map>
#include <span>

#include "hmmob/hmm.hpp"
#include "hmmob/priors.hpp"
#include "hmmob/sampler.hpp"

namespace hmmob {

enum class RowPriorKind { DirichletType, ExponentialType };

RowPriorKind kind_of(const RowPrior& prior);

/// u_n = w_n^u_exponent, v_n = w_n^v_exponent. Any 0 < u_exponent < 1 and
/// v_exponent > u_exponent makes v_n/u_n and w_n/u_n vanish.
struct ScheduleOptions {
  double u_exponent = 2.0 / 3.0;
  double v_exponent = 5.0 / 6.0;
  double w_scale = 1.0;

  void validate() const;
};

struct ThresholdSchedule {
  double n = 0.0;
  int k = 0;
  int d = 1;
  RowPriorKind prior_kind = RowPriorKind::DirichletType;
  double alpha_bar = 0.0;  // 0 for exponential-type priors
  double u_n = 0.0;
  double v_n = 0.0;
  double w_n = 0.0;
  ScheduleOptions options;
  /// log of the sample size from which w_n < 1 (hence v_n < u_n and
  /// w_n < u_n) holds for good; may be +inf for tiny rate exponents.
  double log_n_min = 0.0;

  bool ordered() const noexcept { return v_n < u_n && w_n < u_n; }
};

/// Rate w_n for a real sample size n > 1:
///   Dirichlet:   n^{-(abar - k(k-1+d)) / (2 abar)} log n
///   exponential: n^{-1/2} (log n)^{3/2}
/// Throws RateConditionError when abar <= k(k-1+d).
double rate_w(double n, int k, int d, const RowPrior& prior, double w_scale = 1.0);

ThresholdSchedule threshold_schedule(std::size_t n, int k, int d, const RowPrior& prior,
                                     const ScheduleOptions& options = {});

struct OrderCount {
  int order = 1;
  int retained = 0;  // |J(theta)|
  bool emptied_all = false;
};

/// Number of merge classes among states with stationary weight >= u_n.
/// State i belongs to A_j when mu(j) ||gamma_j - gamma_i||^2 <= v_n; two
/// retained states merge when a chain of intersecting A-sets links them.
OrderCount merged_state_count(const HmmParams& theta, double u_n, double v_n);

struct OrderPosterior {
  std::map<int, double> pmf;
  int mode = 1;
  std::size_t n_samples = 0;
  std::size_t emptied_all_count = 0;
};

OrderPosterior posterior_order(std::span<const HmmParams> samples,
                               const ThresholdSchedule& schedule);
OrderPosterior posterior_order(const PosteriorTrace& trace, const ThresholdSchedule& schedule);

}  // namespace hmmob
