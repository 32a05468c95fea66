#include "hmmob/rng.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "hmmob/error.hpp"

namespace hmmob {

double uniform01(Rng& rng) {
  // 53 random bits, open at 0 so that log(u) is finite.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u > 0.0 ? u : 0x1.0p-54;
}

double sample_log_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw PreconditionError("gamma shape must be positive");
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    double x = g(rng);
    while (x <= 0.0) x = g(rng);
    return std::log(x);
  }
  // Gamma(a) = Gamma(a+1) * U^(1/a)
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  double x = g(rng);
  while (x <= 0.0) x = g(rng);
  return std::log(x) + std::log(uniform01(rng)) / shape;
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& alpha, Rng& rng) {
  const Eigen::Index k = alpha.size();
  Eigen::VectorXd logs(k);
  for (Eigen::Index i = 0; i < k; ++i) logs[i] = sample_log_gamma(alpha[i], rng);
  const double m = logs.maxCoeff();
  Eigen::VectorXd out = (logs.array() - m).exp().matrix();
  out /= out.sum();
  return out;
}

int sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericalError("categorical weights have no positive finite mass");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = static_cast<int>(i);
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return last_positive;
}

int sample_categorical(const Eigen::VectorXd& weights, Rng& rng) {
  return sample_categorical(std::span<const double>(weights.data(), weights.size()), rng);
}

}  // namespace hmmob
