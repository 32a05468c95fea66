#pragma once

// Independent oracles shared by the test binaries. Nothing here calls the
// forward recursion or the linear stationary solver.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hmmob/hmm.hpp"

namespace hmmob::testing {

inline double normal_pdf(double y, double mean, double sd) {
  const double z = (y - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

inline double emission_pdf(const EmissionModel& e, double gamma, double y) {
  if (e.family() == EmissionFamily::GaussianKnownVariance) return normal_pdf(y, gamma, e.sigma());
  return std::exp(y * std::log(gamma) - gamma - std::lgamma(y + 1.0));
}

/// Row-stochastic matrix with every entry at least `floor`.
inline Eigen::MatrixXd random_positive_q(int k, std::mt19937_64& rng, double floor = 0.0) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Eigen::MatrixXd q(k, k);
  for (int i = 0; i < k; ++i) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += (q(i, j) = g(rng) + 1e-3);
    q.row(i) /= s;
    q.row(i) = (1.0 - k * floor) * q.row(i).array() + floor;
  }
  return q;
}

inline HmmParams random_gaussian_params(int k, std::mt19937_64& rng, double sigma = 1.0) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> g(static_cast<std::size_t>(k));
  for (auto& v : g) v = u(rng);
  return HmmParams(random_positive_q(k, rng), g, EmissionModel::gaussian(sigma));
}

inline Eigen::VectorXd power_iteration(const Eigen::MatrixXd& q, int iters) {
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(q.rows(), 1.0 / static_cast<double>(q.rows()));
  for (int it = 0; it < iters; ++it) mu = mu * q;
  return mu.transpose() / mu.sum();
}

/// Calls fn(path) for every path in {0..k-1}^n.
inline void for_each_path(int k, int n, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> x(static_cast<std::size_t>(n), 0);
  while (true) {
    fn(x);
    int t = n - 1;
    while (t >= 0 && ++x[static_cast<std::size_t>(t)] == k) x[static_cast<std::size_t>(t--)] = 0;
    if (t < 0) return;
  }
}

/// Joint weight of (x_{1:n}, y_{1:n}) with x_1 drawn from `start`.
inline double path_weight(const HmmParams& th, const std::vector<double>& y,
                          const std::vector<int>& x, const Eigen::VectorXd& start) {
  double w = start[x[0]] * emission_pdf(th.emission(), th.gamma(x[0]), y[0]);
  for (std::size_t t = 1; t < y.size(); ++t)
    w *= th.q(x[t - 1], x[t]) * emission_pdf(th.emission(), th.gamma(x[t]), y[t]);
  return w;
}

/// log p(y) by enumerating every hidden path; `start` is the law of X_1.
inline double brute_force_loglik(const HmmParams& th, const std::vector<double>& y,
                                 const Eigen::VectorXd& start) {
  double total = 0.0;
  for_each_path(th.k(), static_cast<int>(y.size()),
                [&](const std::vector<int>& x) { total += path_weight(th, y, x, start); });
  return std::log(total);
}

}  // namespace hmmob::testing
