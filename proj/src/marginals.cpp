#include "hmmob/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "hmmob/error.hpp"
#include "hmmob/rng.hpp"

namespace hmmob {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Forward pass over state tuples, in log space.
double log_marginal(const HmmParams& theta, const Eigen::VectorXd& mu,
                    const Eigen::MatrixXd& log_q, std::span<const double> y) {
  const int k = theta.k();
  std::vector<double> alpha(static_cast<std::size_t>(k));
  std::vector<double> next(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    alpha[static_cast<std::size_t>(i)] =
        std::log(mu[i]) + theta.emission().log_density(theta.gamma(i), y[0]);
  for (std::size_t t = 1; t < y.size(); ++t) {
    for (int j = 0; j < k; ++j) {
      double s = -kInf;
      for (int i = 0; i < k; ++i) s = log_add(s, alpha[static_cast<std::size_t>(i)] + log_q(i, j));
      next[static_cast<std::size_t>(j)] = s + theta.emission().log_density(theta.gamma(j), y[t]);
    }
    std::swap(alpha, next);
  }
  double out = -kInf;
  for (double a : alpha) out = log_add(out, a);
  return out;
}

/// Precomputed pieces for repeated density evaluation and sampling.
struct MarginalModel {
  const HmmParams* theta;
  Eigen::VectorXd mu;
  Eigen::MatrixXd log_q;

  explicit MarginalModel(const HmmParams& t)
      : theta(&t), mu(stationary_distribution(t).mu), log_q(t.transition().array().log()) {}

  double log_density(std::span<const double> y) const { return log_marginal(*theta, mu, log_q, y); }

  void sample(std::span<double> out, Rng& rng) const {
    int x = sample_categorical(mu, rng);
    for (std::size_t t = 0; t < out.size(); ++t) {
      if (t > 0) {
        const Eigen::VectorXd row = theta->transition().row(x).transpose();
        x = sample_categorical(row, rng);
      }
      out[t] = theta->emission().sample(theta->gamma(x), rng);
    }
  }
};

/// Relabels states in (gamma, q_ii) order so that any permutation of the
/// same parameters maps to one representative.
HmmParams canonical_labels(const HmmParams& t) {
  std::vector<int> order(static_cast<std::size_t>(t.k()));
  for (int i = 0; i < t.k(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    if (t.gamma(i) != t.gamma(j)) return t.gamma(i) < t.gamma(j);
    return t.q(i, i) < t.q(j, j);
  });
  return t.permuted(order);
}

bool canonical_less(const HmmParams& a, const HmmParams& b) {
  if (a.k() != b.k()) return a.k() < b.k();
  if (a.gammas() != b.gammas()) return a.gammas() < b.gammas();
  const Eigen::MatrixXd& qa = a.transition();
  const Eigen::MatrixXd& qb = b.transition();
  for (Eigen::Index i = 0; i < qa.size(); ++i)
    if (qa.data()[i] != qb.data()[i]) return qa.data()[i] < qb.data()[i];
  return false;
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

void MarginalSpec::validate() const {
  if (l < 1 || l > kMaxDimension)
    throw PreconditionError("marginal dimension l must lie in [1, 4]");
}

double log_marginal_density(const HmmParams& theta, std::span<const double> y) {
  MarginalSpec{static_cast<int>(y.size())}.validate();
  const MarginalModel model(theta);
  return model.log_density(y);
}

MarginalValue marginal_density(const HmmParams& theta, int l, std::span<const double> y) {
  MarginalSpec{l}.validate();
  if (static_cast<int>(y.size()) != l) throw PreconditionError("y tuple length must equal l");
  MarginalValue out;
  out.log_value = log_marginal_density(theta, y);
  out.value = std::exp(out.log_value);
  out.underflow = !(out.value > 0.0) || out.log_value < std::log(std::numeric_limits<double>::min());
  if (out.underflow) out.value = 0.0;
  return out;
}

DistanceEstimate l1_marginal_distance(const HmmParams& a, const HmmParams& b, int l,
                                      std::size_t n_mc, std::uint64_t seed) {
  MarginalSpec{l}.validate();
  if (n_mc < 100) throw PreconditionError("l1_marginal_distance needs n_mc >= 100");
  if (!(a.emission() == b.emission()))
    throw PreconditionError("distance requires the same emission family");
  DistanceEstimate out;
  out.n_mc = n_mc;
  out.method = DistanceMethod::MonteCarlo;
  const HmmParams ca = canonical_labels(a);
  const HmmParams cb = canonical_labels(b);
  if (ca == cb) return out;

  const bool swap = canonical_less(cb, ca);
  const HmmParams& first = swap ? cb : ca;
  const HmmParams& second = swap ? ca : cb;
  const MarginalModel mf(first);
  const MarginalModel ms(second);

  // Side 0 samples from `first`, side 1 from `second`.
  const std::size_t per_side[2] = {(n_mc + 1) / 2, n_mc / 2};
  double sum[2] = {0.0, 0.0};
  double sum_sq[2] = {0.0, 0.0};
  std::vector<double> y(static_cast<std::size_t>(l));
  for (int side = 0; side < 2; ++side) {
    const MarginalModel& src = side == 0 ? mf : ms;
    for (int shard = 0; shard < kDistanceShards; ++shard) {
      const std::size_t begin = per_side[side] * static_cast<std::size_t>(shard) / kDistanceShards;
      const std::size_t end =
          per_side[side] * static_cast<std::size_t>(shard + 1) / kDistanceShards;
      Rng rng(split_seed(seed, static_cast<std::uint64_t>(side * kDistanceShards + shard)));
      for (std::size_t s = begin; s < end; ++s) {
        src.sample(y, rng);
        const double diff = mf.log_density(y) - ms.log_density(y);
        double v;
        if (std::isnan(diff)) {
          v = 0.0;  // both densities vanish
        } else {
          v = 2.0 * std::abs(std::tanh(0.5 * diff));
        }
        sum[side] += v;
        sum_sq[side] += v * v;
      }
    }
  }
  double var_term = 0.0;
  double mean = 0.0;
  for (int side = 0; side < 2; ++side) {
    const auto n = static_cast<double>(per_side[side]);
    const double m = sum[side] / n;
    const double var = n > 1.0 ? std::max(0.0, (sum_sq[side] - n * m * m) / (n - 1.0)) : 0.0;
    mean += 0.5 * m;
    var_term += var / n;
  }
  out.value = mean;
  out.std_err = 0.5 * std::sqrt(var_term);
  return out;
}

DistanceEstimate l1_marginal_distance_quadrature(const HmmParams& a, const HmmParams& b,
                                                 double tol) {
  if (!(a.emission() == b.emission()) ||
      a.emission().family() != EmissionFamily::GaussianKnownVariance)
    throw PreconditionError("quadrature distance needs two Gaussian-family parameter sets");
  const MarginalModel ma(a);
  const MarginalModel mb(b);
  auto f = [&](double y) {
    const double v[1] = {y};
    return std::abs(std::exp(ma.log_density(v)) - std::exp(mb.log_density(v)));
  };
  const double sigma = a.emission().sigma();
  double lo = kInf;
  double hi = -kInf;
  for (const auto* t : {&a, &b})
    for (double g : t->gammas()) {
      lo = std::min(lo, g);
      hi = std::max(hi, g);
    }
  lo -= 10.0 * sigma;
  hi += 10.0 * sigma;
  // Split the range into panels so that narrow features are not skipped.
  constexpr int kPanels = 64;
  double total = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double x0 = lo + (hi - lo) * p / kPanels;
    const double x1 = lo + (hi - lo) * (p + 1) / kPanels;
    const double f0 = f(x0);
    const double f1 = f(x1);
    const double fm = f(0.5 * (x0 + x1));
    const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
    total += adaptive_simpson(f, x0, x1, f0, fm, f1, whole, tol / kPanels, 40);
  }
  DistanceEstimate out;
  out.value = total;
  out.std_err = 0.0;
  out.n_mc = 0;
  out.method = DistanceMethod::Quadrature1D;
  return out;
}

double weighted_distance(const HmmParams& theta, const HmmParams& theta0, int l,
                         std::size_t n_mc, std::uint64_t seed) {
  return l1_marginal_distance(theta, theta0, l, n_mc, seed).value * mixing_profile(theta).tau;
}

double default_cell_radius(const HmmParams& theta0) {
  const auto& g = theta0.gammas();
  if (g.size() == 1) return 0.5;
  double gap = kInf;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j) gap = std::min(gap, std::abs(g[i] - g[j]));
  return 0.25 * gap;
}

LowerBoundTerms lower_bound_diagnostic(const HmmParams& theta, const HmmParams& theta0, int l,
                                       double eps) {
  MarginalSpec{l}.validate();
  if (!(theta.emission() == theta0.emission()))
    throw PreconditionError("diagnostic requires the same emission family");
  if (!(eps > 0.0)) throw PreconditionError("cell radius eps must be positive");
  const int k = theta.k();
  const int k0 = theta0.k();
  const auto& g0 = theta0.gammas();
  for (int i = 0; i < k0; ++i)
    for (int j = i + 1; j < k0; ++j) {
      const double gap = std::abs(g0[static_cast<std::size_t>(i)] - g0[static_cast<std::size_t>(j)]);
      if (gap == 0.0) throw PreconditionError("true emission parameters must be distinct");
      if (eps >= 0.5 * gap)
        throw PreconditionError("cell radius eps overlaps cells of distinct true states");
    }

  const Eigen::VectorXd mu = stationary_distribution(theta).mu;
  const Eigen::VectorXd mu0 = stationary_distribution(theta0).mu;

  // cell[j]: the true state whose eps-ball contains gamma_j, or -1.
  std::vector<int> cell(static_cast<std::size_t>(k), -1);
  LowerBoundTerms out;
  out.eps = eps;
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k0; ++i)
      if (std::abs(theta.gamma(j) - g0[static_cast<std::size_t>(i)]) <= eps)
        cell[static_cast<std::size_t>(j)] = i;
    if (cell[static_cast<std::size_t>(j)] < 0) out.emptied_mass += mu[j];
  }

  auto tuple_count = [l](int base) {
    std::size_t n = 1;
    for (int t = 0; t < l; ++t) n *= static_cast<std::size_t>(base);
    return n;
  };
  const std::size_t n_true = tuple_count(k0);
  std::vector<double> mass(n_true, 0.0);
  std::vector<double> quad(n_true, 0.0);
  std::vector<std::vector<double>> moment(n_true, std::vector<double>(static_cast<std::size_t>(l), 0.0));

  std::vector<int> idx(static_cast<std::size_t>(l));
  const std::size_t n_fit = tuple_count(k);
  for (std::size_t code = 0; code < n_fit; ++code) {
    std::size_t c = code;
    for (int t = l - 1; t >= 0; --t) {
      idx[static_cast<std::size_t>(t)] = static_cast<int>(c % static_cast<std::size_t>(k));
      c /= static_cast<std::size_t>(k);
    }
    std::size_t true_code = 0;
    bool inside = true;
    for (int t = 0; t < l; ++t) {
      const int ci = cell[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])];
      if (ci < 0) {
        inside = false;
        break;
      }
      true_code = true_code * static_cast<std::size_t>(k0) + static_cast<std::size_t>(ci);
    }
    if (!inside) continue;
    double p = mu[idx[0]];
    for (int t = 1; t < l; ++t)
      p *= theta.q(idx[static_cast<std::size_t>(t - 1)], idx[static_cast<std::size_t>(t)]);
    mass[true_code] += p;
    for (int t = 0; t < l; ++t) {
      const int j = idx[static_cast<std::size_t>(t)];
      const double dev = theta.gamma(j) - g0[static_cast<std::size_t>(cell[static_cast<std::size_t>(j)])];
      moment[true_code][static_cast<std::size_t>(t)] += p * dev;
      quad[true_code] += p * dev * dev;
    }
  }

  for (std::size_t code = 0; code < n_true; ++code) {
    std::size_t c = code;
    for (int t = l - 1; t >= 0; --t) {
      idx[static_cast<std::size_t>(t)] = static_cast<int>(c % static_cast<std::size_t>(k0));
      c /= static_cast<std::size_t>(k0);
    }
    double p0 = mu0[idx[0]];
    for (int t = 1; t < l; ++t)
      p0 *= theta0.q(idx[static_cast<std::size_t>(t - 1)], idx[static_cast<std::size_t>(t)]);
    out.probability_gap += std::abs(mass[code] - p0);
    double norm2 = 0.0;
    for (double m : moment[code]) norm2 += m * m;
    out.first_moment += std::sqrt(norm2);
    out.quadratic += 0.5 * quad[code];
  }
  return out;
}

}  // namespace hmmob
