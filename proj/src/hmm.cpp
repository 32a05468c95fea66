#include "hmmob/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/QR>

#include "hmmob/error.hpp"

namespace hmmob {

namespace {

std::string matrix_to_string(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << (i ? ", [" : "[");
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? ", " : "") << m(i, j);
    os << "]";
  }
  os << "]";
  return os.str();
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

// --- EmissionModel --------------------------------------------------------

EmissionModel EmissionModel::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw PreconditionError("Gaussian emission requires sigma > 0");
  return EmissionModel(EmissionFamily::GaussianKnownVariance, sigma);
}

EmissionModel EmissionModel::poisson() { return EmissionModel(EmissionFamily::Poisson, 1.0); }

bool EmissionModel::admissible(double gamma) const noexcept {
  if (!std::isfinite(gamma)) return false;
  return family_ == EmissionFamily::GaussianKnownVariance || gamma > 0.0;
}

double EmissionModel::log_density(double gamma, double y) const noexcept {
  if (family_ == EmissionFamily::GaussianKnownVariance) {
    const double z = (y - gamma) / sigma_;
    return -0.5 * z * z - std::log(sigma_) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  if (y < 0.0 || y != std::floor(y)) return -kInf;
  return y * std::log(gamma) - gamma - std::lgamma(y + 1.0);
}

double EmissionModel::sample(double gamma, Rng& rng) const {
  if (family_ == EmissionFamily::GaussianKnownVariance) {
    std::normal_distribution<double> d(gamma, sigma_);
    return d(rng);
  }
  std::poisson_distribution<long long> d(gamma);
  return static_cast<double>(d(rng));
}

// --- HmmParams ------------------------------------------------------------

HmmParams::HmmParams(Eigen::MatrixXd transition, std::vector<double> gammas,
                     EmissionModel emission)
    : transition_(std::move(transition)), gammas_(std::move(gammas)), emission_(emission) {
  const auto k = static_cast<Eigen::Index>(gammas_.size());
  if (k < 1) throw PreconditionError("HmmParams needs at least one state");
  if (transition_.rows() != k || transition_.cols() != k)
    throw PreconditionError("transition matrix must be k x k with k = number of gammas");
  for (Eigen::Index i = 0; i < k; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double v = transition_(i, j);
      if (!(v >= 0.0) || !std::isfinite(v))
        throw PreconditionError("transition row " + std::to_string(i) + " has a negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowTolerance)
      throw PreconditionError("transition row " + std::to_string(i) + " does not sum to 1");
  }
  for (double g : gammas_)
    if (!emission_.admissible(g)) throw PreconditionError("inadmissible emission parameter");
}

HmmParams HmmParams::two_state(double p, double q, double gamma1, double gamma2,
                               EmissionModel emission) {
  Eigen::MatrixXd t(2, 2);
  t << 1.0 - p, p, q, 1.0 - q;
  return HmmParams(std::move(t), {gamma1, gamma2}, emission);
}

HmmParams HmmParams::permuted(std::span<const int> perm) const {
  const int n = k();
  if (static_cast<int>(perm.size()) != n) throw PreconditionError("permutation size mismatch");
  Eigen::MatrixXd t(n, n);
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    g[static_cast<std::size_t>(a)] = gamma(perm[static_cast<std::size_t>(a)]);
    for (int b = 0; b < n; ++b)
      t(a, b) = transition_(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
  }
  return HmmParams(std::move(t), std::move(g), emission_);
}

HmmParams HmmParams::with_transition(Eigen::MatrixXd transition) const {
  return HmmParams(std::move(transition), gammas_, emission_);
}

HmmParams HmmParams::with_gammas(std::vector<double> gammas) const {
  return HmmParams(transition_, std::move(gammas), emission_);
}

bool operator==(const HmmParams& a, const HmmParams& b) {
  return a.emission_ == b.emission_ && a.gammas_ == b.gammas_ &&
         a.transition_.rows() == b.transition_.rows() && a.transition_ == b.transition_;
}

// --- stationary analysis --------------------------------------------------

StationaryDist stationary_distribution(const HmmParams& theta) {
  return stationary_distribution(theta.transition());
}

StationaryDist stationary_distribution(const Eigen::MatrixXd& q) {
  const int k = static_cast<int>(q.rows());
  if (k == 1) return {Eigen::VectorXd::Ones(1), true};

  Eigen::MatrixXd a(k + 1, k);
  a.topRows(k) = q.transpose() - Eigen::MatrixXd::Identity(k, k);
  a.row(k).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k + 1);
  b[k] = 1.0;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);

  StationaryDist out;
  bool solved = false;
  if (qr.rank() == k) {
    out.mu = qr.solve(b);
    if (out.mu.minCoeff() > -1e-10) {
      out.mu = out.mu.cwiseMax(0.0);
      out.mu /= out.mu.sum();
      solved = true;
    }
  }
  if (!solved) {
    // Several stationary laws: iterate the lazy chain (Q + I)/2 from the
    // uniform vector. It shares Q's stationary laws and is aperiodic.
    out.unique = false;
    const Eigen::MatrixXd lazy = 0.5 * (q + Eigen::MatrixXd::Identity(k, k));
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(k, 1.0 / k);
    for (int it = 0; it < 200000; ++it) {
      Eigen::RowVectorXd next = v * lazy;
      next /= next.sum();
      const double change = (next - v).cwiseAbs().maxCoeff();
      v = next;
      if (change < 1e-16) break;
    }
    out.mu = v.transpose();
  }
  const double residual = (out.mu.transpose() * q - out.mu.transpose()).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-8) || !out.mu.allFinite())
    throw NumericalError("stationary distribution solve failed for Q = " + matrix_to_string(q));
  return out;
}

MixingProfile mixing_profile(const HmmParams& theta) {
  const Eigen::MatrixXd& q = theta.transition();
  double s = 0.0;
  for (Eigen::Index j = 0; j < q.cols(); ++j) s += q.col(j).minCoeff();
  s = std::clamp(s, 0.0, 1.0);
  MixingProfile m;
  m.s = s;
  m.rho = s < 1.0 ? 1.0 / (1.0 - s) : kInf;
  m.tau = s / (2.0 - s);
  return m;
}

double two_state_mixing(const HmmParams& theta) {
  if (theta.k() != 2) throw PreconditionError("two_state_mixing requires k = 2");
  const double sum = theta.q(0, 1) + theta.q(1, 0);
  return std::min(sum, 2.0 - sum);
}

double forgetting_rho(const HmmParams& theta) {
  const double ratio = theta.transition().minCoeff() / theta.transition().maxCoeff();
  return ratio >= 1.0 ? kInf : 1.0 / (1.0 - ratio);
}

// --- simulation -----------------------------------------------------------

ObservationSequence simulate(const HmmParams& theta, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("simulate requires n >= 1");
  Rng rng(seed);
  const StationaryDist st = stationary_distribution(theta);
  const Eigen::MatrixXd& q = theta.transition();

  ObservationSequence obs;
  obs.seed = seed;
  obs.theta_true = theta;
  obs.y.resize(n);
  obs.x_true.resize(n);
  int x = sample_categorical(st.mu, rng);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      const Eigen::VectorXd row = q.row(x).transpose();
      x = sample_categorical(row, rng);
    }
    obs.x_true[t] = x;
    obs.y[t] = theta.emission().sample(theta.gamma(x), rng);
  }
  return obs;
}

// --- likelihood -----------------------------------------------------------

Eigen::MatrixXd emission_log_densities(const HmmParams& theta, std::span<const double> y) {
  const int k = theta.k();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(y.size()), k);
  for (std::size_t t = 0; t < y.size(); ++t)
    for (int j = 0; j < k; ++j)
      out(static_cast<Eigen::Index>(t), j) = theta.emission().log_density(theta.gamma(j), y[t]);
  return out;
}

namespace {

Eigen::RowVectorXd initial_predictive(const HmmParams& theta, const InitSpec& init) {
  const int k = theta.k();
  const Eigen::MatrixXd& q = theta.transition();
  return std::visit(
      [&](const auto& spec) -> Eigen::RowVectorXd {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, PointMass>) {
          if (spec.state < 0 || spec.state >= k)
            throw PreconditionError("initial state out of range");
          return q.row(spec.state);
        } else if constexpr (std::is_same_v<T, InitDistribution>) {
          if (spec.pi0.size() != k || spec.pi0.minCoeff() < 0.0 ||
              std::abs(spec.pi0.sum() - 1.0) > 1e-10)
            throw PreconditionError("initial distribution must be a probability vector of size k");
          return spec.pi0.transpose() * q;
        } else {
          return stationary_distribution(theta).mu.transpose();
        }
      },
      init);
}

}  // namespace

double log_likelihood(const HmmParams& theta, std::span<const double> y, const InitSpec& init) {
  if (y.empty()) throw PreconditionError("log_likelihood requires n >= 1");
  const int k = theta.k();
  const Eigen::MatrixXd& q = theta.transition();
  Eigen::RowVectorXd pred = initial_predictive(theta, init);
  Eigen::RowVectorXd w(k);
  double ll = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    double m = -kInf;
    for (int j = 0; j < k; ++j) {
      w[j] = theta.emission().log_density(theta.gamma(j), y[t]);
      m = std::max(m, w[j]);
    }
    if (!std::isfinite(m)) throw UnderflowError("all emission densities vanish", t);
    for (int j = 0; j < k; ++j) {
      const double d = w[j] - m;
      w[j] = d < kLogUnderflowGuard ? 0.0 : pred[j] * std::exp(d);
    }
    const double c = w.sum();
    if (!(c > 0.0) || !std::isfinite(c))
      throw UnderflowError("predictive mass vanishes on the states that explain y", t);
    ll += m + std::log(c);
    pred = (w / c) * q;
  }
  return ll;
}

double log_likelihood(const HmmParams& theta, const ObservationSequence& obs,
                      const InitSpec& init) {
  return log_likelihood(theta, obs.y, init);
}

std::vector<double> prediction_filter(const HmmParams& theta, std::span<const double> y) {
  if (theta.k() != 2) throw PreconditionError("prediction_filter requires k = 2");
  const double p = theta.q(0, 1);
  const double q = theta.q(1, 0);
  if (!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0))
    throw PreconditionError("prediction_filter requires p, q in (0, 1)");
  std::vector<double> out;
  out.reserve(y.size());
  if (y.empty()) return out;
  double pk = q / (p + q);
  out.push_back(pk);
  for (std::size_t t = 0; t + 1 < y.size(); ++t) {
    const double l1 = theta.emission().log_density(theta.gamma(0), y[t]);
    const double l2 = theta.emission().log_density(theta.gamma(1), y[t]);
    const double m = std::max(l1, l2);
    if (!std::isfinite(m)) throw UnderflowError("prediction filter denominator vanished", t);
    const double g1 = l1 - m < kLogUnderflowGuard ? 0.0 : std::exp(l1 - m);
    const double g2 = l2 - m < kLogUnderflowGuard ? 0.0 : std::exp(l2 - m);
    const double den = pk * g1 + (1.0 - pk) * g2;
    if (!(den > 0.0)) throw UnderflowError("prediction filter denominator vanished", t);
    pk = ((1.0 - p) * pk * g1 + q * (1.0 - pk) * g2) / den;
    out.push_back(pk);
  }
  return out;
}

Eigen::MatrixXd stationary_jacobian_fd(const HmmParams& theta, double h) {
  const int k = theta.k();
  if (!(h > 0.0)) throw PreconditionError("finite-difference step must be positive");
  const Eigen::MatrixXd& q = theta.transition();
  if (q.minCoeff() <= h)
    throw PreconditionError("finite-difference step too large: perturbed rows leave the simplex");
  Eigen::MatrixXd jac(k, k * (k - 1));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j + 1 < k; ++j) {
      Eigen::MatrixXd plus = q;
      Eigen::MatrixXd minus = q;
      plus(i, j) += h;
      plus(i, k - 1) -= h;
      minus(i, j) -= h;
      minus(i, k - 1) += h;
      const Eigen::VectorXd mu_plus = stationary_distribution(theta.with_transition(plus)).mu;
      const Eigen::VectorXd mu_minus = stationary_distribution(theta.with_transition(minus)).mu;
      jac.col(i * (k - 1) + j) = (mu_plus - mu_minus) / (2.0 * h);
    }
  }
  return jac;
}

}  // namespace hmmob
