#include "hmmob/priors.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

#include "hmmob/error.hpp"

namespace hmmob {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNormalizerSamples = 1'000'000;
constexpr std::uint64_t kNormalizerSeed = 0x5eed'0f'ef1ULL;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_row(std::span<const double> u) {
  for (double v : u)
    if (v < 0.0 || !std::isfinite(v)) throw PreconditionError("row has a negative coordinate");
}

}  // namespace

const std::vector<double>& DirichletType::row(int i) const {
  return per_row.empty() ? alphas : per_row.at(static_cast<std::size_t>(i));
}

double DirichletType::alpha_bar() const {
  if (per_row.empty()) {
    double s = 0.0;
    for (double a : alphas) s += a;
    return s;
  }
  double best = kInf;
  for (const auto& r : per_row) {
    double s = 0.0;
    for (double a : r) s += a;
    best = std::min(best, s);
  }
  return best;
}

void validate(const RowPrior& prior, int k) {
  std::visit(Overloaded{
                 [k](const DirichletType& d) {
                   auto check = [k](const std::vector<double>& a) {
                     if (static_cast<int>(a.size()) != k)
                       throw PreconditionError("Dirichlet prior needs k concentration parameters");
                     for (double v : a)
                       if (!(v > 0.0) || !std::isfinite(v))
                         throw PreconditionError("Dirichlet concentrations must be positive");
                   };
                   if (d.per_row.empty()) {
                     check(d.alphas);
                   } else {
                     if (static_cast<int>(d.per_row.size()) != k)
                       throw PreconditionError("per-row Dirichlet prior needs k rows");
                     for (const auto& r : d.per_row) check(r);
                   }
                 },
                 [](const ExponentialType& e) {
                   if (!(e.C > 0.0) || !std::isfinite(e.C))
                     throw PreconditionError("exponential-type prior requires C > 0");
                 },
             },
             prior);
}

void validate(const EmissionPrior& prior, const EmissionModel& emission) {
  std::visit(Overloaded{
                 [&](const GaussianMean& g) {
                   if (emission.family() != EmissionFamily::GaussianKnownVariance)
                     throw PreconditionError("Gaussian-mean prior needs the Gaussian family");
                   if (!(g.s0 > 0.0) || !std::isfinite(g.m0))
                     throw PreconditionError("Gaussian-mean prior requires s0 > 0");
                 },
                 [&](const GammaRate& g) {
                   if (emission.family() != EmissionFamily::Poisson)
                     throw PreconditionError("Gamma-rate prior needs the Poisson family");
                   if (!(g.a0 > 0.0) || !(g.b0 > 0.0))
                     throw PreconditionError("Gamma-rate prior requires a0, b0 > 0");
                 },
             },
             prior);
}

EmissionPrior default_emission_prior(const EmissionModel& emission) {
  if (emission.family() == EmissionFamily::Poisson) return GammaRate{};
  return GaussianMean{};
}

double dirichlet_log_density(std::span<const double> u, std::span<const double> alpha) {
  if (u.size() != alpha.size()) throw PreconditionError("row and alpha sizes differ");
  check_row(u);
  double alpha_bar = 0.0;
  double out = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    alpha_bar += alpha[i];
    out -= std::lgamma(alpha[i]);
    if (alpha[i] == 1.0) continue;
    if (u[i] == 0.0) return alpha[i] > 1.0 ? -kInf : kInf;
    out += (alpha[i] - 1.0) * std::log(u[i]);
  }
  return out + std::lgamma(alpha_bar);
}

double exponential_log_normalizer(int k, double C) {
  if (k < 1) throw PreconditionError("k must be positive");
  if (k == 1) return 0.0;
  static std::mutex mutex;
  static std::map<std::pair<int, double>, double> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_pair(k, C);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  // Uniform Dirichlet(1,...,1) proposal has density (k-1)! on the free coordinates.
  Rng rng(split_seed(kNormalizerSeed, static_cast<std::uint64_t>(k)));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
  std::vector<double> logs(kNormalizerSamples);
  double m = -kInf;
  for (auto& v : logs) {
    const Eigen::VectorXd u = sample_dirichlet(ones, rng);
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) s += 1.0 / u[j];
    v = -C * s;
    m = std::max(m, v);
  }
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - m);
  const double log_mean = m + std::log(acc / static_cast<double>(kNormalizerSamples));
  const double result = log_mean - std::lgamma(static_cast<double>(k));
  cache.emplace(key, result);
  return result;
}

double exponential_acceptance_rate(int k, double C) {
  if (k == 1) return 1.0;
  const double kk = static_cast<double>(k);
  return std::exp(exponential_log_normalizer(k, C) + std::lgamma(kk) + C * kk * kk);
}

double exponential_row_log_density(std::span<const double> u, double C) {
  check_row(u);
  if (u.size() == 1) return 0.0;
  double s = 0.0;
  for (double v : u) {
    if (v == 0.0) return -kInf;
    s += 1.0 / v;
  }
  return -C * s - exponential_log_normalizer(static_cast<int>(u.size()), C);
}

double row_log_density(std::span<const double> u, const RowPrior& prior, int row_index) {
  return std::visit(Overloaded{
                        [&](const DirichletType& d) {
                          return dirichlet_log_density(u, d.row(row_index));
                        },
                        [&](const ExponentialType& e) {
                          return exponential_row_log_density(u, e.C);
                        },
                    },
                    prior);
}

double emission_log_prior(double gamma, const EmissionPrior& prior) {
  return std::visit(Overloaded{
                        [&](const GaussianMean& g) {
                          const double z = (gamma - g.m0) / g.s0;
                          return -0.5 * z * z - std::log(g.s0) -
                                 0.5 * std::log(2.0 * std::numbers::pi);
                        },
                        [&](const GammaRate& g) {
                          if (!(gamma > 0.0)) return -kInf;
                          return g.a0 * std::log(g.b0) - std::lgamma(g.a0) +
                                 (g.a0 - 1.0) * std::log(gamma) - g.b0 * gamma;
                        },
                    },
                    prior);
}

double log_prior(const HmmParams& theta, const RowPrior& row_prior,
                 const EmissionPrior& em_prior) {
  const int k = theta.k();
  double out = 0.0;
  std::vector<double> row(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = theta.q(i, j);
    out += row_log_density(row, row_prior, i);
  }
  for (double g : theta.gammas()) out += emission_log_prior(g, em_prior);
  return out;
}

Eigen::VectorXd sample_row(const RowPrior& prior, int row_index, int k, Rng& rng) {
  if (k == 1) return Eigen::VectorXd::Ones(1);
  return std::visit(
      Overloaded{
          [&](const DirichletType& d) -> Eigen::VectorXd {
            const auto& a = d.row(row_index);
            return sample_dirichlet(Eigen::Map<const Eigen::VectorXd>(a.data(), k), rng);
          },
          [&](const ExponentialType& e) -> Eigen::VectorXd {
            const double rate = exponential_acceptance_rate(k, e.C);
            if (rate < 1e-6)
              throw SamplerStuckError("exponential-type rejection sampler acceptance rate " +
                                      std::to_string(rate) + " below 1e-6");
            const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
            const double floor = static_cast<double>(k) * k;
            for (;;) {
              Eigen::VectorXd u = sample_dirichlet(ones, rng);
              double s = 0.0;
              for (Eigen::Index j = 0; j < k; ++j) s += 1.0 / u[j];
              if (std::log(uniform01(rng)) <= -e.C * (s - floor)) return u;
            }
          },
      },
      prior);
}

double sample_emission(const EmissionPrior& prior, Rng& rng) {
  return std::visit(Overloaded{
                        [&](const GaussianMean& g) {
                          std::normal_distribution<double> d(g.m0, g.s0);
                          return d(rng);
                        },
                        [&](const GammaRate& g) {
                          double x = 0.0;
                          while (!(x > 0.0)) x = std::exp(sample_log_gamma(g.a0, rng)) / g.b0;
                          return x;
                        },
                    },
                    prior);
}

HmmParams sample_prior(int k, const RowPrior& row_prior, const EmissionPrior& em_prior,
                       const EmissionModel& emission, Rng& rng) {
  validate(row_prior, k);
  validate(em_prior, emission);
  Eigen::MatrixXd q(k, k);
  for (int i = 0; i < k; ++i) q.row(i) = sample_row(row_prior, i, k, rng).transpose();
  std::vector<double> gammas(static_cast<std::size_t>(k));
  for (auto& g : gammas) g = sample_emission(em_prior, rng);
  return HmmParams(std::move(q), std::move(gammas), emission);
}

HmmParams sample_prior(int k, const RowPrior& row_prior, const EmissionPrior& em_prior,
                       const EmissionModel& emission, std::uint64_t seed) {
  Rng rng(seed);
  return sample_prior(k, row_prior, em_prior, emission, rng);
}

}  // namespace hmmob
