#include "hmmob/sampler.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "hmmob/error.hpp"

namespace hmmob {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double log_path_start(const Eigen::MatrixXd& q, int x1) {
  return std::log(stationary_distribution(q).mu[x1]);
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_iter < 1 || burn_in < 0 || thin < 1)
    throw PreconditionError("sampler config needs n_iter >= 1, burn_in >= 0, thin >= 1");
  if (burn_in >= n_iter) throw PreconditionError("burn_in must be smaller than n_iter");
  if (!(rw_scale > 0.0)) throw PreconditionError("rw_scale must be positive");
}

std::vector<int> ffbs_states(const HmmParams& theta, std::span<const double> y, Rng& rng) {
  const std::size_t n = y.size();
  if (n == 0) throw PreconditionError("ffbs_states requires n >= 1");
  const int k = theta.k();
  if (k == 1) return std::vector<int>(n, 0);
  const Eigen::MatrixXd& q = theta.transition();
  const Eigen::MatrixXd lg = emission_log_densities(theta, y);

  Eigen::MatrixXd filt(static_cast<Eigen::Index>(n), k);
  Eigen::RowVectorXd pred = stationary_distribution(theta).mu.transpose();
  for (std::size_t t = 0; t < n; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const double m = lg.row(ti).maxCoeff();
    if (!std::isfinite(m)) throw UnderflowError("all emission densities vanish", t);
    Eigen::RowVectorXd w(k);
    for (int j = 0; j < k; ++j) {
      const double d = lg(ti, j) - m;
      w[j] = d < kLogUnderflowGuard ? 0.0 : pred[j] * std::exp(d);
    }
    const double c = w.sum();
    if (!(c > 0.0) || !std::isfinite(c))
      throw UnderflowError("predictive mass vanishes on the states that explain y", t);
    filt.row(ti) = w / c;
    pred = filt.row(ti) * q;
  }

  std::vector<int> path(n);
  Eigen::VectorXd w = filt.row(static_cast<Eigen::Index>(n - 1)).transpose();
  path[n - 1] = sample_categorical(w, rng);
  for (std::size_t t = n - 1; t-- > 0;) {
    const auto ti = static_cast<Eigen::Index>(t);
    for (int j = 0; j < k; ++j) w[j] = filt(ti, j) * q(j, path[t + 1]);
    path[t] = sample_categorical(w, rng);
  }
  return path;
}

std::vector<int> ffbs_states(const HmmParams& theta, std::span<const double> y,
                             std::uint64_t seed) {
  Rng rng(seed);
  return ffbs_states(theta, y, rng);
}

Eigen::MatrixXd transition_counts(std::span<const int> path, int k) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] < 0 || path[t] >= k) throw PreconditionError("path entry out of range");
    if (t > 0) counts(path[t - 1], path[t]) += 1.0;
  }
  return counts;
}

Eigen::MatrixXd gibbs_rows(std::span<const int> path, int k, const DirichletType& prior,
                           Rng& rng) {
  validate(RowPrior{prior}, k);
  const Eigen::MatrixXd counts = transition_counts(path, k);
  Eigen::MatrixXd rows(k, k);
  for (int i = 0; i < k; ++i) {
    const auto& a = prior.row(i);
    const Eigen::VectorXd alpha =
        Eigen::Map<const Eigen::VectorXd>(a.data(), k) + counts.row(i).transpose();
    rows.row(i) = sample_dirichlet(alpha, rng).transpose();
  }
  return rows;
}

Eigen::MatrixXd gibbs_rows(std::span<const int> path, int k, const DirichletType& prior,
                           std::uint64_t seed) {
  Rng rng(seed);
  return gibbs_rows(path, k, prior, rng);
}

RowUpdate dirichlet_rows_step(const HmmParams& theta, std::span<const int> path,
                              const DirichletType& prior, Rng& rng) {
  const int k = theta.k();
  RowUpdate out;
  out.rows = gibbs_rows(path, k, prior, rng);
  if (k == 1 || path.empty()) {
    out.accepted.assign(static_cast<std::size_t>(k), true);
    return out;
  }
  const int x1 = path[0];
  const double log_ratio =
      log_path_start(out.rows, x1) - log_path_start(theta.transition(), x1);
  const bool accept = log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio;
  if (!accept) out.rows = theta.transition();
  out.accepted.assign(static_cast<std::size_t>(k), accept);
  return out;
}

double mh_row_log_accept_ratio(const HmmParams& theta, int row, const Eigen::VectorXd& proposed,
                               std::span<const int> path, double C, double rw_scale,
                               bool stationary_start) {
  const int k = theta.k();
  const Eigen::VectorXd current = theta.transition().row(row).transpose();
  if (proposed == current) return 0.0;
  if (proposed.minCoeff() <= 0.0) return -kInf;
  const Eigen::MatrixXd counts = transition_counts(path, k);

  auto log_target = [&](const Eigen::VectorXd& u) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += counts(row, j) * std::log(u[j]) - C / u[j];
    return s;
  };
  const double conc = 1.0 / rw_scale;
  const Eigen::VectorXd a_fwd = conc * current;
  const Eigen::VectorXd a_bwd = conc * proposed;
  double r = log_target(proposed) - log_target(current) +
             dirichlet_log_density(as_span(current), as_span(a_bwd)) -
             dirichlet_log_density(as_span(proposed), as_span(a_fwd));
  if (stationary_start && !path.empty()) {
    Eigen::MatrixXd q_new = theta.transition();
    q_new.row(row) = proposed.transpose();
    q_new.row(row) /= q_new.row(row).sum();
    r += log_path_start(q_new, path[0]) - log_path_start(theta.transition(), path[0]);
  }
  return r;
}

RowUpdate mh_rows_exponential(const HmmParams& theta, std::span<const int> path, double C,
                              double rw_scale, Rng& rng, bool stationary_start) {
  if (!(C >= 0.0)) throw PreconditionError("exponential-type constant must be nonnegative");
  if (!(rw_scale > 0.0)) throw PreconditionError("rw_scale must be positive");
  const int k = theta.k();
  RowUpdate out;
  out.rows = theta.transition();
  out.accepted.assign(static_cast<std::size_t>(k), true);
  if (k == 1) return out;
  if (out.rows.minCoeff() <= 0.0)
    throw PreconditionError("exponential-type row update needs interior rows");
  HmmParams current = theta;
  const double conc = 1.0 / rw_scale;
  for (int i = 0; i < k; ++i) {
    const Eigen::VectorXd alpha = conc * out.rows.row(i).transpose();
    Eigen::VectorXd proposed = sample_dirichlet(alpha, rng);
    const double log_ratio =
        mh_row_log_accept_ratio(current, i, proposed, path, C, rw_scale, stationary_start);
    const bool accept = log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio;
    out.accepted[static_cast<std::size_t>(i)] = accept;
    if (accept) {
      out.rows.row(i) = proposed.transpose();
      current = current.with_transition(out.rows);
    }
  }
  return out;
}

RowUpdate mh_rows_exponential(const HmmParams& theta, std::span<const int> path, double C,
                              double rw_scale, std::uint64_t seed, bool stationary_start) {
  Rng rng(seed);
  return mh_rows_exponential(theta, path, C, rw_scale, rng, stationary_start);
}

EmissionPosterior emission_posterior(std::span<const int> path, std::span<const double> y,
                                     int k, const EmissionPrior& prior,
                                     const EmissionModel& emission) {
  if (path.size() != y.size()) throw PreconditionError("path and observations differ in length");
  validate(prior, emission);
  std::vector<double> count(static_cast<std::size_t>(k), 0.0);
  std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (path[t] < 0 || path[t] >= k) throw PreconditionError("path entry out of range");
    count[static_cast<std::size_t>(path[t])] += 1.0;
    sum[static_cast<std::size_t>(path[t])] += y[t];
  }
  EmissionPosterior out;
  out.first.resize(static_cast<std::size_t>(k));
  out.second.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    if (const auto* g = std::get_if<GaussianMean>(&prior)) {
      const double s2 = emission.sigma() * emission.sigma();
      const double precision = 1.0 / (g->s0 * g->s0) + count[i] / s2;
      out.first[i] = (g->m0 / (g->s0 * g->s0) + sum[i] / s2) / precision;
      out.second[i] = 1.0 / std::sqrt(precision);
    } else {
      const auto& r = std::get<GammaRate>(prior);
      out.first[i] = r.a0 + sum[i];
      out.second[i] = r.b0 + count[i];
    }
  }
  return out;
}

std::vector<double> gibbs_emissions(std::span<const int> path, std::span<const double> y, int k,
                                    const EmissionPrior& prior, const EmissionModel& emission,
                                    Rng& rng) {
  const EmissionPosterior post = emission_posterior(path, y, k, prior, emission);
  std::vector<double> out(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (emission.family() == EmissionFamily::GaussianKnownVariance) {
      std::normal_distribution<double> d(post.first[i], post.second[i]);
      out[i] = d(rng);
    } else {
      double x = 0.0;
      while (!(x > 0.0)) x = std::exp(sample_log_gamma(post.first[i], rng)) / post.second[i];
      out[i] = x;
    }
  }
  return out;
}

std::vector<double> gibbs_emissions(std::span<const int> path, std::span<const double> y, int k,
                                    const EmissionPrior& prior, const EmissionModel& emission,
                                    std::uint64_t seed) {
  Rng rng(seed);
  return gibbs_emissions(path, y, k, prior, emission, rng);
}

SweepResult gibbs_sweep(const HmmParams& theta, std::span<const double> y,
                        const RowPrior& row_prior, const EmissionPrior& em_prior,
                        double rw_scale, Rng& rng) {
  const int k = theta.k();
  std::vector<int> path = ffbs_states(theta, y, rng);

  RowUpdate rows;
  if (const auto* d = std::get_if<DirichletType>(&row_prior)) {
    rows = dirichlet_rows_step(theta, path, *d, rng);
  } else {
    rows = mh_rows_exponential(theta, path, std::get<ExponentialType>(row_prior).C, rw_scale,
                               rng, true);
  }
  double accepted = 0.0;
  for (bool a : rows.accepted) accepted += a ? 1.0 : 0.0;

  std::vector<double> gammas = gibbs_emissions(path, y, k, em_prior, theta.emission(), rng);
  return SweepResult{HmmParams(std::move(rows.rows), std::move(gammas), theta.emission()),
                     std::move(path), accepted / static_cast<double>(k), 1.0};
}

PosteriorTrace run_chain(std::span<const double> y, int k, const RowPrior& row_prior,
                         const EmissionPrior& em_prior, const EmissionModel& emission,
                         const SamplerConfig& cfg) {
  cfg.validate();
  validate(row_prior, k);
  validate(em_prior, emission);
  if (y.empty()) throw PreconditionError("run_chain requires at least one observation");

  Rng rng(cfg.seed);
  HmmParams theta = std::holds_alternative<UserSupplied>(cfg.init)
                        ? std::get<UserSupplied>(cfg.init).theta
                        : sample_prior(k, row_prior, em_prior, emission, rng);
  if (theta.k() != k || !(theta.emission() == emission))
    throw PreconditionError("initial parameters do not match k or the emission family");

  PosteriorTrace trace;
  trace.config = cfg;
  double rows_sum = 0.0;
  double em_sum = 0.0;
  for (int it = 0; it < cfg.n_iter; ++it) {
    try {
      SweepResult sweep = gibbs_sweep(theta, y, row_prior, em_prior, cfg.rw_scale, rng);
      theta = std::move(sweep.theta);
      if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
        const double lp =
            log_likelihood(theta, y, Stationary{}) + log_prior(theta, row_prior, em_prior);
        trace.iterations.push_back(it);
        trace.samples.push_back(theta);
        trace.log_post.push_back(lp);
        trace.accept_rows.push_back(sweep.accept_rows);
        trace.accept_em.push_back(sweep.accept_em);
        rows_sum += sweep.accept_rows;
        em_sum += sweep.accept_em;
      }
    } catch (const UnderflowError& e) {
      throw UnderflowError("iteration " + std::to_string(it) + ": " + e.what(), e.index());
    }
  }
  const auto n = static_cast<double>(trace.size());
  trace.accept_rate_rows = rows_sum / n;
  trace.accept_rate_em = em_sum / n;
  if (std::holds_alternative<ExponentialType>(row_prior) &&
      (trace.accept_rate_rows < 0.2 || trace.accept_rate_rows > 0.5)) {
    std::ostringstream os;
    os << "row acceptance rate " << trace.accept_rate_rows
       << " outside the 20-50% band; consider adjusting rw_scale";
    trace.warnings.push_back(os.str());
  }
  return trace;
}

}  // namespace hmmob
