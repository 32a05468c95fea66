#include "hmmob/order.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "hmmob/error.hpp"

namespace hmmob {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// log w as a function of L = log n, with the Dirichlet or exponential shape.
struct LogRate {
  double log_scale;
  double log_power;  // exponent on L
  double slope;      // w ~ exp(-slope * L)

  double operator()(double L) const { return log_scale + log_power * std::log(L) - slope * L; }
};

LogRate log_rate(int k, int d, const RowPrior& prior, double w_scale) {
  if (const auto* dir = std::get_if<DirichletType>(&prior)) {
    const double abar = dir->alpha_bar();
    const double needed = static_cast<double>(k) * (k - 1 + d);
    if (!(abar > needed)) {
      std::ostringstream os;
      os << "Dirichlet rate condition fails: alpha_bar = " << abar << " must exceed k(k-1+d) = "
         << needed << " (deficit " << needed - abar << ")";
      throw RateConditionError(os.str(), needed - abar);
    }
    return {std::log(w_scale), 1.0, (abar - needed) / (2.0 * abar)};
  }
  return {std::log(w_scale), 1.5, 0.5};
}

double solve_log_n_min(const LogRate& f) {
  // f increases up to L* = power/slope, then decreases to -inf.
  const double peak = f.log_power / f.slope;
  if (f(peak) < 0.0) return 0.0;
  double lo = peak;
  double hi = 2.0 * peak;
  while (f(hi) >= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) return kInf;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) >= 0.0 ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

RowPriorKind kind_of(const RowPrior& prior) {
  return std::holds_alternative<DirichletType>(prior) ? RowPriorKind::DirichletType
                                                      : RowPriorKind::ExponentialType;
}

void ScheduleOptions::validate() const {
  if (!(u_exponent > 0.0 && u_exponent < 1.0 && v_exponent > u_exponent))
    throw PreconditionError("schedule exponents need 0 < u_exponent < 1 and v_exponent > u_exponent");
  if (!(w_scale > 0.0)) throw PreconditionError("w_scale must be positive");
}

double rate_w(double n, int k, int d, const RowPrior& prior, double w_scale) {
  if (!(n > 1.0)) throw PreconditionError("rate_w needs n > 1");
  const LogRate f = log_rate(k, d, prior, w_scale);
  return std::exp(f(std::log(n)));
}

ThresholdSchedule threshold_schedule(std::size_t n, int k, int d, const RowPrior& prior,
                                     const ScheduleOptions& options) {
  options.validate();
  validate(prior, k);
  const LogRate f = log_rate(k, d, prior, options.w_scale);
  if (n < 8) throw PreconditionError("threshold_schedule needs n >= 8");
  ThresholdSchedule s;
  s.n = static_cast<double>(n);
  s.k = k;
  s.d = d;
  s.prior_kind = kind_of(prior);
  if (const auto* dir = std::get_if<DirichletType>(&prior)) s.alpha_bar = dir->alpha_bar();
  s.options = options;
  s.w_n = std::exp(f(std::log(s.n)));
  s.u_n = std::pow(s.w_n, options.u_exponent);
  s.v_n = std::pow(s.w_n, options.v_exponent);
  s.log_n_min = solve_log_n_min(f);
  return s;
}

OrderCount merged_state_count(const HmmParams& theta, double u_n, double v_n) {
  if (!(u_n > 0.0) || !(v_n > 0.0)) throw PreconditionError("thresholds must be positive");
  const int k = theta.k();
  const Eigen::VectorXd mu = stationary_distribution(theta).mu;

  std::vector<int> kept;
  for (int j = 0; j < k; ++j)
    if (mu[j] >= u_n) kept.push_back(j);
  OrderCount out;
  out.retained = static_cast<int>(kept.size());
  if (kept.empty()) {
    out.emptied_all = true;
    out.order = 1;
    return out;
  }

  const std::size_t m = kept.size();
  // member[a][b]: kept[b] is in A_{kept[a]}
  std::vector<std::vector<bool>> member(m, std::vector<bool>(m, false));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      const double diff = theta.gamma(kept[a]) - theta.gamma(kept[b]);
      member[a][b] = mu[kept[a]] * diff * diff <= v_n;
    }

  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      bool meet = false;
      for (std::size_t c = 0; c < m && !meet; ++c) meet = member[a][c] && member[b][c];
      if (meet) parent[find(a)] = find(b);
    }
  int classes = 0;
  for (std::size_t a = 0; a < m; ++a)
    if (find(a) == a) ++classes;
  out.order = classes;
  return out;
}

OrderPosterior posterior_order(std::span<const HmmParams> samples,
                               const ThresholdSchedule& schedule) {
  if (samples.empty()) throw PreconditionError("posterior_order needs a nonempty trace");
  OrderPosterior out;
  std::map<int, std::size_t> counts;
  for (const auto& theta : samples) {
    const OrderCount c = merged_state_count(theta, schedule.u_n, schedule.v_n);
    ++counts[c.order];
    if (c.emptied_all) ++out.emptied_all_count;
  }
  out.n_samples = samples.size();
  std::size_t best = 0;
  for (const auto& [order, count] : counts) {
    out.pmf[order] = static_cast<double>(count) / static_cast<double>(samples.size());
    if (count > best) {  // map order gives the smallest-order tie-break
      best = count;
      out.mode = order;
    }
  }
  return out;
}

OrderPosterior posterior_order(const PosteriorTrace& trace, const ThresholdSchedule& schedule) {
  return posterior_order(std::span<const HmmParams>(trace.samples), schedule);
}

}  // namespace hmmob
