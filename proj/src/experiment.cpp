#include "hmmob/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "hmmob/error.hpp"
#include "hmmob/marginals.hpp"

namespace hmmob {

namespace fs = std::filesystem;

namespace {

const fs::path kManifest = "manifest.json";

json load_manifest(const ExperimentConfig& cfg) {
  const fs::path path = cfg.output_dir / kManifest;
  if (!fs::exists(path)) throw ConfigError("no manifest at " + path.string() + "; run simulate first");
  json m = json::parse(read_text(path));
  if (m.at("config_hash").get<std::string>() != config_hash(cfg))
    throw ConfigError("config hash mismatch: " + path.string() + " was produced by another config");
  return m;
}

std::vector<DatasetEntry> datasets_of(const json& manifest, const fs::path& root) {
  std::vector<DatasetEntry> out;
  for (const auto& d : manifest.at("datasets"))
    out.push_back({d.at("n").get<std::size_t>(), d.at("replicate").get<int>(),
                   d.at("seed").get<std::uint64_t>(), root / d.at("file").get<std::string>()});
  return out;
}

void check_hash(const std::string& found, const std::string& expected, const fs::path& file) {
  if (found != expected)
    throw ConfigError("config hash mismatch in " + file.string() + " (found '" + found +
                      "', expected '" + expected + "')");
}

fs::path trace_path(const ExperimentConfig& cfg, const DatasetEntry& d) {
  return cfg.output_dir / "traces" / (task_name(d.n, d.replicate) + ".csv");
}

std::size_t n_index_of(const ExperimentConfig& cfg, std::size_t n) {
  const auto it = std::find(cfg.n_grid.begin(), cfg.n_grid.end(), n);
  if (it == cfg.n_grid.end()) throw ConfigError("sample size not in n_grid");
  return static_cast<std::size_t>(it - cfg.n_grid.begin());
}

template <class Fn>
auto with_dataset_context(const DatasetEntry& d, Fn&& fn) {
  try {
    return fn();
  } catch (const UnderflowError& e) {
    throw UnderflowError("dataset " + task_name(d.n, d.replicate) + ": " + e.what(), e.index());
  } catch (const NumericalError& e) {
    throw NumericalError("dataset " + task_name(d.n, d.replicate) + ": " + e.what());
  }
}

std::vector<TraceFile> load_traces(const ExperimentConfig& cfg, const std::vector<DatasetEntry>& ds,
                                   int jobs) {
  std::vector<TraceFile> out(ds.size());
  const std::string hash = config_hash(cfg);
  parallel_for(ds.size(), jobs, [&](std::size_t i) {
    const fs::path p = trace_path(cfg, ds[i]);
    if (!fs::exists(p)) throw ConfigError("missing trace " + p.string() + "; run fit first");
    out[i] = read_trace_csv(p, cfg.theta_true.emission());
    check_hash(out[i].config_hash, hash, p);
  });
  return out;
}

std::string quantile_line(std::size_t n, const std::string& rep, const std::string& metric,
                          const std::vector<double>& v) {
  std::string line = std::to_string(n) + "," + rep + "," + metric;
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) line += "," + format_double(quantile(v, p));
  return line + "\n";
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::OverfitMerge: return "OverfitMerge";
    case Scenario::CorrectOrder: return "CorrectOrder";
    case Scenario::TwoStateEmpty: return "TwoStateEmpty";
    case Scenario::Custom: return "Custom";
  }
  return "Custom";
}

Scenario scenario_from_string(const std::string& s) {
  for (Scenario sc : {Scenario::OverfitMerge, Scenario::CorrectOrder, Scenario::TwoStateEmpty,
                      Scenario::Custom})
    if (to_string(sc) == s) return sc;
  throw ConfigError("unknown scenario '" + s + "'");
}

double TwoStateOptions::eps_for(std::size_t n) const {
  if (eps_n) return *eps_n;
  return std::pow(static_cast<double>(n), eps_exponent);
}

DirichletType beta_row_prior(double alpha, double beta) {
  DirichletType d;
  d.alphas = {alpha, beta};
  d.per_row = {{beta, alpha}, {alpha, beta}};
  return d;
}

void ExperimentConfig::validate() const {
  try {
    if (fit_k < 1) throw ConfigError("fit_k must be >= 1");
    if (n_grid.empty()) throw ConfigError("n_grid must be nonempty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] < 1) throw ConfigError("n_grid entries must be positive");
      if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid must be increasing");
    }
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    sampler.validate();
    hmmob::validate(row_prior, fit_k);
    hmmob::validate(em_prior, theta_true.emission());
    MarginalSpec{marginal_l}.validate();
    schedule.validate();
    if (distance.n_mc < 100) throw ConfigError("distance.n_mc must be >= 100");
    if (distance.max_evals < 1) throw ConfigError("distance.max_evals must be >= 1");
  } catch (const ConfigError&) {
    throw;
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
}

json to_json(const ExperimentConfig& cfg) {
  json sampler = to_json(cfg.sampler);
  sampler.erase("seed");
  json twostate = {{"alpha", cfg.twostate.alpha},
                   {"beta", cfg.twostate.beta},
                   {"eps_exponent", cfg.twostate.eps_exponent},
                   {"merge_radius", cfg.twostate.merge_radius}};
  if (cfg.twostate.eps_n) twostate["eps_n"] = *cfg.twostate.eps_n;
  return {{"scenario", to_string(cfg.scenario)},
          {"theta_true", to_json(cfg.theta_true)},
          {"fit_k", cfg.fit_k},
          {"row_prior", to_json(cfg.row_prior)},
          {"em_prior", to_json(cfg.em_prior)},
          {"n_grid", cfg.n_grid},
          {"replicates", cfg.replicates},
          {"sampler", sampler},
          {"marginal_l", cfg.marginal_l},
          {"output_dir", cfg.output_dir.generic_string()},
          {"seed", cfg.seed},
          {"schedule",
           {{"u_exponent", cfg.schedule.u_exponent},
            {"v_exponent", cfg.schedule.v_exponent},
            {"w_scale", cfg.schedule.w_scale}}},
          {"distance", {{"n_mc", cfg.distance.n_mc}, {"max_evals", cfg.distance.max_evals}}},
          {"twostate", twostate}};
}

ExperimentConfig config_from_json(const json& j) {
  try {
    const Scenario scenario =
        j.contains("scenario") ? scenario_from_string(j.at("scenario").get<std::string>())
                               : Scenario::Custom;
    ExperimentConfig cfg = scenario == Scenario::Custom ? ExperimentConfig{} : preset_config(scenario);
    cfg.scenario = scenario;
    if (j.contains("theta_true")) cfg.theta_true = params_from_json(j.at("theta_true"));
    cfg.fit_k = j.value("fit_k", cfg.fit_k);
    if (j.contains("twostate")) {
      const json& t = j.at("twostate");
      cfg.twostate.alpha = t.value("alpha", cfg.twostate.alpha);
      cfg.twostate.beta = t.value("beta", cfg.twostate.beta);
      cfg.twostate.eps_exponent = t.value("eps_exponent", cfg.twostate.eps_exponent);
      cfg.twostate.merge_radius = t.value("merge_radius", cfg.twostate.merge_radius);
      if (t.contains("eps_n")) cfg.twostate.eps_n = t.at("eps_n").get<double>();
      if (scenario == Scenario::TwoStateEmpty && !j.contains("row_prior"))
        cfg.row_prior = beta_row_prior(cfg.twostate.alpha, cfg.twostate.beta);
    }
    if (j.contains("row_prior")) cfg.row_prior = row_prior_from_json(j.at("row_prior"));
    if (j.contains("em_prior"))
      cfg.em_prior = emission_prior_from_json(j.at("em_prior"));
    else if (scenario == Scenario::Custom)
      cfg.em_prior = default_emission_prior(cfg.theta_true.emission());
    if (j.contains("n_grid")) cfg.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
    cfg.replicates = j.value("replicates", cfg.replicates);
    if (j.contains("sampler")) {
      json s = j.at("sampler");
      s.erase("seed");
      cfg.sampler = sampler_config_from_json(s, cfg.sampler);
    }
    cfg.marginal_l = j.value("marginal_l", cfg.marginal_l);
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("schedule")) {
      const json& s = j.at("schedule");
      cfg.schedule.u_exponent = s.value("u_exponent", cfg.schedule.u_exponent);
      cfg.schedule.v_exponent = s.value("v_exponent", cfg.schedule.v_exponent);
      cfg.schedule.w_scale = s.value("w_scale", cfg.schedule.w_scale);
    }
    if (j.contains("distance")) {
      const json& d = j.at("distance");
      cfg.distance.n_mc = d.value("n_mc", cfg.distance.n_mc);
      cfg.distance.max_evals = d.value("max_evals", cfg.distance.max_evals);
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

ExperimentConfig preset_config(Scenario scenario) {
  ExperimentConfig cfg;
  cfg.scenario = scenario;
  const EmissionModel gauss = EmissionModel::gaussian(1.0);
  cfg.sampler.n_iter = 6000;
  cfg.sampler.burn_in = 1000;
  cfg.sampler.thin = 1;
  cfg.em_prior = GaussianMean{0.0, 5.0};
  cfg.marginal_l = 2;
  switch (scenario) {
    case Scenario::CorrectOrder:
      cfg.theta_true = HmmParams::two_state(0.3, 0.4, -2.0, 2.0, gauss);
      cfg.fit_k = 2;
      cfg.row_prior = DirichletType{{4.0, 4.0}, {}};
      cfg.n_grid = {250, 1000};
      cfg.replicates = 10;
      cfg.output_dir = "out/correct_order";
      break;
    case Scenario::OverfitMerge:
      cfg.theta_true = HmmParams(Eigen::MatrixXd::Ones(1, 1), {0.0}, gauss);
      cfg.fit_k = 2;
      cfg.row_prior = DirichletType{{4.0, 4.0}, {}};
      cfg.n_grid = {1000};
      cfg.replicates = 20;
      cfg.output_dir = "out/overfit_merge";
      break;
    case Scenario::TwoStateEmpty:
      cfg.theta_true = HmmParams(Eigen::MatrixXd::Ones(1, 1), {0.0}, gauss);
      cfg.fit_k = 2;
      cfg.twostate = TwoStateOptions{};
      cfg.row_prior = beta_row_prior(cfg.twostate.alpha, cfg.twostate.beta);
      cfg.n_grid = {1000};
      cfg.replicates = 10;
      cfg.output_dir = "out/two_state_empty";
      break;
    case Scenario::Custom:
      break;
  }
  return cfg;
}

std::uint64_t task_seed(const ExperimentConfig& cfg, std::size_t n_index, int replicate,
                        Stream stream) {
  const std::uint64_t task =
      static_cast<std::uint64_t>(n_index) * static_cast<std::uint64_t>(cfg.replicates) +
      static_cast<std::uint64_t>(replicate);
  return split_seed(split_seed(cfg.seed, task), static_cast<std::uint64_t>(stream));
}

std::string task_name(std::size_t n, int replicate) {
  return "n" + std::to_string(n) + "_r" + std::to_string(replicate);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double quantile(std::vector<double> data, double p) {
  if (data.empty()) return std::nan("");
  std::sort(data.begin(), data.end());
  const double pos = p * static_cast<double>(data.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, data.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return data[lo] + frac * (data[hi] - data[lo]);
}

ParameterError permutation_min_error(const HmmParams& fit, const HmmParams& truth) {
  if (fit.k() != truth.k()) throw PreconditionError("parameter error needs equal state counts");
  const int k = fit.k();
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  ParameterError best{std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()};
  do {
    double qerr = 0.0;
    double g2 = 0.0;
    for (int a = 0; a < k; ++a) {
      const int pa = perm[static_cast<std::size_t>(a)];
      for (int b = 0; b < k; ++b)
        qerr = std::max(qerr, std::abs(fit.q(pa, perm[static_cast<std::size_t>(b)]) - truth.q(a, b)));
      const double dg = fit.gamma(pa) - truth.gamma(a);
      g2 += dg * dg;
    }
    best.q = std::min(best.q, qerr);
    best.gamma = std::min(best.gamma, std::sqrt(g2));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<fs::path> cmd_simulate(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const std::string hash = config_hash(cfg);
  std::vector<DatasetEntry> entries;
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni)
    for (int r = 0; r < cfg.replicates; ++r)
      entries.push_back({cfg.n_grid[ni], r, task_seed(cfg, ni, r, Stream::Data),
                         fs::path("data") / (task_name(cfg.n_grid[ni], r) + ".csv")});

  std::error_code ec;
  fs::create_directories(cfg.output_dir / "data", ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.output_dir.string());

  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    const auto& e = entries[i];
    const ObservationSequence obs = simulate(cfg.theta_true, e.n, e.seed);
    write_dataset_csv(cfg.output_dir / e.file, obs, hash);
  });

  json manifest = {{"config", to_json(cfg)},
                   {"config_hash", hash},
                   {"theta_true", to_json(cfg.theta_true)},
                   {"seed_rule",
                    "base = mix64(seed ^ (n_index * replicates + replicate)); "
                    "stream = mix64(base ^ s), s: 0 data, 1 chain, 2 distance"}};
  json list = json::array();
  std::vector<fs::path> files;
  for (const auto& e : entries) {
    list.push_back({{"n", e.n}, {"replicate", e.replicate}, {"seed", e.seed},
                    {"file", e.file.generic_string()}});
    files.push_back(cfg.output_dir / e.file);
  }
  manifest["datasets"] = list;
  write_text(cfg.output_dir / kManifest, manifest.dump(2) + "\n");
  return files;
}

std::vector<fs::path> cmd_fit(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const json manifest = load_manifest(cfg);
  const auto ds = datasets_of(manifest, cfg.output_dir);
  const std::string hash = config_hash(cfg);
  std::vector<fs::path> out(ds.size());
  parallel_for(ds.size(), jobs, [&](std::size_t i) {
    const DatasetEntry& d = ds[i];
    const DatasetFile data = read_dataset_csv(d.file);
    check_hash(data.config_hash, hash, d.file);
    SamplerConfig sc = cfg.sampler;
    sc.seed = task_seed(cfg, n_index_of(cfg, d.n), d.replicate, Stream::Chain);
    const PosteriorTrace trace = with_dataset_context(d, [&] {
      return run_chain(data.obs.y, cfg.fit_k, cfg.row_prior, cfg.em_prior,
                       cfg.theta_true.emission(), sc);
    });
    const fs::path csv = trace_path(cfg, d);
    write_trace_csv(csv, trace, hash);
    json side = {{"config_hash", hash},
                 {"dataset", d.file.lexically_relative(cfg.output_dir).generic_string()},
                 {"n", d.n},
                 {"replicate", d.replicate},
                 {"fit_k", cfg.fit_k},
                 {"row_prior", to_json(cfg.row_prior)},
                 {"em_prior", to_json(cfg.em_prior)},
                 {"emission", to_json(cfg.theta_true.emission())},
                 {"sampler", to_json(sc)},
                 {"seed", sc.seed},
                 {"accept_rate_rows", trace.accept_rate_rows},
                 {"accept_rate_em", trace.accept_rate_em},
                 {"warnings", trace.warnings}};
    fs::path side_path = csv;
    side_path.replace_extension(".json");
    write_text(side_path, side.dump(2) + "\n");
    out[i] = csv;
  });
  return out;
}

std::vector<OrderRow> cmd_order(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const json manifest = load_manifest(cfg);
  const auto ds = datasets_of(manifest, cfg.output_dir);
  if (ds.empty()) throw ConfigError("no traces to summarise");
  const auto traces = load_traces(cfg, ds, jobs);
  const std::string hash = config_hash(cfg);
  const int k0 = cfg.theta_true.k();

  std::vector<OrderRow> rows(ds.size());
  parallel_for(ds.size(), jobs, [&](std::size_t i) {
    const ThresholdSchedule sched = [&] {
      try {
        return threshold_schedule(ds[i].n, cfg.fit_k, cfg.theta_true.emission().dim(),
                                  cfg.row_prior, cfg.schedule);
      } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
      }
    }();
    const OrderPosterior op = posterior_order(traces[i].trace, sched);
    json j = to_json(op, sched);
    j["config_hash"] = hash;
    write_text(cfg.output_dir / "order" / (task_name(ds[i].n, ds[i].replicate) + ".json"),
               j.dump(2) + "\n");
    const auto it = op.pmf.find(k0);
    rows[i] = {ds[i].n, ds[i].replicate, op.mode, it == op.pmf.end() ? 0.0 : it->second,
               op.emptied_all_count};
  });

  std::string csv = "# config_hash=" + hash + "\nn,replicate,mode_L,p_L_eq_k0,emptied_all_count\n";
  for (const auto& r : rows)
    csv += std::to_string(r.n) + "," + std::to_string(r.replicate) + "," + std::to_string(r.mode) +
           "," + format_double(r.p_eq_k0) + "," + std::to_string(r.emptied_all_count) + "\n";
  write_text(cfg.output_dir / "order_aggregate.csv", csv);
  return rows;
}

std::vector<DistanceRow> cmd_distance(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const json manifest = load_manifest(cfg);
  if (!manifest.contains("theta_true")) throw ConfigError("manifest lacks theta_true");
  const HmmParams theta0 = params_from_json(manifest.at("theta_true"));
  const auto ds = datasets_of(manifest, cfg.output_dir);
  if (ds.empty()) throw ConfigError("no traces to summarise");
  const auto traces = load_traces(cfg, ds, jobs);
  const std::string hash = config_hash(cfg);
  const bool param_errors = cfg.fit_k == theta0.k();

  std::vector<DistanceRow> rows(ds.size());
  parallel_for(ds.size(), jobs, [&](std::size_t i) {
    const auto& samples = traces[i].trace.samples;
    const std::size_t total = samples.size();
    const std::size_t evals = std::min(total, cfg.distance.max_evals);
    const std::uint64_t seed =
        task_seed(cfg, n_index_of(cfg, ds[i].n), ds[i].replicate, Stream::Distance);
    DistanceRow row;
    row.n = ds[i].n;
    row.replicate = ds[i].replicate;
    std::string csv = "# config_hash=" + hash + "\nsample,iter,l1,l1_se,tau,weighted,q_err,gamma_err\n";
    for (std::size_t e = 0; e < evals; ++e) {
      // Evenly spaced indices covering the first and last sample.
      const std::size_t s = evals == 1 ? 0 : e * (total - 1) / (evals - 1);
      const HmmParams& th = samples[s];
      const DistanceEstimate d =
          l1_marginal_distance(th, theta0, cfg.marginal_l, cfg.distance.n_mc, split_seed(seed, e));
      const double tau = mixing_profile(th).tau;
      row.l1.push_back(d.value);
      row.weighted.push_back(d.value * tau);
      double qe = std::nan("");
      double ge = std::nan("");
      if (param_errors) {
        const ParameterError pe = permutation_min_error(th, theta0);
        qe = pe.q;
        ge = pe.gamma;
        row.q_err.push_back(qe);
        row.gamma_err.push_back(ge);
      }
      csv += std::to_string(s) + "," + std::to_string(traces[i].trace.iterations[s]) + "," +
             format_double(d.value) + "," + format_double(d.std_err) + "," + format_double(tau) +
             "," + format_double(d.value * tau) + "," + format_double(qe) + "," +
             format_double(ge) + "\n";
    }
    write_text(cfg.output_dir / "distance" / (task_name(row.n, row.replicate) + ".csv"), csv);
    rows[i] = std::move(row);
  });

  std::string summary = "# config_hash=" + hash + "\nn,replicate,metric,q10,q25,q50,q75,q90\n";
  for (std::size_t n : cfg.n_grid) {
    std::vector<double> l1_all, w_all, q_all, g_all;
    for (const auto& r : rows) {
      if (r.n != n) continue;
      const std::string rep = std::to_string(r.replicate);
      summary += quantile_line(n, rep, "l1", r.l1);
      summary += quantile_line(n, rep, "weighted", r.weighted);
      if (param_errors) {
        summary += quantile_line(n, rep, "q_err", r.q_err);
        summary += quantile_line(n, rep, "gamma_err", r.gamma_err);
      }
      l1_all.insert(l1_all.end(), r.l1.begin(), r.l1.end());
      w_all.insert(w_all.end(), r.weighted.begin(), r.weighted.end());
      q_all.insert(q_all.end(), r.q_err.begin(), r.q_err.end());
      g_all.insert(g_all.end(), r.gamma_err.begin(), r.gamma_err.end());
    }
    summary += quantile_line(n, "all", "l1", l1_all);
    summary += quantile_line(n, "all", "weighted", w_all);
    if (param_errors) {
      summary += quantile_line(n, "all", "q_err", q_all);
      summary += quantile_line(n, "all", "gamma_err", g_all);
    }
  }
  write_text(cfg.output_dir / "distance_summary.csv", summary);
  return rows;
}

TwoStateRow twostate_summary(std::span<const HmmParams> samples, double eps_n,
                             double merge_radius) {
  if (samples.empty()) throw PreconditionError("twostate_summary needs samples");
  TwoStateRow row;
  row.eps_n = eps_n;
  std::vector<double> gaps;
  std::vector<double> mixing;
  std::size_t empty = 0;
  std::size_t merge = 0;
  for (const auto& th : samples) {
    if (th.k() != 2) throw PreconditionError("twostate_summary needs k = 2 samples");
    const Eigen::VectorXd mu = stationary_distribution(th).mu;
    if (std::min(mu[0], mu[1]) <= eps_n) ++empty;
    const double gap = std::abs(th.gamma(0) - th.gamma(1));
    if (gap <= merge_radius) ++merge;
    gaps.push_back(gap);
    mixing.push_back(two_state_mixing(th));
  }
  const auto n = static_cast<double>(samples.size());
  row.mass_empty = static_cast<double>(empty) / n;
  row.mass_merge = static_cast<double>(merge) / n;
  row.gap_q25 = quantile(gaps, 0.25);
  row.gap_q50 = quantile(gaps, 0.5);
  row.gap_q75 = quantile(gaps, 0.75);
  row.mixing_q50 = quantile(mixing, 0.5);
  return row;
}

std::vector<TwoStateRow> cmd_twostate(const ExperimentConfig& cfg, int jobs) {
  if (cfg.fit_k != 2) throw ConfigError("twostate requires fit_k = 2");
  cfg.validate();
  cmd_simulate(cfg, jobs);
  cmd_fit(cfg, jobs);
  const json manifest = load_manifest(cfg);
  const auto ds = datasets_of(manifest, cfg.output_dir);
  const auto traces = load_traces(cfg, ds, jobs);
  const std::string hash = config_hash(cfg);

  std::vector<TwoStateRow> rows(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    rows[i] = twostate_summary(traces[i].trace.samples, cfg.twostate.eps_for(ds[i].n),
                               cfg.twostate.merge_radius);
    rows[i].n = ds[i].n;
    rows[i].replicate = ds[i].replicate;
  }
  std::string csv = "# config_hash=" + hash +
                    "\nn,replicate,eps_n,mass_empty,mass_merge,gap_q25,gap_q50,gap_q75,mixing_q50\n";
  json report = json::array();
  for (const auto& r : rows) {
    csv += std::to_string(r.n) + "," + std::to_string(r.replicate) + "," + format_double(r.eps_n) +
           "," + format_double(r.mass_empty) + "," + format_double(r.mass_merge) + "," +
           format_double(r.gap_q25) + "," + format_double(r.gap_q50) + "," +
           format_double(r.gap_q75) + "," + format_double(r.mixing_q50) + "\n";
    report.push_back({{"n", r.n},
                      {"replicate", r.replicate},
                      {"eps_n", r.eps_n},
                      {"mass_empty", r.mass_empty},
                      {"mass_merge", r.mass_merge},
                      {"gap_quantiles", {r.gap_q25, r.gap_q50, r.gap_q75}},
                      {"mixing_q50", r.mixing_q50}});
  }
  write_text(cfg.output_dir / "twostate_report.csv", csv);
  write_text(cfg.output_dir / "twostate_report.json",
             json{{"config_hash", hash}, {"rows", report}}.dump(2) + "\n");
  return rows;
}

}  // namespace hmmob
