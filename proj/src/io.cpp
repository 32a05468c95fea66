#include "hmmob/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "hmmob/error.hpp"

namespace hmmob {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  return out;
}

std::string hash_line(const std::string& hash) { return "# config_hash=" + hash + "\n"; }

/// Reads the optional hash comment and the header; returns data lines.
std::vector<std::string> read_csv_lines(const std::filesystem::path& path, std::string& hash,
                                        std::string& header) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# config_hash=";
      if (line.rfind(key, 0) == 0) hash = line.substr(key.size());
      continue;
    }
    if (!have_header) {
      header = line;
      have_header = true;
      continue;
    }
    lines.push_back(line);
  }
  if (!have_header) throw ConfigError("missing CSV header in " + path.string());
  return lines;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view s) {
  const std::string str(s);
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (end == str.c_str()) throw ConfigError("not a number: '" + str + "'");
  return v;
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const EmissionModel& e) {
  if (e.family() == EmissionFamily::Poisson) return {{"family", "poisson"}};
  return {{"family", "gaussian"}, {"sigma", e.sigma()}};
}

EmissionModel emission_from_json(const json& j) {
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "gaussian") return EmissionModel::gaussian(j.value("sigma", 1.0));
  if (fam == "poisson") return EmissionModel::poisson();
  throw ConfigError("unknown emission family '" + fam + "'");
}

json to_json(const HmmParams& theta) {
  json rows = json::array();
  for (int i = 0; i < theta.k(); ++i) {
    json r = json::array();
    for (int j = 0; j < theta.k(); ++j) r.push_back(theta.q(i, j));
    rows.push_back(r);
  }
  return {{"k", theta.k()},
          {"transition", rows},
          {"gammas", theta.gammas()},
          {"emission", to_json(theta.emission())}};
}

HmmParams params_from_json(const json& j) {
  const auto rows = j.at("transition").get<std::vector<std::vector<double>>>();
  const auto gammas = j.at("gammas").get<std::vector<double>>();
  const auto k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd q(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != k)
      throw ConfigError("transition matrix must be square");
    for (Eigen::Index c = 0; c < k; ++c)
      q(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  }
  const EmissionModel e =
      j.contains("emission") ? emission_from_json(j.at("emission")) : EmissionModel::gaussian(1.0);
  return HmmParams(std::move(q), gammas, e);
}

json to_json(const RowPrior& p) {
  if (const auto* d = std::get_if<DirichletType>(&p)) {
    json out = {{"type", "dirichlet"}, {"alphas", d->alphas}};
    if (!d->per_row.empty()) out["per_row"] = d->per_row;
    return out;
  }
  return {{"type", "exponential"}, {"C", std::get<ExponentialType>(p).C}};
}

RowPrior row_prior_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "dirichlet") {
    DirichletType d;
    d.alphas = j.value("alphas", std::vector<double>{});
    d.per_row = j.value("per_row", std::vector<std::vector<double>>{});
    return d;
  }
  if (type == "exponential") return ExponentialType{j.value("C", 1.0)};
  throw ConfigError("unknown row prior type '" + type + "'");
}

json to_json(const EmissionPrior& p) {
  if (const auto* g = std::get_if<GaussianMean>(&p))
    return {{"type", "gaussian_mean"}, {"m0", g->m0}, {"s0", g->s0}};
  const auto& r = std::get<GammaRate>(p);
  return {{"type", "gamma_rate"}, {"a0", r.a0}, {"b0", r.b0}};
}

EmissionPrior emission_prior_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian_mean") {
    GaussianMean g;
    return GaussianMean{j.value("m0", g.m0), j.value("s0", g.s0)};
  }
  if (type == "gamma_rate") {
    GammaRate g;
    return GammaRate{j.value("a0", g.a0), j.value("b0", g.b0)};
  }
  throw ConfigError("unknown emission prior type '" + type + "'");
}

json to_json(const SamplerConfig& c) {
  json init;
  if (const auto* u = std::get_if<UserSupplied>(&c.init))
    init = {{"type", "user"}, {"theta", to_json(u->theta)}};
  else
    init = {{"type", "prior"}};
  return {{"n_iter", c.n_iter}, {"burn_in", c.burn_in}, {"thin", c.thin},
          {"rw_scale", c.rw_scale}, {"init", init}, {"seed", c.seed}};
}

SamplerConfig sampler_config_from_json(const json& j, const SamplerConfig& defaults) {
  SamplerConfig c = defaults;
  c.n_iter = j.value("n_iter", c.n_iter);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.thin = j.value("thin", c.thin);
  c.rw_scale = j.value("rw_scale", c.rw_scale);
  c.seed = j.value("seed", c.seed);
  if (j.contains("init")) {
    const json& init = j.at("init");
    const std::string type = init.is_string() ? init.get<std::string>() : init.at("type").get<std::string>();
    if (type == "prior")
      c.init = FromPrior{};
    else if (type == "user")
      c.init = UserSupplied{params_from_json(init.at("theta"))};
    else
      throw ConfigError("unknown sampler init '" + type + "'");
  }
  return c;
}

json to_json(const ThresholdSchedule& s) {
  return {{"n", s.n},
          {"k", s.k},
          {"d", s.d},
          {"prior_kind", s.prior_kind == RowPriorKind::DirichletType ? "dirichlet" : "exponential"},
          {"alpha_bar", s.alpha_bar},
          {"u_n", s.u_n},
          {"v_n", s.v_n},
          {"w_n", s.w_n},
          {"u_exponent", s.options.u_exponent},
          {"v_exponent", s.options.v_exponent},
          {"w_scale", s.options.w_scale},
          {"log_n_min", std::isfinite(s.log_n_min) ? json(s.log_n_min) : json("inf")},
          {"ordered", s.ordered()}};
}

json to_json(const OrderPosterior& o, const ThresholdSchedule& s) {
  json pmf = json::object();
  for (const auto& [order, p] : o.pmf) pmf[std::to_string(order)] = p;
  return {{"pmf", pmf},
          {"mode", o.mode},
          {"n_samples", o.n_samples},
          {"schedule", to_json(s)},
          {"emptied_all_count", o.emptied_all_count}};
}

json to_json(const DistanceEstimate& d) {
  return {{"value", d.value},
          {"std_err", d.std_err},
          {"n_mc", d.n_mc},
          {"method", d.method == DistanceMethod::MonteCarlo ? "monte_carlo" : "quadrature_1d"}};
}

void write_dataset_csv(const std::filesystem::path& path, const ObservationSequence& obs,
                       const std::string& config_hash) {
  std::string out = hash_line(config_hash) + "t,y,x_true\n";
  for (std::size_t t = 0; t < obs.size(); ++t) {
    out += std::to_string(t + 1) + "," + format_double(obs.y[t]) + ",";
    if (!obs.x_true.empty()) out += std::to_string(obs.x_true[t] + 1);
    out += "\n";
  }
  write_text(path, out);
}

DatasetFile read_dataset_csv(const std::filesystem::path& path) {
  DatasetFile f;
  std::string header;
  const auto lines = read_csv_lines(path, f.config_hash, header);
  if (header != "t,y,x_true") throw ConfigError("unexpected dataset header in " + path.string());
  bool have_states = true;
  for (const auto& line : lines) {
    auto cols = split_csv(line);
    if (cols.size() < 2) throw ConfigError("malformed dataset row in " + path.string());
    f.obs.y.push_back(parse_double(cols[1]));
    if (cols.size() >= 3 && !cols[2].empty())
      f.obs.x_true.push_back(std::stoi(cols[2]) - 1);
    else
      have_states = false;
  }
  if (!have_states) f.obs.x_true.clear();
  return f;
}

void write_trace_csv(const std::filesystem::path& path, const PosteriorTrace& trace,
                     const std::string& config_hash) {
  if (trace.samples.empty()) throw PreconditionError("cannot write an empty trace");
  const int k = trace.samples.front().k();
  std::string out = hash_line(config_hash) + "iter,logpost";
  for (int i = 1; i <= k; ++i)
    for (int j = 1; j <= k; ++j) out += ",q_" + std::to_string(i) + "_" + std::to_string(j);
  for (int i = 1; i <= k; ++i) out += ",gamma_" + std::to_string(i);
  out += ",accept_rows,accept_em\n";
  for (std::size_t s = 0; s < trace.size(); ++s) {
    const HmmParams& th = trace.samples[s];
    out += std::to_string(trace.iterations[s]) + "," + format_double(trace.log_post[s]);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) out += "," + format_double(th.q(i, j));
    for (int i = 0; i < k; ++i) out += "," + format_double(th.gamma(i));
    out += "," + format_double(trace.accept_rows[s]) + "," + format_double(trace.accept_em[s]) + "\n";
  }
  write_text(path, out);
}

TraceFile read_trace_csv(const std::filesystem::path& path, const EmissionModel& emission) {
  TraceFile f;
  std::string header;
  const auto lines = read_csv_lines(path, f.config_hash, header);
  const std::size_t ncol = split_csv(header).size();
  // ncol = 4 + k^2 + k
  int k = 1;
  while (static_cast<std::size_t>(4 + k * k + k) < ncol) ++k;
  if (static_cast<std::size_t>(4 + k * k + k) != ncol)
    throw ConfigError("trace header has an unexpected column count in " + path.string());
  for (const auto& line : lines) {
    const auto cols = split_csv(line);
    if (cols.size() != ncol) throw ConfigError("malformed trace row in " + path.string());
    Eigen::MatrixXd q(k, k);
    std::vector<double> gammas(static_cast<std::size_t>(k));
    std::size_t c = 2;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) q(i, j) = parse_double(cols[c++]);
    for (auto& g : gammas) g = parse_double(cols[c++]);
    f.trace.iterations.push_back(std::stoi(cols[0]));
    f.trace.log_post.push_back(parse_double(cols[1]));
    f.trace.samples.emplace_back(std::move(q), std::move(gammas), emission);
    f.trace.accept_rows.push_back(parse_double(cols[c++]));
    f.trace.accept_em.push_back(parse_double(cols[c++]));
  }
  if (f.trace.samples.empty()) throw ConfigError("trace file has no samples: " + path.string());
  double r = 0.0;
  double e = 0.0;
  for (std::size_t s = 0; s < f.trace.size(); ++s) {
    r += f.trace.accept_rows[s];
    e += f.trace.accept_em[s];
  }
  f.trace.accept_rate_rows = r / static_cast<double>(f.trace.size());
  f.trace.accept_rate_em = e / static_cast<double>(f.trace.size());
  return f;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("write failed for " + path.string());
}

}  // namespace hmmob
