// hmmob: simulate, fit and summarise HMM order experiments.
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "hmmob/error.hpp"
#include "hmmob/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kRate = 4 };

int jobs_from_env(int flag) {
  if (const char* env = std::getenv("HMMOB_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw hmmob::ConfigError("HMMOB_JOBS must be a positive integer");
    return static_cast<int>(v);
  }
  return flag;
}

int run(const std::string& command, const std::string& config_path, const std::string& out,
        const std::optional<std::uint64_t>& seed, int jobs) {
  hmmob::ExperimentConfig cfg = hmmob::load_config(config_path);
  if (!out.empty()) cfg.output_dir = out;
  if (seed) cfg.seed = *seed;
  jobs = jobs_from_env(jobs);

  if (command == "simulate") {
    const auto files = hmmob::cmd_simulate(cfg, jobs);
    std::cout << "wrote " << files.size() << " dataset(s) to " << (cfg.output_dir / "data").string() << "\n";
  } else if (command == "fit") {
    const auto files = hmmob::cmd_fit(cfg, jobs);
    std::cout << "wrote " << files.size() << " trace(s) to " << (cfg.output_dir / "traces").string() << "\n";
  } else if (command == "order") {
    const auto rows = hmmob::cmd_order(cfg, jobs);
    for (const auto& r : rows)
      std::cout << "n=" << r.n << " r=" << r.replicate << " mode_L=" << r.mode
                << " p_L_eq_k0=" << r.p_eq_k0 << "\n";
  } else if (command == "distance") {
    const auto rows = hmmob::cmd_distance(cfg, jobs);
    for (const auto& r : rows)
      std::cout << "n=" << r.n << " r=" << r.replicate
                << " median_l1=" << hmmob::quantile(r.l1, 0.5) << "\n";
  } else if (command == "twostate") {
    const auto rows = hmmob::cmd_twostate(cfg, jobs);
    for (const auto& r : rows)
      std::cout << "n=" << r.n << " r=" << r.replicate << " mass_empty=" << r.mass_empty
                << " mass_merge=" << r.mass_merge << " gap_median=" << r.gap_q50 << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Posterior order and concentration experiments for finite-state HMMs"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out;
  std::uint64_t seed_value = 0;
  int jobs = 1;

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "simulate datasets and write the manifest"},
      {"fit", "run the posterior sampler on every dataset"},
      {"order", "posterior of the merged-state count per trace"},
      {"distance", "marginal L1 distance and parameter errors to the truth"},
      {"twostate", "simulate, fit and report emptying and merging for a two-state fit"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory, overrides output_dir");
    sub->add_option("--seed", seed_value, "master seed, overrides the config");
    sub->add_option("--jobs", jobs, "worker threads (HMMOB_JOBS wins)")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const CLI::App* sub = app.get_subcommands().front();
  std::optional<std::uint64_t> seed;
  if (sub->count("--seed") > 0) seed = seed_value;

  try {
    return run(sub->get_name(), config_path, out, seed, jobs);
  } catch (const hmmob::RateConditionError& e) {
    std::cerr << "rate-condition error: " << e.what() << "\n";
    return kRate;
  } catch (const hmmob::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const hmmob::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const hmmob::PreconditionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
}
