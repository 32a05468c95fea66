#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "hmmob/hmm.hpp"
#include "hmmob/marginals.hpp"
#include "hmmob/order.hpp"
#include "hmmob/priors.hpp"
#include "hmmob/sampler.hpp"

namespace hmmob {

using json = nlohmann::json;

/// 17 significant digits; strtod of the result gives back the same bits.
std::string format_double(double v);
double parse_double(std::string_view s);

/// FNV-1a 64-bit, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

json to_json(const EmissionModel& e);
EmissionModel emission_from_json(const json& j);
json to_json(const HmmParams& theta);
HmmParams params_from_json(const json& j);
json to_json(const RowPrior& p);
RowPrior row_prior_from_json(const json& j);
json to_json(const EmissionPrior& p);
EmissionPrior emission_prior_from_json(const json& j);
json to_json(const SamplerConfig& c);
SamplerConfig sampler_config_from_json(const json& j, const SamplerConfig& defaults = {});
json to_json(const ThresholdSchedule& s);
json to_json(const OrderPosterior& o, const ThresholdSchedule& s);
json to_json(const DistanceEstimate& d);

/// Dataset CSV: `t,y,x_true` with 1-based t and states, after a
/// `# config_hash=<hex>` line.
void write_dataset_csv(const std::filesystem::path& path, const ObservationSequence& obs,
                       const std::string& config_hash);
struct DatasetFile {
  ObservationSequence obs;
  std::string config_hash;
};
DatasetFile read_dataset_csv(const std::filesystem::path& path);

/// Trace CSV: `iter,logpost,q_1_1..q_k_k,gamma_1..gamma_k,accept_rows,accept_em`.
void write_trace_csv(const std::filesystem::path& path, const PosteriorTrace& trace,
                     const std::string& config_hash);
struct TraceFile {
  PosteriorTrace trace;
  std::string config_hash;
};
TraceFile read_trace_csv(const std::filesystem::path& path, const EmissionModel& emission);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace hmmob
