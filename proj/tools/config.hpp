#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlekit/adapt/adapt.hpp"
#include "nlekit/audiofeat/audiofeat.hpp"
#include "nlekit/nlelearn/nlelearn.hpp"
#include "nlekit/scenegen/scenegen.hpp"

namespace nlekit::tool {

struct VizConfig {
  double perplexity = 30.0;
  std::size_t iters = 1000;
  std::size_t max_points = 400;
};

/// Stage names used for train plans, in pipeline order.
inline const std::vector<std::string> kPlanNames{"source", "all_devices", "finetune_onehot", "ts_paired", "nle", "nle_rtsl"};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string workdir = "runs/default";
  std::uint64_t corpus_seed = 1;
  scenegen::CorpusConfig corpus;
  audiofeat::FeatureConfig features;
  asnet::ModelConfig model;
  std::map<std::string, adapt::TrainPlan> plans;
  nlelearn::NleOptions nle;
  bool average_posteriors = false;
  VizConfig viz;
  std::vector<std::uint64_t> seeds;  // run-all sweep; defaults to {seed}

  std::vector<std::string> device_ids() const;
  std::vector<std::string> target_devices() const;
};

struct ParsedConfig {
  RunConfig config;
  std::vector<std::string> violations;  // "dotted.key: problem"
};

/// Reads a JSON file (// comments allowed). I/O error when unreadable,
/// configuration error when it does not parse.
nlohmann::json read_config_file(const std::string& path);

/// Applies "dotted.key=value"; value is parsed as JSON, else kept as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Every violation at once, never first-failure.
ParsedConfig parse_config(const nlohmann::json& j);

/// Sections feeding each stage's idempotency key.
nlohmann::json corpus_section(const RunConfig& c);
nlohmann::json plan_section(const RunConfig& c, const std::string& name, std::uint64_t seed);

}  // namespace nlekit::tool
