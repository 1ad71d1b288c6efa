#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "nlekit/evalkit/evalkit.hpp"

/// The experiment pipeline behind every subcommand. Each stage records an
/// idempotency key (digest of the configuration and upstream digests it
/// depends on) and the digests of what it wrote in <workdir>/record.json.
/// Re-running a stage with an unchanged key verifies those digests and does
/// nothing else.
namespace nlekit::tool {

namespace fs = std::filesystem;

std::string source_version();

/// Model rows of the report, in table order, with their checkpoint stems.
struct ModelRow {
  std::string label;  // "source-only", ...
  std::string stem;   // checkpoint file stem in the seed directory
};
const std::vector<ModelRow>& model_rows();

class Pipeline {
 public:
  Pipeline(nlohmann::json raw_config, unsigned workers, bool force);

  const RunConfig& config() const { return cfg_; }
  const fs::path& workdir() const { return workdir_; }
  fs::path seed_dir(std::uint64_t seed) const;

  void gen_corpus();
  void extract_features();
  void train_source(std::uint64_t seed, bool all_devices);
  void learn_nle(std::uint64_t seed);
  void adapt(std::uint64_t seed, adapt::Regime regime);
  /// Evaluates the named checkpoint stems (all available rows when empty)
  /// and writes report.txt / report.tsv / confusion.tsv in the seed dir.
  std::vector<evalkit::AccuracyReport> evaluate(std::uint64_t seed, const std::vector<std::string>& stems = {});
  void visualize(std::uint64_t seed);
  /// Whole workflow for every configured seed plus the sweep summary.
  void run_all();

  /// Path of a checkpoint stem; dependency error naming `producer` if absent.
  fs::path require_artifact(const fs::path& p, const std::string& producer) const;

 private:
  struct StageRun {
    std::string name;
    std::string key;
    bool needed = true;
  };
  StageRun begin(const std::string& name, const nlohmann::json& inputs, const std::vector<fs::path>& outputs);
  void finish(const StageRun& s, const std::vector<fs::path>& outputs, double seconds, nlohmann::json extra = {});
  void save_record();
  std::string rel(const fs::path& p) const;
  std::string artifact_digest(const fs::path& p) const;
  scenegen::CorpusManifest manifest() const;
  scenegen::SegmentSet load(const std::vector<std::string>& devices, scenegen::Split split) const;

  nlohmann::json raw_;
  RunConfig cfg_;
  fs::path workdir_;
  unsigned workers_;
  bool force_;
  nlohmann::json record_;
};

}  // namespace nlekit::tool
