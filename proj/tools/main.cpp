// nlekit: command-line driver for the whole workflow.
//
// Exit codes: 0 ok, 1 internal/state, 2 configuration or usage, 3 data or
// I/O, 4 numeric divergence, 5 missing dependency.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "config.hpp"
#include "nlekit/parallel.hpp"
#include "pipeline.hpp"

using namespace nlekit;
using namespace nlekit::tool;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
    case ErrorKind::input:
    case ErrorKind::range: return 2;
    case ErrorKind::data:
    case ErrorKind::io:
    case ErrorKind::persistence: return 3;
    case ErrorKind::numeric: return 4;
    case ErrorKind::dependency: return 5;
    case ErrorKind::state: return 1;
  }
  return 1;
}

struct Globals {
  std::string config;
  std::vector<std::string> overrides;
  unsigned workers = 0;
  bool force = false;
};

nlohmann::json load_raw(const Globals& g) {
  nlohmann::json raw = g.config.empty() ? nlohmann::json::object() : read_config_file(g.config);
  for (const auto& o : g.overrides) apply_override(raw, o);
  return raw;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural label embedding toolkit: device-mismatch adaptation for scene classification"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config, "experiment config (JSON, // comments allowed)");
  app.add_option("-s,--set", g.overrides, "override a dotted key, e.g. --set train.nle_rtsl.lambda=10")->take_all();
  app.add_option("-w,--workers", g.workers, "worker threads (default: NLEKIT_WORKERS or all cores)");
  app.add_flag("--force-overwrite", g.force, "replace artifacts whose record or digests disagree");

  std::uint64_t seed = 0;
  auto seed_opt = [&](CLI::App* c) { c->add_option("--seed", seed, "experiment seed (default: config seed)"); };

  auto* gen = app.add_subcommand("gen-corpus", "render the synthetic corpus and its features");
  auto* feat = app.add_subcommand("extract-features", "re-extract LMFB features from the corpus waveforms");
  bool all_devices = false;
  auto* ts = app.add_subcommand("train-source", "train the source model (step 1)");
  seed_opt(ts);
  ts->add_flag("--all-devices", all_devices, "train on every device instead (all-devices row)");
  auto* ln = app.add_subcommand("learn-nle", "learn the neural label embeddings (step 2)");
  seed_opt(ln);
  std::string regime;
  std::optional<double> lambda, temperature, lr;
  std::optional<std::size_t> epochs;
  auto* ad = app.add_subcommand("adapt", "adapt the source model to the target devices (step 3)");
  seed_opt(ad);
  ad->add_option("--regime", regime, "finetune-onehot | ts-paired | nle | nle-rtsl")->required();
  ad->add_option("--lambda", lambda, "RTSL weight");
  ad->add_option("--temperature", temperature, "softmax temperature");
  ad->add_option("--lr", lr, "initial learning rate");
  ad->add_option("--epochs", epochs, "epochs");
  std::vector<std::string> models;
  auto* ev = app.add_subcommand("evaluate", "score checkpoints on every device's test split");
  seed_opt(ev);
  ev->add_option("-m,--model", models, "checkpoint stems or row labels (default: all present)");
  auto* vz = app.add_subcommand("visualize", "SKLD t-SNE and NLE PCA figures");
  seed_opt(vz);
  auto* ra = app.add_subcommand("run-all", "the whole workflow for every configured seed");
  auto* vc = app.add_subcommand("validate-config", "list every configuration violation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (g.workers == 0) g.workers = default_workers();
    if (vc->parsed()) {
      const auto parsed = parse_config(load_raw(g));
      for (const auto& v : parsed.violations) std::cout << v << "\n";
      std::cerr << parsed.violations.size() << " violation(s)\n";
      return parsed.violations.empty() ? 0 : 2;
    }
    if (ad->parsed()) {
      const auto r = adapt::parse_regime(regime);
      if (!adapt::is_adaptation(r)) fail(ErrorKind::config, "adapt --regime must be an adaptation regime, got '" + regime + "'");
      std::string plan = adapt::to_string(r);
      std::replace(plan.begin(), plan.end(), '-', '_');
      const std::string key = "train." + plan + ".";
      if (lambda) g.overrides.push_back(key + "lambda=" + nlohmann::json(*lambda).dump());
      if (temperature) g.overrides.push_back(key + "temperature=" + nlohmann::json(*temperature).dump());
      if (lr) g.overrides.push_back(key + "initial_lr=" + nlohmann::json(*lr).dump());
      if (epochs) g.overrides.push_back(key + "epochs=" + std::to_string(*epochs));
    }
    Pipeline p(load_raw(g), g.workers, g.force);
    const std::uint64_t s = seed ? seed : p.config().seed;
    if (gen->parsed()) p.gen_corpus();
    else if (feat->parsed()) p.extract_features();
    else if (ts->parsed()) p.train_source(s, all_devices);
    else if (ln->parsed()) p.learn_nle(s);
    else if (ad->parsed()) p.adapt(s, adapt::parse_regime(regime));
    else if (ev->parsed()) std::cout << evalkit::render_table(p.evaluate(s, models), p.config().device_ids());
    else if (vz->parsed()) p.visualize(s);
    else if (ra->parsed()) p.run_all();
    return 0;
  } catch (const Error& e) {
    std::cerr << "nlekit: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "nlekit: internal error: " << e.what() << "\n";
    return 1;
  }
}
