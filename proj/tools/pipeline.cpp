#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include "nlekit/binio.hpp"
#include "nlekit/digest.hpp"
#include "nlekit/embedviz/embedviz.hpp"
#include "nlekit/io_audit.hpp"
#include "nlekit/parallel.hpp"
#include "nlekit/rng.hpp"

#ifndef NLEKIT_SOURCE_VERSION
#define NLEKIT_SOURCE_VERSION "unknown"
#endif

namespace nlekit::tool {

using nlohmann::json;
using Clock = std::chrono::steady_clock;
using divloss::Matrix;

namespace {

void note(const std::string& msg) { std::cerr << "[nlekit] " << msg << std::endl; }

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string json_digest(const json& j) {
  const std::string s = j.dump();
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

void save_text(const fs::path& p, const std::string& s) { binio::write_file(p.string(), binio::Bytes(s.begin(), s.end())); }

std::string stem_for(adapt::Regime r) {
  switch (r) {
    case adapt::Regime::source_ce: return "source";
    case adapt::Regime::finetune_onehot: return "onehot";
    case adapt::Regime::ts_paired: return "ts_paired";
    case adapt::Regime::nle: return "nle_model";
    case adapt::Regime::nle_rtsl: return "nle_rtsl_model";
  }
  return "?";
}

std::string plan_for(adapt::Regime r) {
  switch (r) {
    case adapt::Regime::source_ce: return "source";
    case adapt::Regime::finetune_onehot: return "finetune_onehot";
    case adapt::Regime::ts_paired: return "ts_paired";
    case adapt::Regime::nle: return "nle";
    case adapt::Regime::nle_rtsl: return "nle_rtsl";
  }
  return "?";
}

// Distinct, fixed per-stage training seeds derived from the experiment seed.
std::uint64_t stage_seed(std::uint64_t seed, const std::string& stage) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : stage) h = (h ^ c) * 1099511628211ULL;
  return derive_seed(seed, h);
}

}  // namespace

std::string source_version() { return NLEKIT_SOURCE_VERSION; }

const std::vector<ModelRow>& model_rows() {
  static const std::vector<ModelRow> rows{{"source-only", "source"}, {"all-devices", "all_devices"},
                                          {"one-hot", "onehot"},     {"ts-paired", "ts_paired"},
                                          {"nle", "nle_model"},      {"nle-rtsl", "nle_rtsl_model"}};
  return rows;
}

Pipeline::Pipeline(json raw, unsigned workers, bool force) : raw_(std::move(raw)), workers_(std::max(1u, workers)), force_(force) {
  auto parsed = parse_config(raw_);
  if (!parsed.violations.empty()) {
    std::string msg = "configuration has " + std::to_string(parsed.violations.size()) + " violation(s):";
    for (const auto& v : parsed.violations) msg += "\n  " + v;
    fail(ErrorKind::config, msg);
  }
  cfg_ = std::move(parsed.config);
  workdir_ = cfg_.workdir;
  fs::create_directories(workdir_);
  const fs::path rec = workdir_ / "record.json";
  if (fs::exists(rec)) {
    const auto b = binio::read_file(rec.string());
    try {
      record_ = json::parse(b.begin(), b.end());
    } catch (const json::parse_error& e) {
      fail(ErrorKind::data, "'" + rec.string() + "' is not valid JSON: " + e.what());
    }
  } else {
    record_ = {{"stages", json::object()}};
  }
  record_["config_digest"] = json_digest(raw_);
  record_["source_version"] = source_version();
  save_text(workdir_ / "config.resolved.json", raw_.dump(2) + "\n");
}

fs::path Pipeline::seed_dir(std::uint64_t seed) const { return workdir_ / ("seed-" + std::to_string(seed)); }

std::string Pipeline::rel(const fs::path& p) const { return fs::relative(p, workdir_).generic_string(); }

std::string Pipeline::artifact_digest(const fs::path& p) const {
  if (!fs::is_directory(p)) return file_sha256(p.string());
  // Directory: digest over sorted (relative path, file digest) lines.
  std::vector<std::string> lines;
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file()) lines.push_back(fs::relative(e.path(), p).generic_string() + " " + file_sha256(e.path().string()));
  std::sort(lines.begin(), lines.end());
  std::string all;
  for (const auto& l : lines) all += l + "\n";
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(all.data()), all.size()));
}

void Pipeline::save_record() {
  for (const auto& [name, st] : record_["stages"].items())
    for (const auto& [path, digest] : st["artifacts"].items())
      if (!fs::exists(workdir_ / path)) fail(ErrorKind::state, "record lists missing artifact '" + path + "'");
  save_text(workdir_ / "record.json", record_.dump(2) + "\n");
}

Pipeline::StageRun Pipeline::begin(const std::string& name, const json& inputs, const std::vector<fs::path>& outputs) {
  StageRun s{name, json_digest(inputs)};
  const json& stages = record_["stages"];
  if (stages.contains(name)) {
    const json& st = stages[name];
    if (st.value("key", "") == s.key) {
      std::string bad;
      for (const auto& [path, digest] : st["artifacts"].items())
        if (!fs::exists(workdir_ / path) || artifact_digest(workdir_ / path) != digest.get<std::string>()) bad = path;
      if (bad.empty()) {
        note(name + ": up to date (digests verified)");
        s.needed = false;
        return s;
      }
      if (!force_)
        fail(ErrorKind::data, name + ": artifact '" + bad +
                                  "' no longer matches its recorded digest; re-run with --force-overwrite to rebuild");
    } else if (!force_) {
      fail(ErrorKind::config, name + ": existing artifacts were produced under a different configuration; pass "
                                     "--force-overwrite to replace them");
    }
  } else if (!force_) {
    for (const auto& o : outputs)
      if (fs::exists(o))
        fail(ErrorKind::config, name + ": '" + o.string() + "' exists but is not in the experiment record; pass "
                                       "--force-overwrite to replace it");
  }
  record_["stages"].erase(name);
  note(name + ": running");
  return s;
}

void Pipeline::finish(const StageRun& s, const std::vector<fs::path>& outputs, double seconds, json extra) {
  json st = {{"key", s.key}, {"seconds", seconds}, {"artifacts", json::object()}};
  for (const auto& o : outputs) st["artifacts"][rel(o)] = artifact_digest(o);
  if (!extra.is_null()) st["info"] = std::move(extra);
  record_["stages"][s.name] = std::move(st);
  save_record();
  note(s.name + ": done in " + std::to_string(static_cast<long long>(seconds * 1000) / 1000.0) + " s");
}

fs::path Pipeline::require_artifact(const fs::path& p, const std::string& producer) const {
  if (!fs::exists(p))
    fail(ErrorKind::dependency, "missing '" + p.string() + "'; produce it with `nlekit " + producer + "` first");
  return p;
}

scenegen::CorpusManifest Pipeline::manifest() const {
  const fs::path m = workdir_ / "corpus" / "manifest.tsv";
  require_artifact(m, "gen-corpus");
  return scenegen::read_manifest(m.string());
}

scenegen::SegmentSet Pipeline::load(const std::vector<std::string>& devices, scenegen::Split split) const {
  scenegen::LoadOptions lo;
  lo.seg_len = cfg_.features.seg_len;
  lo.workers = workers_;
  return scenegen::load_split(manifest(), scenegen::Filter{devices, split}, lo);
}

void Pipeline::gen_corpus() {
  const fs::path dir = workdir_ / "corpus";
  const std::vector<fs::path> out{dir / "manifest.tsv", dir / "features"};
  auto s = begin("corpus", corpus_section(cfg_), out);
  if (!s.needed) return;
  const auto t0 = Clock::now();
  fs::remove_all(dir);
  const auto m = scenegen::generate_corpus(cfg_.corpus, cfg_.features, cfg_.corpus_seed, dir.string(), workers_);
  finish(s, out, since(t0), {{"recordings", m.entries.size()}});
}

void Pipeline::extract_features() {
  const auto m = manifest();
  const fs::path dir = workdir_ / "corpus";
  std::vector<fs::path> wavs;
  for (const auto& e : m.entries) {
    fs::path w = dir / e.path;
    w.replace_extension(".wav");
    if (!fs::exists(w))
      fail(ErrorKind::dependency, "missing '" + w.string() + "'; produce waveforms with `nlekit gen-corpus --set corpus.write_wav=true`");
    wavs.push_back(w);
  }
  json inputs = corpus_section(cfg_)["features"];
  inputs["manifest"] = artifact_digest(dir / "manifest.tsv");
  const std::vector<fs::path> out{dir / "features"};
  auto s = begin("features", inputs, out);
  if (!s.needed) return;
  const auto t0 = Clock::now();
  parallel_for(wavs.size(), workers_, [&](std::size_t i) {
    fs::path l = wavs[i];
    l.replace_extension(".lmfb");
    audiofeat::write_lmfb(l.string(), audiofeat::extract(audiofeat::read_wav(wavs[i].string()), cfg_.features));
  });
  // Keep the corpus stage's record in step with the rewritten features.
  if (record_["stages"].contains("corpus"))
    record_["stages"]["corpus"]["artifacts"][rel(dir / "features")] = artifact_digest(dir / "features");
  finish(s, out, since(t0), {{"recordings", wavs.size()}});
}

void Pipeline::train_source(std::uint64_t seed, bool all_devices) {
  const std::string name = all_devices ? "all_devices" : "source";
  const fs::path dir = seed_dir(seed), ckpt = dir / (name + ".nlek"), log = dir / (name + ".log.jsonl");
  const auto m = manifest();
  json inputs = plan_section(cfg_, name, seed);
  inputs["corpus"] = record_["stages"].value("corpus", json::object()).value("key", "");
  inputs["manifest"] = artifact_digest(workdir_ / "corpus" / "manifest.tsv");
  auto s = begin("seed-" + std::to_string(seed) + "/" + name, inputs, {ckpt, log});
  if (!s.needed) return;
  const auto t0 = Clock::now();
  adapt::TrainPlan plan = cfg_.plans.at(name);
  plan.seed = stage_seed(seed, name);
  const auto data = load(plan.devices, scenegen::Split::train);
  note(name + ": " + std::to_string(data.size()) + " segments from " + std::to_string(data.entries.size()) + " recordings");
  auto r = adapt::train_source(plan, cfg_.model, data);
  fs::create_directories(dir);
  asnet::save_checkpoint(r.model, ckpt.string());
  adapt::write_log(r.log, log.string());
  if (r.log.aborted) fail(ErrorKind::numeric, name + ": training diverged (" + r.log.abort_reason + "); last good epoch saved");
  finish(s, {ckpt, log}, since(t0), {{"digest", r.log.digest}});
}

void Pipeline::learn_nle(std::uint64_t seed) {
  const fs::path dir = seed_dir(seed), src = require_artifact(dir / "source.nlek", "train-source");
  const fs::path out = dir / "nle_matrix.nlek", text = dir / "nle_matrix.tsv", log = dir / "nle.log.json";
  json inputs = {{"nle",
                  {{"lr", cfg_.nle.lr},
                   {"steps", cfg_.nle.steps},
                   {"batch", cfg_.nle.batch},
                   {"temperature", cfg_.nle.temperature},
                   {"momentum", cfg_.nle.momentum},
                   {"eval_every", cfg_.nle.eval_every}}},
                 {"seed", seed},
                 {"teacher", artifact_digest(src)}};
  auto s = begin("seed-" + std::to_string(seed) + "/nle_matrix", inputs, {out, text, log});
  if (!s.needed) return;
  const auto t0 = Clock::now();
  auto teacher = asnet::load_checkpoint(src.string());
  const auto before = asnet::model_digest(teacher);
  nlelearn::NleOptions o = cfg_.nle;
  o.seed = stage_seed(seed, "nle_matrix");
  const auto data = load({cfg_.corpus.source_device}, scenegen::Split::train);
  const auto res = nlelearn::train_nle(teacher, data, o, workers_);
  if (asnet::model_digest(teacher) != before) fail(ErrorKind::state, "NLE learning modified the teacher");
  const Matrix cols = res.nle.columns();
  for (Eigen::Index c = 0; c < cols.cols(); ++c)
    if (!(cols.col(c).minCoeff() > 0.0) || std::abs(cols.col(c).sum() - 1.0) > 1e-6)
      fail(ErrorKind::numeric, "NLE column " + std::to_string(c) + " left the simplex");
  const auto digest = nlelearn::save_nle(res.nle, out.string(), {{"temperature", o.temperature}, {"teacher", before}});
  std::vector<std::string> names;
  for (const auto& sc : scenegen::make_scenes(cfg_.corpus)) names.push_back(sc.name);
  nlelearn::export_text(res.nle, text.string(), names);
  json hist = json::array();
  for (const auto& h : res.history) hist.push_back({{"step", h.step}, {"lr", h.lr}, {"loss", h.loss}});
  save_text(log, json{{"initial_loss", res.initial_loss},
                      {"final_loss", res.final_loss},
                      {"lr", o.lr},
                      {"steps", o.steps},
                      {"batch", o.batch},
                      {"temperature", o.temperature},
                      {"history", hist},
                      {"digest", digest}}
                     .dump(2) +
                     "\n");
  finish(s, {out, text, log}, since(t0), {{"digest", digest}, {"final_loss", res.final_loss}});
}

void Pipeline::adapt(std::uint64_t seed, adapt::Regime regime) {
  if (regime == adapt::Regime::source_ce) fail(ErrorKind::config, "adapt: use train-source for source-ce");
  const fs::path dir = seed_dir(seed), src = require_artifact(dir / "source.nlek", "train-source");
  const bool uses_nle = regime == adapt::Regime::nle || regime == adapt::Regime::nle_rtsl;
  const fs::path nle_path = dir / "nle_matrix.nlek";
  if (uses_nle) require_artifact(nle_path, "learn-nle");
  const std::string stem = stem_for(regime), pname = plan_for(regime);
  const fs::path ckpt = dir / (stem + ".nlek"), log = dir / (stem + ".log.jsonl");
  json inputs = plan_section(cfg_, pname, seed);
  inputs["seed_model"] = artifact_digest(src);
  if (uses_nle) inputs["nle"] = artifact_digest(nle_path);
  inputs["manifest"] = artifact_digest(workdir_ / "corpus" / "manifest.tsv");
  auto s = begin("seed-" + std::to_string(seed) + "/" + stem, inputs, {ckpt, log});
  if (!s.needed) return;
  const auto t0 = Clock::now();
  adapt::TrainPlan plan = cfg_.plans.at(pname);
  plan.seed = stage_seed(seed, stem);
  plan.seed_checkpoint = rel(src);
  auto seed_model = asnet::load_checkpoint(src.string());
  const std::string src_file_digest = artifact_digest(src);
  adapt::TrainResult r{seed_model, {}};
  json info;
  if (regime == adapt::Regime::finetune_onehot) {
    r = adapt::finetune_onehot(plan, seed_model, load(plan.devices, scenegen::Split::train));
  } else if (regime == adapt::Regime::ts_paired) {
    auto m = manifest();
    std::erase_if(m.entries, [&](const scenegen::RecordingEntry& e) {
      return e.device_id != cfg_.corpus.source_device && e.pair_id.empty();
    });
    scenegen::LoadOptions lo;
    lo.seg_len = cfg_.features.seg_len;
    lo.workers = workers_;
    const auto paired = scenegen::load_paired(m, scenegen::Filter{plan.devices, scenegen::Split::train},
                                              cfg_.corpus.source_device, lo);
    auto teacher = seed_model;
    const auto before = asnet::model_digest(teacher);
    r = adapt::adapt_ts_paired(plan, teacher, seed_model, paired, workers_);
    info["teacher_digest_before"] = before;
    info["teacher_digest_after"] = asnet::model_digest(teacher);
    if (before != info["teacher_digest_after"]) fail(ErrorKind::state, "ts-paired modified the teacher");
  } else {
    const auto nle = nlelearn::load_nle(nle_path.string());
    const auto before = nlelearn::nle_digest(nle);
    io_audit::reset();
    const auto target = load(plan.devices, scenegen::Split::train);
    r = regime == adapt::Regime::nle ? adapt::adapt_nle(plan, nle, seed_model, target)
                                     : adapt::adapt_nle_rtsl(plan, nle, seed_model, target);
    std::size_t source_opens = 0;
    const auto m = manifest();
    std::set<std::string> source_files;
    for (const auto& e : m.entries)
      if (e.device_id == cfg_.corpus.source_device) source_files.insert((fs::path(m.root) / e.path).lexically_normal().string());
    for (const auto& p : io_audit::opened()) source_opens += source_files.count(fs::path(p).lexically_normal().string());
    info["nle_digest_before"] = before;
    info["nle_digest_after"] = nlelearn::nle_digest(nle);
    info["source_files_opened"] = source_opens;
    if (before != info["nle_digest_after"]) fail(ErrorKind::state, "NLE adaptation modified the NLE matrix");
  }
  if (artifact_digest(src) != src_file_digest) fail(ErrorKind::state, "seed checkpoint changed during adaptation");
  asnet::save_checkpoint(r.model, ckpt.string());
  adapt::write_log(r.log, log.string());
  if (r.log.aborted)
    fail(ErrorKind::numeric, adapt::to_string(regime) + ": training diverged (" + r.log.abort_reason + "); last good epoch saved");
  info["digest"] = r.log.digest;
  finish(s, {ckpt, log}, since(t0), info);
}

std::vector<evalkit::AccuracyReport> Pipeline::evaluate(std::uint64_t seed, const std::vector<std::string>& stems) {
  const fs::path dir = seed_dir(seed);
  std::vector<ModelRow> rows;
  for (const auto& r : model_rows()) {
    const bool wanted = stems.empty() || std::find(stems.begin(), stems.end(), r.stem) != stems.end() ||
                        std::find(stems.begin(), stems.end(), r.label) != stems.end();
    if (!wanted) continue;
    if (!fs::exists(dir / (r.stem + ".nlek"))) {
      if (!stems.empty()) require_artifact(dir / (r.stem + ".nlek"), r.stem == "source" ? "train-source" : "adapt");
      continue;
    }
    rows.push_back(r);
  }
  if (rows.empty()) require_artifact(dir / "source.nlek", "train-source");
  const fs::path txt = dir / "report.txt", tsv = dir / "report.tsv", conf = dir / "confusion.tsv";
  json inputs = {{"average_posteriors", cfg_.average_posteriors},
                 {"manifest", artifact_digest(workdir_ / "corpus" / "manifest.tsv")}};
  for (const auto& r : rows) inputs["models"][r.label] = artifact_digest(dir / (r.stem + ".nlek"));
  auto s = begin("seed-" + std::to_string(seed) + "/evaluate", inputs, {txt, tsv, conf});
  // Reports are cheap to recompute; an up-to-date stage just skips the writes.
  const auto t0 = Clock::now();
  std::vector<evalkit::AccuracyReport> reports;
  const auto test = load(cfg_.device_ids(), scenegen::Split::test);
  std::string conf_text;
  for (const auto& r : rows) {
    auto m = asnet::load_checkpoint((dir / (r.stem + ".nlek")).string());
    auto rep = evalkit::evaluate(m, test, r.label, {cfg_.average_posteriors, workers_});
    // Devices in configuration order.
    std::vector<evalkit::DeviceResult> ordered;
    for (const auto& id : cfg_.device_ids())
      if (const auto* d = rep.find(id)) ordered.push_back(*d);
    rep.devices = ordered;
    conf_text += evalkit::render_confusion(rep);
    reports.push_back(std::move(rep));
  }
  if (!s.needed) return reports;
  save_text(txt, "seed " + std::to_string(seed) + "\n" + evalkit::render_table(reports, cfg_.device_ids()));
  save_text(tsv, evalkit::render_tsv(reports));
  save_text(conf, conf_text);
  finish(s, {txt, tsv, conf}, since(t0));
  std::cerr << evalkit::render_table(reports, cfg_.device_ids());
  return reports;
}

void Pipeline::visualize(std::uint64_t seed) {
  const fs::path dir = seed_dir(seed), vdir = dir / "viz";
  const fs::path src = require_artifact(dir / "source.nlek", "train-source");
  const fs::path nle_path = require_artifact(dir / "nle_matrix.nlek", "learn-nle");
  const std::vector<fs::path> out{vdir / "tsne.csv", vdir / "tsne.svg", vdir / "nle_pca.csv", vdir / "nle_pca.svg",
                                  vdir / "summary.json"};
  json inputs = {{"perplexity", cfg_.viz.perplexity},
                 {"iters", cfg_.viz.iters},
                 {"max_points", cfg_.viz.max_points},
                 {"seed", seed},
                 {"model", artifact_digest(src)},
                 {"nle", artifact_digest(nle_path)},
                 {"manifest", artifact_digest(workdir_ / "corpus" / "manifest.tsv")}};
  auto s = begin("seed-" + std::to_string(seed) + "/visualize", inputs, out);
  if (!s.needed) return;
  const auto t0 = Clock::now();
  fs::create_directories(vdir);
  const auto scenes = scenegen::make_scenes(cfg_.corpus);

  // Soft labels of the source model on source-device test recordings.
  auto model = asnet::load_checkpoint(src.string());
  const auto test = load({cfg_.corpus.source_device}, scenegen::Split::test);
  const Matrix post = asnet::infer_posteriors(model, test.inputs, cfg_.nle.temperature, 256, workers_);
  const std::size_t n = std::min(cfg_.viz.max_points, test.size());
  Matrix picked(static_cast<Eigen::Index>(n), post.cols());
  std::vector<embedviz::PointInfo> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = i * test.size() / n;  // even stride, deterministic
    picked.row(static_cast<Eigen::Index>(i)) = post.row(static_cast<Eigen::Index>(idx));
    const auto& sc = scenes[test.labels[idx]];
    pts.push_back({"seg" + std::to_string(idx), sc.name, std::string(scenegen::to_string(sc.cluster))});
  }
  const auto dm = embedviz::pairwise_skld(picked, pts, workers_);
  embedviz::TsneOptions to;
  to.perplexity = std::min(cfg_.viz.perplexity, static_cast<double>(n) - 1.5);
  to.iters = cfg_.viz.iters;
  to.seed = stage_seed(seed, "tsne");
  const auto calib = embedviz::calibrate(dm.d, to.perplexity);
  double calib_err = 0;
  for (double p : calib.perplexity) calib_err = std::max(calib_err, std::abs(p - to.perplexity));
  const auto tsne = embedviz::tsne_embed(dm, to);
  std::vector<std::string> tl;
  for (const auto& p : pts) tl.push_back(p.super_cluster);
  embedviz::emit_scatter(tsne, out[0].string(), out[1].string(), "SKLD t-SNE of source-model soft labels");

  const auto nle = nlelearn::load_nle(nle_path.string());
  const Matrix vecs = nle.columns().transpose();  // row c = NLE_c
  std::vector<embedviz::PointInfo> npts;
  std::vector<std::string> nl;
  for (const auto& sc : scenes) {
    npts.push_back({sc.name, sc.name, std::string(scenegen::to_string(sc.cluster))});
    nl.push_back(npts.back().super_cluster);
  }
  const auto pca = embedviz::pca_project(vecs, 2, npts);
  embedviz::emit_scatter(pca, out[2].string(), out[3].string(), "PCA of NLE vectors");
  const json summary = {{"tsne_points", n},
                        {"tsne_perplexity", to.perplexity},
                        {"tsne_calibration_max_error", calib_err},
                        {"tsne_objective", tsne.objective},
                        {"tsne_silhouette_super_cluster", embedviz::silhouette(tsne.coords, tl)},
                        {"nle_pca_silhouette_super_cluster", embedviz::silhouette(pca.coords, nl)},
                        {"nle_pca_variances", std::vector<double>(pca.variances.begin(), pca.variances.end())},
                        {"skld_max_asymmetry", (dm.d - dm.d.transpose()).cwiseAbs().maxCoeff()},
                        {"skld_max_diagonal", dm.d.diagonal().cwiseAbs().maxCoeff()}};
  save_text(out[4], summary.dump(2) + "\n");
  finish(s, out, since(t0), summary);
}

void Pipeline::run_all() {
  const auto t0 = Clock::now();
  gen_corpus();
  std::map<std::uint64_t, std::vector<evalkit::AccuracyReport>> per_seed;
  for (auto seed : cfg_.seeds) {
    note("seed " + std::to_string(seed));
    train_source(seed, false);
    train_source(seed, true);
    learn_nle(seed);
    for (auto r : {adapt::Regime::finetune_onehot, adapt::Regime::ts_paired, adapt::Regime::nle, adapt::Regime::nle_rtsl})
      adapt(seed, r);
    per_seed[seed] = evaluate(seed);
  }
  visualize(cfg_.seeds.front());

  // Sweep summary: mean accuracy per row and device over seeds.
  const auto devices = cfg_.device_ids();
  std::vector<evalkit::TableRow> mean;
  json sweep = {{"seeds", cfg_.seeds}, {"devices", devices}, {"per_seed", json::object()}, {"mean", json::object()}};
  std::string text;
  for (const auto& [seed, reps] : per_seed) {
    text += "seed " + std::to_string(seed) + "\n" + evalkit::render_table(reps, devices) + "\n";
    for (const auto& r : reps)
      for (const auto& d : r.devices) sweep["per_seed"][std::to_string(seed)][r.name][d.device] = d.accuracy();
  }
  std::string tsv_text = "name\tdevice\tmean_accuracy\tseeds\n";
  for (const auto& row : model_rows()) {
    evalkit::TableRow m{row.label, {}};
    for (const auto& dev : devices) {
      double sum = 0;
      std::size_t k = 0;
      for (const auto& [seed, reps] : per_seed)
        for (const auto& r : reps)
          if (r.name == row.label)
            if (const auto* d = r.find(dev)) sum += d->accuracy(), ++k;
      if (k == 0) continue;
      m.accuracy[dev] = sum / static_cast<double>(k);
      sweep["mean"][row.label][dev] = m.accuracy[dev];
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", m.accuracy[dev]);
      tsv_text += row.label + "\t" + dev + "\t" + buf + "\t" + std::to_string(k) + "\n";
    }
    if (!m.accuracy.empty()) mean.push_back(m);
  }
  text += "mean over " + std::to_string(per_seed.size()) + " seed(s)\n" + evalkit::render_table(mean, devices);
  save_text(workdir_ / "sweep.txt", text);
  save_text(workdir_ / "sweep.json", sweep.dump(2) + "\n");
  save_text(workdir_ / "sweep.tsv", tsv_text);
  record_["reports"] = json::array({"sweep.txt", "sweep.json", "sweep.tsv"});
  for (auto seed : cfg_.seeds) record_["reports"].push_back(rel(seed_dir(seed) / "report.tsv"));
  record_["run_all_seconds"] = since(t0);
  save_record();
  std::cerr << text;
}

}  // namespace nlekit::tool
