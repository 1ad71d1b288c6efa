#include "nlekit/adapt/adapt.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "nlekit/diffcore/optim.hpp"
#include "nlekit/divloss/divloss.hpp"
#include "nlekit/rng.hpp"

namespace nlekit::adapt {

using divloss::Matrix;
using diffcore::Tensor;

std::string to_string(Regime r) {
  switch (r) {
    case Regime::source_ce: return "source-ce";
    case Regime::finetune_onehot: return "finetune-onehot";
    case Regime::ts_paired: return "ts-paired";
    case Regime::nle: return "nle";
    case Regime::nle_rtsl: return "nle-rtsl";
  }
  return "?";
}

Regime parse_regime(const std::string& s) {
  for (Regime r : {Regime::source_ce, Regime::finetune_onehot, Regime::ts_paired, Regime::nle, Regime::nle_rtsl})
    if (to_string(r) == s) return r;
  fail(ErrorKind::config, "unknown regime '" + s + "' (source-ce, finetune-onehot, ts-paired, nle, nle-rtsl)");
}

bool is_adaptation(Regime r) { return r != Regime::source_ce; }

std::vector<std::string> TrainPlan::violations() const {
  std::vector<std::string> v;
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) v.push_back("initial_lr: must be > 0");
  if (batch < 2) v.push_back("batch: must be >= 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) v.push_back("lambda: must be >= 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) v.push_back("temperature: must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) v.push_back("momentum: must lie in [0, 1)");
  return v;
}

void TrainPlan::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid " + to_string(regime) + " plan:";
  for (const auto& s : v) msg += "\n  " + s;
  fail(ErrorKind::config, msg);
}

TrainPlan default_plan(Regime r) {
  TrainPlan p;
  p.regime = r;
  if (is_adaptation(r)) {
    p.initial_lr = 0.002;
    p.epochs = 20;
  }
  return p;
}

nlohmann::json to_json(const TrainPlan& p) {
  return {{"regime", to_string(p.regime)}, {"initial_lr", p.initial_lr}, {"epochs", p.epochs},
          {"batch", p.batch},              {"lambda", p.lambda},         {"temperature", p.temperature},
          {"momentum", p.momentum},        {"seed", p.seed},             {"freeze_bn", p.freeze_bn},
          {"rtsl_all_columns", p.rtsl_all_columns}, {"temper_nle", p.temper_nle},
          {"devices", p.devices},          {"seed_checkpoint", p.seed_checkpoint}};
}

TrainPlan plan_from_json(const nlohmann::json& j, const TrainPlan& base) {
  TrainPlan p = base;
  try {
    if (j.contains("regime")) p.regime = parse_regime(j.at("regime").get<std::string>());
    p.initial_lr = j.value("initial_lr", p.initial_lr);
    p.epochs = j.value("epochs", p.epochs);
    p.batch = j.value("batch", p.batch);
    p.lambda = j.value("lambda", p.lambda);
    p.temperature = j.value("temperature", p.temperature);
    p.momentum = j.value("momentum", p.momentum);
    p.seed = j.value("seed", p.seed);
    p.freeze_bn = j.value("freeze_bn", p.freeze_bn);
    p.rtsl_all_columns = j.value("rtsl_all_columns", p.rtsl_all_columns);
    p.temper_nle = j.value("temper_nle", p.temper_nle);
    p.devices = j.value("devices", p.devices);
    p.seed_checkpoint = j.value("seed_checkpoint", p.seed_checkpoint);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("train plan: ") + e.what());
  }
  return p;
}

std::string render_log(const TrainLog& log) {
  std::ostringstream os;
  nlohmann::json plan = to_json(log.plan);
  plan["event"] = "plan";
  plan["total_steps"] = log.total_steps;
  os << plan.dump() << "\n";
  for (const auto& e : log.epochs) {
    nlohmann::json j = {{"event", "epoch"},       {"epoch", e.epoch},         {"regime", to_string(log.plan.regime)},
                        {"loss", e.loss},         {"loss_nle", e.loss_nle},   {"loss_rtsl", e.loss_rtsl},
                        {"lr", e.lr},             {"lr_end", e.lr_end},       {"acc", e.acc},
                        {"seconds", e.seconds}};
    if (log.plan.regime == Regime::nle_rtsl) j["loss_rtsl_weighted"] = log.plan.lambda * e.loss_rtsl;
    os << j.dump() << "\n";
  }
  if (log.aborted) os << nlohmann::json{{"event", "abort"}, {"reason", log.abort_reason}}.dump() << "\n";
  os << nlohmann::json{{"event", "done"},
                       {"epochs_completed", log.epochs.size()},
                       {"wall_seconds", log.wall_seconds},
                       {"digest", log.digest}}
            .dump()
     << "\n";
  return os.str();
}

void write_log(const TrainLog& log, const std::string& path) {
  const std::string s = render_log(log);
  binio::write_file(path, binio::Bytes(s.begin(), s.end()));
}

namespace {

struct BatchLoss {
  divloss::LossValue value;
  std::string key;  // gradient w.r.t. posteriors
};

// Per-batch objective: given batch indices and student posteriors, return
// the loss and its gradient w.r.t. those posteriors.
using Objective = std::function<BatchLoss(const std::vector<std::size_t>& idx, const Matrix& posteriors)>;

Matrix to_matrix(const Tensor<float>& t) {
  Matrix m(static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
  for (std::size_t i = 0; i < t.size(); ++i) m.data()[i] = t[i];
  return m;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

std::vector<std::size_t> gather(const std::vector<std::size_t>& v, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

bool state_finite(asnet::Model& m) {
  for (const auto& p : m.net.state())
    for (float v : p.tensor->data())
      if (!std::isfinite(v)) return false;
  return true;
}

TrainResult run(const TrainPlan& plan, asnet::Model model, const scenegen::SegmentSet& data, double temperature,
                const Objective& objective) {
  plan.validate();
  if (data.size() == 0) fail(ErrorKind::config, to_string(plan.regime) + ": empty data selection");
  asnet::check_input(model, data.inputs.shape());
  if (data.num_classes != model.config.num_classes)
    fail(ErrorKind::config, to_string(plan.regime) + ": data has " + std::to_string(data.num_classes) +
                                " classes but the model has " + std::to_string(model.config.num_classes));
  asnet::set_batchnorm_frozen(model, plan.freeze_bn);

  const auto t0 = std::chrono::steady_clock::now();
  TrainLog log;
  log.plan = plan;
  // A trailing batch of one sample gives batchnorm nothing to normalize; it is dropped.
  const std::size_t n = data.size();
  std::size_t per_epoch = (n + plan.batch - 1) / plan.batch;
  if (n % plan.batch == 1 && per_epoch > 1) --per_epoch;
  log.total_steps = per_epoch * plan.epochs;

  diffcore::OptimizerState<float> opt(plan.initial_lr, plan.momentum, std::max<std::uint64_t>(log.total_steps, 1));
  asnet::Model last_good = model;
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    auto batches = scenegen::shuffled_batches(n, plan.batch, derive_seed(plan.seed, 1000 + epoch));
    batches.resize(per_epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    opt.apply_schedule();
    rec.lr = opt.learning_rate;
    double sum = 0, sum_nle = 0, sum_rtsl = 0;
    std::size_t correct = 0, seen = 0;
    for (const auto& idx : batches) {
      opt.apply_schedule();
      const Tensor<float> logits = model.net.forward(data.gather(idx), diffcore::Mode::train);
      const Matrix z = to_matrix(logits);
      const Matrix p = divloss::softmax_rows(z, temperature);
      const BatchLoss loss = objective(idx, p);
      auto abort = [&](const std::string& what) {
        log.aborted = true;
        log.abort_reason = what + " at epoch " + std::to_string(epoch) + ", step " + std::to_string(opt.step);
        model = last_good;
      };
      if (!std::isfinite(loss.value.value) || !z.allFinite()) {
        abort("non-finite loss");
        break;
      }
      log.step_losses.push_back(loss.value.value);
      const Matrix dz = divloss::softmax_backward(p, loss.value.grad(loss.key), temperature);
      Tensor<float> upstream(logits.shape());
      for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] = static_cast<float>(dz.data()[i]);
      for (auto& prm : model.net.parameters()) prm.tensor->zero_grad();
      model.net.backward(upstream);
      diffcore::sgd_step(opt, model.net.parameters());
      // ReLU and max-pool map NaN to a finite value, so a blown-up weight or
      // running statistic can hide behind a finite loss.
      if (!state_finite(model)) {
        abort("non-finite parameters");
        break;
      }

      sum += loss.value.value;
      if (auto it = loss.value.components.find("nle"); it != loss.value.components.end()) sum_nle += it->second;
      if (auto it = loss.value.components.find("rtsl"); it != loss.value.components.end()) sum_rtsl += it->second;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        Eigen::Index arg;
        z.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        correct += static_cast<std::size_t>(arg) == data.labels[idx[i]];
      }
      seen += idx.size();
    }
    if (log.aborted) break;
    const double nb = static_cast<double>(batches.size());
    rec.loss = sum / nb;
    rec.loss_nle = sum_nle / nb;
    rec.loss_rtsl = sum_rtsl / nb;
    rec.lr_end = diffcore::cosine_lr(opt.step, opt.total_steps, opt.initial_lr);
    rec.acc = 100.0 * static_cast<double>(correct) / static_cast<double>(seen);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - te).count();
    log.epochs.push_back(rec);
    last_good = model;
  }
  for (auto& prm : model.net.parameters()) prm.tensor->clear_grad();
  asnet::set_batchnorm_frozen(model, false);
  model.role = is_adaptation(plan.regime) ? "target" : "source";
  log.digest = asnet::model_digest(model);
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(log)};
}

void expect_regime(const TrainPlan& plan, Regime r) {
  if (plan.regime != r)
    fail(ErrorKind::config, "plan regime is " + to_string(plan.regime) + ", expected " + to_string(r));
}

void check_seed(const asnet::Model& seed, const scenegen::SegmentSet& data, const std::string& what) {
  if (seed.config.num_classes != data.num_classes)
    fail(ErrorKind::config, what + ": seed model has K=" + std::to_string(seed.config.num_classes) + ", data has K=" +
                                std::to_string(data.num_classes));
}

Objective ce_objective(const scenegen::SegmentSet& data) {
  return [&data](const std::vector<std::size_t>& idx, const Matrix& p) {
    const auto labels = gather(data.labels, idx);
    return BatchLoss{divloss::cross_entropy(p, divloss::one_hot(labels, data.num_classes)), "posteriors"};
  };
}

}  // namespace

TrainResult train_source(const TrainPlan& plan, const asnet::ModelConfig& config, const scenegen::SegmentSet& data) {
  expect_regime(plan, Regime::source_ce);
  asnet::Model m = asnet::build_model(config, derive_seed(plan.seed, 0));
  return run(plan, std::move(m), data, 1.0, ce_objective(data));
}

TrainResult finetune_onehot(const TrainPlan& plan, const asnet::Model& seed_model, const scenegen::SegmentSet& target) {
  expect_regime(plan, Regime::finetune_onehot);
  check_seed(seed_model, target, "finetune-onehot");
  return run(plan, seed_model, target, 1.0, ce_objective(target));
}

TrainResult adapt_ts_paired(const TrainPlan& plan, asnet::Model& teacher, const asnet::Model& student_seed,
                            const scenegen::PairedSet& paired, unsigned workers) {
  expect_regime(plan, Regime::ts_paired);
  check_seed(student_seed, paired.target, "ts-paired");
  if (teacher.config.num_classes != student_seed.config.num_classes)
    fail(ErrorKind::config, "ts-paired: teacher and student disagree on K");
  if (paired.source.size() != paired.target.size())
    fail(ErrorKind::data, "ts-paired: source and target segment counts differ");
  for (const auto& e : paired.target.entries)
    if (e.pair_id.empty()) fail(ErrorKind::data, "ts-paired: entry '" + e.path + "' has no pair_id");
  // The teacher is frozen and run in eval mode, so its posteriors for each
  // paired source segment are fixed; computing them once is the same as
  // recomputing them per batch.
  const Matrix teacher_post = asnet::infer_posteriors(teacher, paired.source.inputs, plan.temperature, 256, workers);
  return run(plan, student_seed, paired.target, plan.temperature,
             [&teacher_post](const std::vector<std::size_t>& idx, const Matrix& p) {
               return BatchLoss{divloss::ts_loss(gather_rows(teacher_post, idx), p), "student"};
             });
}

// Row c = NLE_c, optionally tempered.
static Matrix nle_table(const TrainPlan& plan, const nlelearn::NleMatrix& nle) {
  Matrix t = nle.columns().transpose();
  if (plan.temper_nle) {
    t = (t.array().log() / plan.temperature).exp().matrix();
    for (Eigen::Index r = 0; r < t.rows(); ++r) t.row(r) /= t.row(r).sum();
  }
  return t;
}

TrainResult adapt_nle(const TrainPlan& plan, const nlelearn::NleMatrix& nle, const asnet::Model& student_seed,
                      const scenegen::SegmentSet& target) {
  expect_regime(plan, Regime::nle);
  check_seed(student_seed, target, "nle");
  nle.check(student_seed.config.num_classes, "nle");
  const Matrix table = nle_table(plan, nle);
  return run(plan, student_seed, target, plan.temperature,
             [&](const std::vector<std::size_t>& idx, const Matrix& p) {
               auto l = divloss::nle_adaptation_loss(gather_rows(table, gather(target.labels, idx)), p);
               l.components["nle"] = l.value;
               return BatchLoss{std::move(l), "student"};
             });
}

TrainResult adapt_nle_rtsl(const TrainPlan& plan, const nlelearn::NleMatrix& nle, const asnet::Model& student_seed,
                           const scenegen::SegmentSet& target) {
  expect_regime(plan, Regime::nle_rtsl);
  check_seed(student_seed, target, "nle-rtsl");
  nle.check(student_seed.config.num_classes, "nle-rtsl");
  const Matrix table = nle_table(plan, nle);
  return run(plan, student_seed, target, plan.temperature,
             [&](const std::vector<std::size_t>& idx, const Matrix& p) {
               return BatchLoss{divloss::nle_rtsl_loss(gather_rows(table, gather(target.labels, idx)), p, plan.lambda,
                                                       plan.rtsl_all_columns ? &table : nullptr),
                                "student"};
             });
}

double full_nle_loss(asnet::Model& m, const nlelearn::NleMatrix& nle, const scenegen::SegmentSet& data,
                     double temperature) {
  const Matrix p = asnet::infer_posteriors(m, data.inputs, temperature);
  return divloss::nle_adaptation_loss(nle.targets(data.labels), p).value;
}

}  // namespace nlekit::adapt
