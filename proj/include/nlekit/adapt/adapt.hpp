#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlekit/asnet/asnet.hpp"
#include "nlekit/nlelearn/nlelearn.hpp"
#include "nlekit/scenegen/scenegen.hpp"

/// Training loops for source CE training and the four adaptation regimes.
/// All regimes share one SGD loop: momentum 0.9, cosine lr per step, a fresh
/// shuffle per epoch from derive_seed(seed, epoch).
namespace nlekit::adapt {

enum class Regime { source_ce, finetune_onehot, ts_paired, nle, nle_rtsl };
std::string to_string(Regime r);
Regime parse_regime(const std::string& s);
bool is_adaptation(Regime r);

struct TrainPlan {
  Regime regime = Regime::source_ce;
  double initial_lr = 0.01;
  std::size_t epochs = 30;
  std::size_t batch = 64;
  double lambda = 10.0;
  double temperature = 2.0;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  bool freeze_bn = false;
  /// nle-rtsl: take V(NLE) over all K columns instead of the batch's
  /// label-indexed vectors.
  bool rtsl_all_columns = false;
  /// nle, nle-rtsl: temper the NLE vectors by T as well (softmax(log v / T)).
  /// Off by default, they are already built from tempered posteriors.
  bool temper_nle = false;
  std::vector<std::string> devices;  // training data selector
  std::string seed_checkpoint;       // adaptation regimes

  std::vector<std::string> violations() const;
  void validate() const;
};

/// Defaults per regime: source-ce 0.01 for 30 epochs, adaptations 0.002 for 20.
TrainPlan default_plan(Regime r);
nlohmann::json to_json(const TrainPlan& p);
/// Keys absent from `j` keep the values of `base`.
TrainPlan plan_from_json(const nlohmann::json& j, const TrainPlan& base);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double loss_nle = 0.0;   // nle / nle-rtsl
  double loss_rtsl = 0.0;  // nle-rtsl, unweighted
  double lr = 0.0;         // at the first step of the epoch
  double lr_end = 0.0;     // after the last step
  double acc = 0.0;        // segment accuracy on training batches, %
  double seconds = 0.0;
};

struct TrainLog {
  TrainPlan plan;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::uint64_t total_steps = 0;
  double wall_seconds = 0.0;
  std::string digest;
  bool aborted = false;
  std::string abort_reason;
};

/// One JSON object per line: a "plan" event, one "epoch" event per epoch,
/// an optional "abort" event and a closing "done" event with the digest.
std::string render_log(const TrainLog& log);
void write_log(const TrainLog& log, const std::string& path);

struct TrainResult {
  asnet::Model model;
  TrainLog log;
};

/// Fresh model from derive_seed(plan.seed, 0) trained with CE.
TrainResult train_source(const TrainPlan& plan, const asnet::ModelConfig& config, const scenegen::SegmentSet& data);
TrainResult finetune_onehot(const TrainPlan& plan, const asnet::Model& seed_model, const scenegen::SegmentSet& target);
/// Student starts as a copy of `student_seed`; the teacher is only run in
/// eval mode on the paired source segments.
TrainResult adapt_ts_paired(const TrainPlan& plan, asnet::Model& teacher, const asnet::Model& student_seed,
                            const scenegen::PairedSet& paired, unsigned workers = 1);
TrainResult adapt_nle(const TrainPlan& plan, const nlelearn::NleMatrix& nle, const asnet::Model& student_seed,
                      const scenegen::SegmentSet& target);
TrainResult adapt_nle_rtsl(const TrainPlan& plan, const nlelearn::NleMatrix& nle, const asnet::Model& student_seed,
                           const scenegen::SegmentSet& target);

/// Mean full-set L_NLE of a model on a segment set (eval mode).
double full_nle_loss(asnet::Model& m, const nlelearn::NleMatrix& nle, const scenegen::SegmentSet& data,
                     double temperature);

}  // namespace nlekit::adapt
