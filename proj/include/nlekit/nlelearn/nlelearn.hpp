#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nlekit/asnet/asnet.hpp"
#include "nlekit/divloss/divloss.hpp"
#include "nlekit/scenegen/scenegen.hpp"

/// The K x K non-uniform label embedding matrix: column c is the soft label
/// that replaces a one-hot label of class c. Stored as free column logits so
/// the simplex constraint holds by construction.
namespace nlekit::nlelearn {

using divloss::Matrix;
using divloss::Vector;

struct NleMatrix {
  Matrix logits;  // K x K; column c feeds softmax into NLE_c

  std::size_t num_classes() const { return static_cast<std::size_t>(logits.rows()); }
  /// K x K, column c = softmax(logits.col(c)).
  Matrix columns() const;
  Vector column(std::size_t c) const;
  /// [N x K] rows NLE_{label_i}; input error on out-of-range labels.
  Matrix targets(std::span<const std::size_t> labels) const;
  /// Invariant check: square, finite. Configuration error when K differs.
  void check(std::size_t expected_classes, const std::string& what) const;
};

/// Column c = log(max(mean posterior of class c, 1e-8)). Data error naming
/// the first class without samples.
NleMatrix init_from_posteriors(const Matrix& posteriors, std::span<const std::size_t> labels, std::size_t num_classes);
NleMatrix init_from_centroids(asnet::Model& teacher, const scenegen::SegmentSet& source, double temperature,
                              unsigned workers = 1);

struct NleOptions {
  double lr = 0.01;
  std::uint64_t steps = 2000;
  std::size_t batch = 128;
  std::uint64_t seed = 0;
  double temperature = 2.0;
  double momentum = 0.9;
  std::uint64_t eval_every = 100;
};

struct NleCheckpoint {
  std::uint64_t step;
  double lr;
  double loss;  // L_LE on the full set
};

struct NleResult {
  NleMatrix nle;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<NleCheckpoint> history;
};

/// Full-set L_LE of a matrix against fixed teacher posteriors.
double full_loss(const NleMatrix& nle, const Matrix& posteriors, std::span<const std::size_t> labels);

/// SGD (momentum, cosine lr per step) on minibatch L_LE starting from `init`.
/// Full-set L_LE is measured every eval_every steps and at the end; the
/// returned matrix is the best measured one, so final_loss <= initial_loss.
/// Numeric error with the step index on a non-finite loss.
NleResult train_nle(const NleMatrix& init, const Matrix& posteriors, std::span<const std::size_t> labels,
                    const NleOptions& opts);
/// Teacher posteriors are computed once in eval mode; the teacher is never
/// written to.
NleResult train_nle(asnet::Model& teacher, const scenegen::SegmentSet& source, const NleOptions& opts,
                    unsigned workers = 1);

/// NLE_c for a one-hot row; input error when the row is not one-hot.
Vector nle_lookup(const NleMatrix& nle, std::span<const double> one_hot_label);

std::string save_nle(const NleMatrix& nle, const std::string& path, const nlohmann::json& meta = {});
NleMatrix load_nle(const std::string& path);
std::string nle_digest(const NleMatrix& nle, const nlohmann::json& meta = {});

/// Tab-separated, one row per class: name then NLE_c entries.
void export_text(const NleMatrix& nle, const std::string& path, const std::vector<std::string>& class_names = {});

}  // namespace nlekit::nlelearn
