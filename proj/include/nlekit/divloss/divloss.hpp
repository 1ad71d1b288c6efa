#pragma once

#include <Eigen/Core>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nlekit/error.hpp"

/// Divergences (KLD, SKLD, smoothed L1, total mutual distance) and the
/// training losses built from them. All probabilities are floored at
/// kProbFloor and renormalized before use; gradients are exact derivatives of
/// the clamped computation.
///
/// Batches are row-major [N x K] matrices, one distribution per row.
namespace nlekit::divloss {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kProbFloor = 1e-8;

struct LossValue {
  double value = 0.0;
  std::map<std::string, Matrix> gradients;
  /// Named scalar parts of composite losses (e.g. "nle", "rtsl").
  std::map<std::string, double> components;

  const Matrix& grad(const std::string& name) const;
};

/// max(p, floor) / sum(max(p, floor)).
Vector clamp_simplex(std::span<const double> p);

/// KL(P || Q) = sum_i p_i log(p_i / q_i), natural log.
double kld(std::span<const double> p, std::span<const double> q);
/// (KL(P || Q) + KL(Q || P)) / 2.
double skld(std::span<const double> p, std::span<const double> q);
/// Huber loss with unit threshold.
double smoothed_l1(double x, double y);
/// d SL1(x, y) / d y.
double smoothed_l1_grad_y(double x, double y);

/// -(1/N) sum_i log p_i[label_i]. Gradient key "posteriors".
LossValue cross_entropy(const Matrix& posteriors, const Matrix& one_hot);

/// (1/N) sum_i SKLD(teacher_i, softmax(nle_logits.col(label_i))). The NLE
/// matrix is parameterized by column logits (K x K). Gradient key
/// "nle_logits"; the teacher is treated as constant.
LossValue nle_learning_loss(const Matrix& teacher_posteriors, const Matrix& one_hot, const Matrix& nle_logits);

/// (1/N) sum_i KL(target_i || student_i), targets being the label-indexed
/// NLE vectors of the batch. Gradient key "student".
LossValue nle_adaptation_loss(const Matrix& nle_targets, const Matrix& student_posteriors);

/// (1/N) sum_i KL(teacher_i || student_i) over rows aligned by pair. Gradient
/// key "student".
LossValue ts_loss(const Matrix& teacher_posteriors, const Matrix& student_posteriors);

/// (1/N^2) sum_i sum_j SKLD(d_i, d_j) over all ordered pairs. Gradient key
/// "distributions".
LossValue mutual_distance(const Matrix& distributions);

/// SL1(V(nle_vectors), V(student)). Gradient key "student".
LossValue rtsl_loss(const Matrix& nle_vectors, const Matrix& student_posteriors);

/// L_NLE(targets, student) + lambda * L_RTSL(rtsl_reference, student).
/// `rtsl_reference` is normally the same label-indexed targets; components
/// "nle" and "rtsl" hold the unweighted parts.
LossValue nle_rtsl_loss(const Matrix& nle_targets, const Matrix& student_posteriors, double lambda,
                        const Matrix* rtsl_reference = nullptr);

/// Row-wise softmax(logits / temperature).
Matrix softmax_rows(const Matrix& logits, double temperature);
/// Chain rule through softmax_rows: given d loss / d posteriors, returns
/// d loss / d logits.
Matrix softmax_backward(const Matrix& posteriors, const Matrix& grad_posteriors, double temperature);

/// Validates a one-hot batch and returns the class index of each row.
std::vector<std::size_t> labels_from_one_hot(const Matrix& one_hot);
Matrix one_hot(std::span<const std::size_t> labels, std::size_t num_classes);

}  // namespace nlekit::divloss
