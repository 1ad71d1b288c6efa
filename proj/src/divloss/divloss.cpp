#include "nlekit/divloss/divloss.hpp"

#include <cmath>
#include <vector>

namespace nlekit::divloss {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorKind::input, std::string(what) + ": shape mismatch [" + std::to_string(a.rows()) + "x" +
                               std::to_string(a.cols()) + "] vs [" + std::to_string(b.rows()) + "x" +
                               std::to_string(b.cols()) + "]");
  if (a.rows() == 0) fail(ErrorKind::input, std::string(what) + ": empty batch");
}

/// Clamped rows plus what the backward pass needs.
struct Clamped {
  Matrix p;       // clamped and renormalized
  Matrix active;  // 1 where the raw value exceeded the floor
  Vector total;   // per-row sum of floored values
};

Clamped clamp_rows(const Matrix& raw) {
  Clamped c{Matrix(raw.rows(), raw.cols()), Matrix(raw.rows(), raw.cols()), Vector(raw.rows())};
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < raw.cols(); ++k) {
      const double v = raw(i, k);
      const bool on = v > kProbFloor;
      c.active(i, k) = on ? 1.0 : 0.0;
      c.p(i, k) = on ? v : kProbFloor;
      s += c.p(i, k);
    }
    c.total(i) = s;
    c.p.row(i) /= s;
  }
  return c;
}

/// Maps d/d(clamped) to d/d(raw).
Matrix clamp_backward(const Clamped& c, const Matrix& g) {
  Matrix out(g.rows(), g.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double dot = g.row(i).dot(c.p.row(i));
    for (Eigen::Index k = 0; k < g.cols(); ++k) out(i, k) = c.active(i, k) * (g(i, k) - dot) / c.total(i);
  }
  return out;
}

Matrix as_row(std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

/// Row-wise KL(target || student) averaged over rows, with gradient w.r.t.
/// the raw student.
LossValue mean_kld_to_student(const Matrix& target_raw, const Matrix& student_raw, const char* what) {
  check_same_shape(target_raw, student_raw, what);
  const Clamped t = clamp_rows(target_raw), s = clamp_rows(student_raw);
  const double n = static_cast<double>(t.p.rows());
  LossValue out;
  Matrix g(s.p.rows(), s.p.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < t.p.rows(); ++i)
    for (Eigen::Index k = 0; k < t.p.cols(); ++k) {
      total += t.p(i, k) * std::log(t.p(i, k) / s.p(i, k));
      g(i, k) = -t.p(i, k) / s.p(i, k) / n;
    }
  out.value = total / n;
  out.gradients["student"] = clamp_backward(s, g);
  return out;
}

}  // namespace

const Matrix& LossValue::grad(const std::string& name) const {
  auto it = gradients.find(name);
  if (it == gradients.end()) fail(ErrorKind::state, "loss has no gradient named '" + name + "'");
  return it->second;
}

Vector clamp_simplex(std::span<const double> p) {
  const Clamped c = clamp_rows(as_row(p));
  return c.p.row(0).transpose();
}

double kld(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) fail(ErrorKind::input, "kld: length mismatch");
  if (p.empty()) fail(ErrorKind::input, "kld: empty distributions");
  const Vector cp = clamp_simplex(p), cq = clamp_simplex(q);
  double s = 0.0;
  for (Eigen::Index i = 0; i < cp.size(); ++i) s += cp(i) * std::log(cp(i) / cq(i));
  return s;
}

double skld(std::span<const double> p, std::span<const double> q) { return 0.5 * (kld(p, q) + kld(q, p)); }

double smoothed_l1(double x, double y) {
  const double d = std::abs(x - y);
  return d <= 1.0 ? 0.5 * d * d : d - 0.5;
}

double smoothed_l1_grad_y(double x, double y) {
  const double d = x - y;
  if (std::abs(d) <= 1.0) return -d;
  return d > 0 ? -1.0 : 1.0;
}

std::vector<std::size_t> labels_from_one_hot(const Matrix& one_hot) {
  std::vector<std::size_t> labels(static_cast<std::size_t>(one_hot.rows()));
  for (Eigen::Index i = 0; i < one_hot.rows(); ++i) {
    int ones = 0;
    for (Eigen::Index k = 0; k < one_hot.cols(); ++k) {
      const double v = one_hot(i, k);
      if (v == 1.0) {
        ++ones;
        labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(k);
      } else if (v != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) fail(ErrorKind::input, "label row " + std::to_string(i) + " is not one-hot");
  }
  return labels;
}

Matrix one_hot(std::span<const std::size_t> labels, std::size_t num_classes) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes)
      fail(ErrorKind::input, "label " + std::to_string(labels[i]) + " out of range for K=" + std::to_string(num_classes));
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
  }
  return m;
}

LossValue cross_entropy(const Matrix& posteriors, const Matrix& one_hot) {
  check_same_shape(posteriors, one_hot, "cross_entropy");
  const auto labels = labels_from_one_hot(one_hot);
  const Clamped c = clamp_rows(posteriors);
  const double n = static_cast<double>(posteriors.rows());
  Matrix g = Matrix::Zero(posteriors.rows(), posteriors.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
    const auto k = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    total -= std::log(c.p(i, k));
    g(i, k) = -1.0 / (n * c.p(i, k));
  }
  LossValue out;
  out.value = total / n;
  out.gradients["posteriors"] = clamp_backward(c, g);
  return out;
}

LossValue nle_learning_loss(const Matrix& teacher_posteriors, const Matrix& one_hot, const Matrix& nle_logits) {
  check_same_shape(teacher_posteriors, one_hot, "nle_learning_loss");
  const Eigen::Index k = nle_logits.rows();
  if (nle_logits.cols() != k || teacher_posteriors.cols() != k)
    fail(ErrorKind::input, "nle_learning_loss: NLE matrix must be KxK with K matching the posteriors");
  const auto labels = labels_from_one_hot(one_hot);

  // Columns of the NLE matrix as rows, so the shared helpers apply.
  const Matrix columns = softmax_rows(nle_logits.transpose(), 1.0);
  const Clamped nle = clamp_rows(columns);
  const Clamped f = clamp_rows(teacher_posteriors);
  const double n = static_cast<double>(teacher_posteriors.rows());

  Matrix g = Matrix::Zero(k, k);  // d/d clamped column c (row c here)
  double total = 0.0;
  for (Eigen::Index i = 0; i < f.p.rows(); ++i) {
    const auto c = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    double fwd = 0.0, rev = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double p = f.p(i, j), q = nle.p(c, j);
      const double lr = std::log(p / q);
      fwd += p * lr;
      rev -= q * lr;
      g(c, j) += 0.5 * (-lr + 1.0 - p / q) / n;
    }
    total += 0.5 * (fwd + rev);
  }
  const Matrix d_columns = clamp_backward(nle, g);
  LossValue out;
  out.value = total / n;
  out.gradients["nle_logits"] = softmax_backward(columns, d_columns, 1.0).transpose();
  return out;
}

LossValue nle_adaptation_loss(const Matrix& nle_targets, const Matrix& student_posteriors) {
  return mean_kld_to_student(nle_targets, student_posteriors, "nle_adaptation_loss");
}

LossValue ts_loss(const Matrix& teacher_posteriors, const Matrix& student_posteriors) {
  return mean_kld_to_student(teacher_posteriors, student_posteriors, "ts_loss");
}

LossValue mutual_distance(const Matrix& distributions) {
  if (distributions.rows() == 0 || distributions.cols() == 0) fail(ErrorKind::input, "mutual_distance: empty list");
  const Clamped c = clamp_rows(distributions);
  const Eigen::Index n = c.p.rows(), k = c.p.cols();
  const double nn = static_cast<double>(n);
  const Matrix logp = c.p.array().log().matrix();
  const Eigen::RowVectorXd col_p = c.p.colwise().sum();
  const Eigen::RowVectorXd col_log = logp.colwise().sum();

  // Each (p - q)(log p - log q) term is non-negative, so summing pairs
  // directly avoids the cancellation of the expanded closed form.
  double total = 0.0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b)
      total += ((c.p.row(a) - c.p.row(b)).array() * (logp.row(a) - logp.row(b)).array()).sum();

  Matrix g(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      g(i, j) = (nn * logp(i, j) - col_log(j) + nn - col_p(j) / c.p(i, j)) / (nn * nn);

  LossValue out;
  out.value = total / (nn * nn);
  out.gradients["distributions"] = clamp_backward(c, g);
  return out;
}

LossValue rtsl_loss(const Matrix& nle_vectors, const Matrix& student_posteriors) {
  if (nle_vectors.cols() != student_posteriors.cols())
    fail(ErrorKind::input, "rtsl_loss: class count mismatch between NLE vectors and student posteriors");
  if (nle_vectors.rows() == 0 || student_posteriors.rows() == 0) fail(ErrorKind::input, "rtsl_loss: empty batch");
  const double v_ref = mutual_distance(nle_vectors).value;
  const LossValue v_student = mutual_distance(student_posteriors);
  LossValue out;
  out.value = smoothed_l1(v_ref, v_student.value);
  out.gradients["student"] = smoothed_l1_grad_y(v_ref, v_student.value) * v_student.grad("distributions");
  out.components["v_reference"] = v_ref;
  out.components["v_student"] = v_student.value;
  return out;
}

LossValue nle_rtsl_loss(const Matrix& nle_targets, const Matrix& student_posteriors, double lambda,
                        const Matrix* rtsl_reference) {
  if (!(lambda >= 0.0)) fail(ErrorKind::input, "nle_rtsl_loss: lambda must be >= 0");
  const LossValue nle = nle_adaptation_loss(nle_targets, student_posteriors);
  const Matrix& ref = rtsl_reference ? *rtsl_reference : nle_targets;
  if (!rtsl_reference && nle_targets.rows() != student_posteriors.rows())
    fail(ErrorKind::input, "nle_rtsl_loss: batch length mismatch");
  const LossValue rtsl = rtsl_loss(ref, student_posteriors);
  LossValue out;
  out.value = nle.value + lambda * rtsl.value;
  out.gradients["student"] = nle.grad("student") + lambda * rtsl.grad("student");
  out.components["nle"] = nle.value;
  out.components["rtsl"] = rtsl.value;
  return out;
}

Matrix softmax_rows(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0)) fail(ErrorKind::input, "softmax: temperature must be > 0");
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = ((logits.row(i).array() - m) / temperature).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Matrix softmax_backward(const Matrix& posteriors, const Matrix& grad_posteriors, double temperature) {
  check_same_shape(posteriors, grad_posteriors, "softmax_backward");
  Matrix dz(posteriors.rows(), posteriors.cols());
  for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
    const double dot = grad_posteriors.row(i).dot(posteriors.row(i));
    dz.row(i) = (posteriors.row(i).array() * (grad_posteriors.row(i).array() - dot) / temperature).matrix();
  }
  return dz;
}

}  // namespace nlekit::divloss
