#include "nlekit/nlelearn/nlelearn.hpp"

#include <cmath>
#include <sstream>

#include "nlekit/checkpoint.hpp"
#include "nlekit/diffcore/optim.hpp"
#include "nlekit/rng.hpp"

namespace nlekit::nlelearn {

namespace {

Vector softmax_col(const Matrix& logits, Eigen::Index c) {
  Vector z = logits.col(c);
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  return z / z.sum();
}

Matrix rows_of(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace

Matrix NleMatrix::columns() const {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) out.col(c) = softmax_col(logits, c);
  return out;
}

Vector NleMatrix::column(std::size_t c) const {
  if (c >= num_classes()) fail(ErrorKind::input, "NLE column " + std::to_string(c) + " out of range");
  return softmax_col(logits, static_cast<Eigen::Index>(c));
}

Matrix NleMatrix::targets(std::span<const std::size_t> labels) const {
  const Matrix cols = columns();
  Matrix out(static_cast<Eigen::Index>(labels.size()), cols.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes()) fail(ErrorKind::input, "label " + std::to_string(labels[i]) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = cols.col(static_cast<Eigen::Index>(labels[i])).transpose();
  }
  return out;
}

void NleMatrix::check(std::size_t expected, const std::string& what) const {
  if (logits.rows() != logits.cols() || logits.rows() < 2)
    fail(ErrorKind::config, what + ": NLE matrix must be square with K >= 2");
  if (!logits.allFinite()) fail(ErrorKind::numeric, what + ": NLE matrix holds non-finite logits");
  if (num_classes() != expected)
    fail(ErrorKind::config, what + ": NLE matrix has K=" + std::to_string(num_classes()) + " but the model has " +
                                std::to_string(expected) + " classes");
}

NleMatrix init_from_posteriors(const Matrix& posteriors, std::span<const std::size_t> labels, std::size_t k) {
  require(static_cast<std::size_t>(posteriors.rows()) == labels.size() && static_cast<std::size_t>(posteriors.cols()) == k,
          ErrorKind::input, "init_from_posteriors: posteriors must be [N x K] with one label per row");
  Matrix sum = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) fail(ErrorKind::input, "label " + std::to_string(labels[i]) + " out of range");
    sum.col(static_cast<Eigen::Index>(labels[i])) += posteriors.row(static_cast<Eigen::Index>(i)).transpose();
    ++count[labels[i]];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (count[c] == 0) fail(ErrorKind::data, "no source samples of class " + std::to_string(c) + " to build its NLE");
  NleMatrix nle{Matrix(sum.rows(), sum.cols())};
  for (std::size_t c = 0; c < k; ++c) {
    const auto cc = static_cast<Eigen::Index>(c);
    nle.logits.col(cc) = (sum.col(cc) / static_cast<double>(count[c])).array().max(divloss::kProbFloor).log();
  }
  return nle;
}

NleMatrix init_from_centroids(asnet::Model& teacher, const scenegen::SegmentSet& source, double temperature,
                              unsigned workers) {
  const Matrix post = asnet::infer_posteriors(teacher, source.inputs, temperature, 256, workers);
  return init_from_posteriors(post, source.labels, teacher.config.num_classes);
}

double full_loss(const NleMatrix& nle, const Matrix& posteriors, std::span<const std::size_t> labels) {
  const std::size_t k = nle.num_classes();
  return divloss::nle_learning_loss(posteriors, divloss::one_hot(labels, k), nle.logits).value;
}

NleResult train_nle(const NleMatrix& init, const Matrix& posteriors, std::span<const std::size_t> labels,
                    const NleOptions& opts) {
  require(opts.lr > 0.0, ErrorKind::config, "nle.lr must be > 0");
  require(opts.batch > 0, ErrorKind::config, "nle.batch must be > 0");
  require(opts.eval_every > 0, ErrorKind::config, "nle.eval_every must be > 0");
  require(!labels.empty(), ErrorKind::config, "NLE training needs at least one sample");
  const std::size_t k = init.num_classes(), n = labels.size();
  init.check(k, "train_nle");
  // NaN posteriors would be silently floored by the clamp.
  if (!posteriors.allFinite()) fail(ErrorKind::numeric, "NLE training: teacher posteriors are not finite");

  NleResult res;
  res.nle = init;
  res.initial_loss = full_loss(init, posteriors, labels);
  double best = res.initial_loss;
  res.history.push_back({0, opts.lr, best});
  NleMatrix cur = init;
  Matrix velocity = Matrix::Zero(cur.logits.rows(), cur.logits.cols());
  const Matrix y_all = divloss::one_hot(labels, k);

  std::vector<std::size_t> order(n);
  std::size_t pos = n;  // forces a reshuffle on the first step
  std::uint64_t epoch = 0;
  std::vector<std::size_t> idx;
  for (std::uint64_t step = 0; step < opts.steps; ++step) {
    if (pos >= n) {
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      Rng(derive_seed(opts.seed, epoch++)).shuffle(order);
      pos = 0;
    }
    const std::size_t len = std::min(opts.batch, n - pos);
    idx.assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
    const auto loss = divloss::nle_learning_loss(rows_of(posteriors, idx), rows_of(y_all, idx), cur.logits);
    if (!std::isfinite(loss.value))
      fail(ErrorKind::numeric, "NLE training: non-finite loss at step " + std::to_string(step));
    const double lr = diffcore::cosine_lr(step, opts.steps, opts.lr);
    velocity = opts.momentum * velocity + loss.grad("nle_logits");
    cur.logits -= lr * velocity;

    const std::uint64_t done = step + 1;
    if (done % opts.eval_every == 0 || done == opts.steps) {
      const double l = full_loss(cur, posteriors, labels);
      if (!std::isfinite(l)) fail(ErrorKind::numeric, "NLE training: non-finite loss at step " + std::to_string(done));
      res.history.push_back({done, diffcore::cosine_lr(done, opts.steps, opts.lr), l});
      if (l <= best) {
        best = l;
        res.nle = cur;
      }
    }
  }
  res.final_loss = best;
  return res;
}

NleResult train_nle(asnet::Model& teacher, const scenegen::SegmentSet& source, const NleOptions& opts,
                    unsigned workers) {
  require(source.size() > 0, ErrorKind::config, "NLE training: empty source selection");
  const Matrix post = asnet::infer_posteriors(teacher, source.inputs, opts.temperature, 256, workers);
  const NleMatrix init = init_from_posteriors(post, source.labels, teacher.config.num_classes);
  return train_nle(init, post, source.labels, opts);
}

Vector nle_lookup(const NleMatrix& nle, std::span<const double> label) {
  if (label.size() != nle.num_classes())
    fail(ErrorKind::input, "one-hot label of length " + std::to_string(label.size()) + " for K=" +
                               std::to_string(nle.num_classes()));
  std::size_t hot = label.size(), ones = 0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] == 1.0) {
      hot = i;
      ++ones;
    } else if (label[i] != 0.0) {
      ones = 2;
    }
  }
  if (ones != 1) fail(ErrorKind::input, "label is not one-hot");
  return nle.column(hot);
}

namespace {

checkpoint::Container to_container(const NleMatrix& nle, const nlohmann::json& meta) {
  checkpoint::Container c;
  c.config = {{"kind", "nle_matrix"}, {"num_classes", nle.num_classes()}, {"meta", meta.is_null() ? nlohmann::json::object() : meta}};
  checkpoint::Record r;
  r.name = "logits";
  r.f64 = true;
  r.dims = {static_cast<std::uint32_t>(nle.logits.rows()), static_cast<std::uint32_t>(nle.logits.cols())};
  r.f64_data.assign(nle.logits.data(), nle.logits.data() + nle.logits.size());
  c.records.push_back(std::move(r));
  return c;
}

}  // namespace

std::string save_nle(const NleMatrix& nle, const std::string& path, const nlohmann::json& meta) {
  return checkpoint::save(to_container(nle, meta), path);
}

NleMatrix load_nle(const std::string& path) {
  const auto c = checkpoint::load(path);
  const std::string what = "NLE file '" + path + "'";
  if (c.config.value("kind", "") != "nle_matrix") fail(ErrorKind::persistence, what + ": not an NLE matrix");
  const auto& r = c.find("logits");
  const std::size_t k = c.config.value("num_classes", std::size_t{0});
  if (!r.f64 || r.dims.size() != 2 || r.dims[0] != k || r.dims[1] != k)
    fail(ErrorKind::persistence, what + ": logits record is not K x K float64");
  NleMatrix nle{Matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))};
  std::copy(r.f64_data.begin(), r.f64_data.end(), nle.logits.data());
  return nle;
}

std::string nle_digest(const NleMatrix& nle, const nlohmann::json& meta) {
  return checkpoint::digest(to_container(nle, meta));
}

void export_text(const NleMatrix& nle, const std::string& path, const std::vector<std::string>& names) {
  const Matrix cols = nle.columns();
  std::ostringstream os;
  os.precision(17);
  os << "class";
  for (std::size_t j = 0; j < nle.num_classes(); ++j) os << "\tp" << j;
  os << "\n";
  for (std::size_t c = 0; c < nle.num_classes(); ++c) {
    os << (c < names.size() ? names[c] : std::to_string(c));
    for (std::size_t j = 0; j < nle.num_classes(); ++j) os << "\t" << cols(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
    os << "\n";
  }
  const std::string s = os.str();
  binio::write_file(path, binio::Bytes(s.begin(), s.end()));
}

}  // namespace nlekit::nlelearn
