#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "../oracle/barycenter_oracle.hpp"
#include "nlekit/binio.hpp"
#include "nlekit/nlelearn/nlelearn.hpp"
#include "nlekit/rng.hpp"

using namespace nlekit;
using namespace nlekit::nlelearn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nlekit_nle_test";
  fs::create_directories(dir);
  return dir / name;
}

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Noisy per-class posteriors around a random mean.
struct Noisy {
  Matrix post;
  std::vector<std::size_t> labels;
};
Noisy noisy_posteriors(std::size_t k, std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  Noisy out{Matrix(static_cast<Eigen::Index>(k * per_class), static_cast<Eigen::Index>(k)), {}};
  for (std::size_t c = 0; c < k; ++c) {
    Vector mean(static_cast<Eigen::Index>(k));
    for (auto& v : mean) v = rng.normal();
    mean(static_cast<Eigen::Index>(c)) += 2.0;
    for (std::size_t s = 0; s < per_class; ++s) {
      Vector z = mean;
      for (auto& v : z) v += 0.7 * rng.normal();
      z = (z.array() - z.maxCoeff()).exp();
      out.post.row(static_cast<Eigen::Index>(out.labels.size())) = (z / z.sum()).transpose();
      out.labels.push_back(c);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("centroid initialization") {
  const std::vector<std::size_t> labels{0, 0, 1};
  const auto nle = init_from_posteriors(rows({{0.6, 0.4}, {0.4, 0.6}, {0.1, 0.9}}), labels, 2);
  CHECK(nle.column(0)(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(nle.column(0)(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(nle.column(1)(1) == doctest::Approx(0.9).epsilon(1e-12));

  // One-hot teacher: columns are the clamped one-hot vectors.
  const auto hot = init_from_posteriors(rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}}), std::vector<std::size_t>{0, 1, 2, 0}, 3);
  const Matrix cols = hot.columns();
  for (Eigen::Index c = 0; c < 3; ++c) {
    CHECK(cols(c, c) == doctest::Approx(1.0 / (1.0 + 2e-8)).epsilon(1e-14));
    CHECK(cols.col(c).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  try {
    init_from_posteriors(rows({{0.5, 0.5, 0.0}}), std::vector<std::size_t>{0}, 3);
    FAIL("expected data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("class 1") != std::string::npos);
  }
}

TEST_CASE("class-constant teacher is recovered") {
  const Matrix per_class = rows({{0.7, 0.2, 0.1}, {0.25, 0.5, 0.25}, {0.05, 0.15, 0.8}});
  Matrix post(30, 3);
  std::vector<std::size_t> labels;
  for (Eigen::Index i = 0; i < 30; ++i) {
    labels.push_back(static_cast<std::size_t>(i % 3));
    post.row(i) = per_class.row(i % 3);
  }
  NleOptions o;
  o.lr = 0.5;
  o.steps = 3000;
  o.batch = 8;
  const auto res = train_nle(NleMatrix{Matrix::Zero(3, 3)}, post, labels, o);
  CHECK(res.final_loss < 1e-9);
  const Matrix cols = res.nle.columns();
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double tv = 0.5 * (cols.col(c) - per_class.row(c).transpose()).cwiseAbs().sum();
    CHECK(tv < 1e-4);
  }
}

TEST_CASE("single-class NLE converges to the SKLD barycenter") {
  Rng rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    Matrix post(2, 3);
    std::vector<oracle::P3> ps;
    for (Eigen::Index i = 0; i < 2; ++i) {
      Vector z(3);
      for (auto& v : z) v = 1.5 * rng.normal();
      z = z.array().exp();
      z /= z.sum();
      post.row(i) = z.transpose();
      ps.push_back({z(0), z(1), z(2)});
    }
    // Classes 1 and 2 get a throwaway sample so the matrix is complete.
    Matrix all(4, 3);
    all << post, 0.2, 0.6, 0.2, 0.2, 0.2, 0.6;
    const std::vector<std::size_t> labels{0, 0, 1, 2};
    NleOptions o;
    o.lr = 1.0;
    o.steps = 6000;
    o.batch = 4;
    const auto res = train_nle(init_from_posteriors(all, labels, 3), all, labels, o);
    const auto want = oracle::skld_barycenter_grid(ps);
    const Vector got = res.nle.column(0);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(got(j) - static_cast<double>(want[static_cast<std::size_t>(j)])) < 1e-3);
    // The arithmetic mean (the initialization) is not the answer in general.
    CHECK(res.final_loss <= res.initial_loss);
  }
}

TEST_CASE("default NLE training descends") {
  const auto d = noisy_posteriors(5, 60, 3);
  const auto res = train_nle(init_from_posteriors(d.post, d.labels, 5), d.post, d.labels, NleOptions{});
  REQUIRE(res.history.size() == 21);
  CHECK(res.history.front().lr == 0.01);
  CHECK(res.history.back().lr == 0.0);
  for (std::size_t i = 1; i < res.history.size(); ++i) CHECK(res.history[i].loss <= res.history[i - 1].loss + 1e-15);
  CHECK(res.final_loss < res.initial_loss);
  const Matrix cols = res.nle.columns();
  for (Eigen::Index c = 0; c < 5; ++c) {
    CHECK(cols.col(c).sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cols.col(c).minCoeff() > 0.0);
  }
  // Same seed, same result.
  const auto again = train_nle(init_from_posteriors(d.post, d.labels, 5), d.post, d.labels, NleOptions{});
  CHECK(again.nle.logits == res.nle.logits);
}

TEST_CASE("non-finite loss aborts with the step") {
  const auto d = noisy_posteriors(3, 5, 1);
  NleMatrix bad = init_from_posteriors(d.post, d.labels, 3);
  Matrix post = d.post;
  post(4, 1) = std::nan("");
  try {
    train_nle(bad, post, d.labels, NleOptions{});
    FAIL("expected numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
}

TEST_CASE("lookup") {
  const auto d = noisy_posteriors(4, 10, 2);
  const auto nle = init_from_posteriors(d.post, d.labels, 4);
  const std::vector<double> y{0, 0, 1, 0};
  const Vector a = nle_lookup(nle, y), b = nle_lookup(nle, y);
  CHECK(a == nle.column(2));
  CHECK(a == b);
  CHECK(a.sum() == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<std::size_t> lab{2, 0};
  CHECK(nle.targets(lab).row(0).transpose() == a);
  CHECK_THROWS_AS(nle_lookup(nle, std::vector<double>{0, 1, 1, 0}), Error);
  CHECK_THROWS_AS(nle_lookup(nle, std::vector<double>{0, 0.5, 0, 0}), Error);
  CHECK_THROWS_AS(nle_lookup(nle, std::vector<double>{0, 0, 1}), Error);
  CHECK_THROWS_AS(nle.check(5, "x"), Error);
}

TEST_CASE("NLE persistence") {
  const auto d = noisy_posteriors(4, 10, 5);
  const auto nle = init_from_posteriors(d.post, d.labels, 4);
  const std::string path = scratch("m.nlek").string();
  const auto digest = save_nle(nle, path, {{"temperature", 2.0}});
  CHECK(digest == nle_digest(nle, {{"temperature", 2.0}}));
  const auto back = load_nle(path);
  CHECK(back.logits == nle.logits);

  binio::Bytes bytes = binio::read_file(path);
  bytes[bytes.size() - 40] ^= 0x10;
  binio::write_file(scratch("bad.nlek").string(), bytes);
  CHECK_THROWS_AS(load_nle(scratch("bad.nlek").string()), Error);

  export_text(nle, scratch("m.tsv").string(), {"a", "b", "c", "d"});
  std::ifstream in(scratch("m.tsv"));
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "class\tp0\tp1\tp2\tp3");
  CHECK(first.rfind("a\t", 0) == 0);
  std::istringstream fields(first.substr(2));
  double sum = 0, v;
  while (fields >> v) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("teacher is not modified by NLE learning") {
  asnet::ModelConfig c;
  c.conv_channels = {2, 2, 2, 2, 2};
  c.fc_hidden = 8;
  c.num_classes = 3;
  auto teacher = asnet::build_model(c, 4);
  scenegen::SegmentSet src;
  src.num_classes = 3;
  src.inputs = diffcore::Tensor<float>({6, 1, 128, 20});
  Rng rng(1);
  for (auto& v : src.inputs.data()) v = static_cast<float>(rng.normal());
  src.labels = {0, 1, 2, 0, 1, 2};
  src.recording = {0, 1, 2, 3, 4, 5};
  const auto before = asnet::model_digest(teacher);
  NleOptions o;
  o.steps = 50;
  const auto res = train_nle(teacher, src, o, 2);
  CHECK(asnet::model_digest(teacher) == before);
  CHECK(res.final_loss <= res.initial_loss);
}
