#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "nlekit/asnet/asnet.hpp"
#include "nlekit/binio.hpp"
#include "nlekit/digest.hpp"
#include "nlekit/rng.hpp"

using namespace nlekit;
using namespace nlekit::asnet;
using diffcore::Shape;
using diffcore::Tensor;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.conv_channels = {2, 3, 2, 2, 2};
  c.fc_hidden = 8;
  return c;
}

Tensor<float> random_segments(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t({n, 1, 128, 20});
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nlekit_asnet_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("default network shape") {
  const ModelConfig c;
  const auto pools = pool_schedule(c);
  REQUIRE(pools.size() == 5);
  CHECK(pools[4].h == 2);
  CHECK(pools[4].w == 1);
  const auto net = build_network<float>(c, 1);
  const auto chain = net.shape_chain({1, 1, 128, 20});
  CHECK(chain.back() == Shape{1, 10});
  // After the fifth pool the map is [64 x 4 x 1].
  std::size_t dense = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (net.layer_name(i) == "block5.pool") CHECK(chain[i + 1] == Shape{1, 64, 4, 1});
    dense += net.layer(i).kind() == "dense";
  }
  CHECK(dense == 2);
  ModelConfig wide = c;
  wide.fc_hidden = 1024;
  auto w = build_network<float>(wide, 1);
  CHECK(w.parameters()[w.parameters().size() - 3].tensor->shape() == Shape{1024});
}

TEST_CASE("initialization is seed deterministic") {
  auto a = build_model(tiny(), 5), b = build_model(tiny(), 5), c = build_model(tiny(), 6);
  const auto pa = a.net.parameters(), pb = b.net.parameters(), pc = c.net.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(std::equal(pa[i].tensor->data().begin(), pa[i].tensor->data().end(), pb[i].tensor->data().begin()));
    differs |= !std::equal(pa[i].tensor->data().begin(), pa[i].tensor->data().end(), pc[i].tensor->data().begin());
  }
  CHECK(differs);
  CHECK(model_digest(a) == model_digest(b));
  // Kaiming bound for the first conv: sqrt(6 / 16).
  for (float v : pa[0].tensor->data()) CHECK(std::abs(v) <= std::sqrt(6.0 / 16.0));
}

TEST_CASE("infeasible shape chains list every stage") {
  ModelConfig c = tiny();
  c.input_mels = 8;
  try {
    build_model(c, 1);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    const std::string msg = e.what();
    CHECK(msg.find("block1.conv") != std::string::npos);
    CHECK(msg.find("block4.pool") != std::string::npos);
  }
  c = tiny();
  c.conv_channels = {2, 2};
  CHECK_THROWS_AS(build_model(c, 1), Error);
}

TEST_CASE("posteriors") {
  divloss::Matrix z(1, 2);
  z << 2.0, 0.0;
  const auto p = divloss::softmax_rows(z, 2.0);
  CHECK(p(0, 0) == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK(p(0, 1) == doctest::Approx(0.268941).epsilon(1e-6));
  const auto flat = divloss::softmax_rows(z, 1e6);
  CHECK(flat(0, 0) == doctest::Approx(0.5).epsilon(1e-5));

  Model m = build_model(tiny(), 3);
  const auto x = random_segments(7, 4);
  const auto post = infer_posteriors(m, x, 2.0, 3);
  REQUIRE(post.rows() == 7);
  REQUIRE(post.cols() == 10);
  for (Eigen::Index i = 0; i < 7; ++i) {
    CHECK(post.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(post.row(i).minCoeff() >= 0.0);
  }
  // Same segment, different batch company and chunking.
  const auto alone = infer_posteriors(m, x.reshaped({7, 1, 128, 20}), 2.0, 1);
  CHECK((alone - post).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(infer_posteriors(m, x, 2.0, 7) == infer_posteriors(m, x, 2.0, 7));
  CHECK_THROWS_AS(infer_posteriors(m, Tensor<float>({2, 1, 64, 20}), 2.0), Error);
  CHECK_THROWS_AS(infer_posteriors(m, x, 0.0), Error);
}

TEST_CASE("checkpoint round trip and integrity") {
  Model m = build_model(tiny(), 8);
  m.role = "target";
  // Give batchnorm non-trivial running statistics.
  m.net.forward(random_segments(4, 9), diffcore::Mode::train);
  const std::string path = scratch("m.nlek").string();
  const std::string digest = save_checkpoint(m, path);
  CHECK(digest.size() == 64);
  CHECK(digest == model_digest(m));

  Model back = load_checkpoint(path);
  CHECK(back.role == "target");
  CHECK(to_json(back.config) == to_json(m.config));
  auto a = m.net.state(), b = back.net.state();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(std::memcmp(a[i].tensor->raw(), b[i].tensor->raw(), a[i].tensor->size() * sizeof(float)) == 0);
  }
  CHECK(save_checkpoint(back, scratch("m2.nlek").string()) == digest);

  binio::Bytes bytes = binio::read_file(path);
  auto rejected = [&](binio::Bytes mutated, const std::string& needle) {
    binio::write_file(scratch("bad.nlek").string(), mutated);
    try {
      load_checkpoint(scratch("bad.nlek").string());
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::persistence);
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  binio::Bytes flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK(rejected(flipped, "digest mismatch"));
  binio::Bytes newer = bytes;
  newer[4] = 2;
  CHECK(rejected(newer, "newer"));
  CHECK(rejected(binio::Bytes(bytes.begin(), bytes.begin() + 100), "digest mismatch"));
  binio::Bytes magic = bytes;
  magic[0] = 'X';
  CHECK(rejected(magic, "magic"));
}
