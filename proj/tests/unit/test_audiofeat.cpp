#include <filesystem>
#include <numbers>

#include "../oracle/dsp_oracle.hpp"
#include "doctest.h"
#include "nlekit/audiofeat/audiofeat.hpp"
#include "nlekit/binio.hpp"
#include "nlekit/io_audit.hpp"
#include "nlekit/rng.hpp"

using namespace nlekit;
using namespace nlekit::audiofeat;
namespace fs = std::filesystem;

namespace {

WaveBuffer noise(std::size_t n, std::uint64_t seed, int rate = 44100) {
  Rng rng(seed);
  WaveBuffer w{std::vector<double>(n), rate};
  for (auto& s : w.samples) s = 0.1 * rng.normal();
  return w;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nlekit_audiofeat_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("frame counts follow floor((L - win) / hop) + 1") {
  const Matrix silent = stft_power({std::vector<double>(44100, 0.0), 44100});
  CHECK(silent.rows() == 98);
  CHECK(silent.cols() == 1025);
  CHECK(silent.cwiseAbs().maxCoeff() == 0.0);
  CHECK(seconds_to_samples(0.025, 44100) == 1102);
  CHECK(seconds_to_samples(0.010, 44100) == 441);
  CHECK(stft_power({std::vector<double>(441000, 0.0), 44100}).rows() == 998);

  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    const std::size_t len = 1102 + rng.below(20000);
    CHECK(static_cast<std::size_t>(stft_power({std::vector<double>(len, 0.0), 44100}).rows()) ==
          (len - 1102) / 441 + 1);
  }
  CHECK_THROWS_AS(stft_power({std::vector<double>(1101, 0.0), 44100}), Error);
}

TEST_CASE("a sine on bin k peaks at bin k in every frame") {
  for (std::size_t k : {5u, 100u, 733u}) {
    WaveBuffer w{std::vector<double>(44100), 44100};
    for (std::size_t n = 0; n < w.samples.size(); ++n)
      w.samples[n] = std::sin(2 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(n) / 2048.0);
    const Matrix p = stft_power(w);
    for (Eigen::Index f = 0; f < p.rows(); ++f) {
      Eigen::Index arg;
      p.row(f).maxCoeff(&arg);
      CHECK(arg == static_cast<Eigen::Index>(k));
    }
  }
}

TEST_CASE("power spectrum agrees with a direct DFT") {
  const WaveBuffer w = noise(700, 9, 8000);  // win 200, hop 80, nfft 256
  const Matrix p = stft_power(w, 0.025, 0.010, 256);
  REQUIRE(p.rows() == (700 - 200) / 80 + 1);
  const auto win = oracle::hann(200);
  for (Eigen::Index f = 0; f < p.rows(); ++f) {
    std::vector<oracle::Real> x(200);
    for (std::size_t n = 0; n < 200; ++n) x[n] = w.samples[static_cast<std::size_t>(f) * 80 + n] * win[n];
    const auto ref = oracle::dft_power(x, 256);
    for (std::size_t b = 0; b < ref.size(); ++b)
      CHECK(std::abs(p(f, static_cast<Eigen::Index>(b)) - static_cast<double>(ref[b])) <=
            1e-9 * std::max<double>(1.0, static_cast<double>(ref[b])));
  }
}

TEST_CASE("mel filterbank shape") {
  const Matrix fb = mel_filterbank(2048, 44100);
  REQUIRE(fb.rows() == 128);
  REQUIRE(fb.cols() == 1025);
  const auto centers = mel_centers(44100, 128, 0.0, 22050.0);
  for (Eigen::Index m = 0; m < fb.rows(); ++m) {
    CAPTURE(m);
    CHECK(fb.row(m).minCoeff() >= 0.0);
    CHECK(fb.row(m).maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
    // Unimodal: non-decreasing up to the peak, non-increasing after.
    Eigen::Index peak;
    fb.row(m).maxCoeff(&peak);
    for (Eigen::Index b = 1; b <= peak; ++b) CHECK(fb(m, b) >= fb(m, b - 1));
    for (Eigen::Index b = peak + 1; b < fb.cols(); ++b) CHECK(fb(m, b) <= fb(m, b - 1));
  }
  const Eigen::VectorXd total = fb.colwise().sum();
  for (Eigen::Index b = 0; b < fb.cols(); ++b) {
    const double f = static_cast<double>(b) * 44100.0 / 2048.0;
    if (f > centers.front() && f < centers.back()) CHECK(total(b) > 0.0);
  }
}

TEST_CASE("mel centers match the mel-scale arithmetic") {
  const auto c = mel_centers(16000, 2, 0.0, 8000.0);
  const oracle::Real top = oracle::mel(8000);
  REQUIRE(c.size() == 2);
  CHECK(std::abs(c[0] - static_cast<double>(oracle::mel_inv(top / 3))) < 1e-9);
  CHECK(std::abs(c[1] - static_cast<double>(oracle::mel_inv(2 * top / 3))) < 1e-9);
  CHECK(hz_to_mel(mel_to_hz(1234.5)) == doctest::Approx(1234.5).epsilon(1e-12));
  CHECK_THROWS_AS(mel_filterbank(2048, 16000, 128, 0.0, 9000.0), Error);
  CHECK_THROWS_AS(mel_filterbank(2048, 16000, 1), Error);
  CHECK_THROWS_AS(mel_filterbank(2048, 16000, 8, 5000.0, 4000.0), Error);
}

TEST_CASE("log-mel compression") {
  const Matrix fb = mel_filterbank(2048, 44100);
  const LmfbFrames zero = log_mel(Matrix::Zero(3, 1025), fb);
  CHECK((zero.frames.array() == std::log(1e-10)).all());

  Rng rng(13);
  Matrix power(4, 1025);
  for (Eigen::Index i = 0; i < power.size(); ++i) power.data()[i] = rng.uniform() * rng.uniform();
  const LmfbFrames a = log_mel(power, fb), b = log_mel(2.0 * power, fb);
  for (Eigen::Index i = 0; i < a.frames.size(); ++i)
    if (a.frames.data()[i] > std::log(1e-10)) CHECK(b.frames.data()[i] - a.frames.data()[i] == doctest::Approx(std::log(2.0)));

  std::vector<std::vector<oracle::Real>> fb_ref(128, std::vector<oracle::Real>(1025));
  for (Eigen::Index m = 0; m < 128; ++m)
    for (Eigen::Index k = 0; k < 1025; ++k) fb_ref[m][k] = fb(m, k);
  for (Eigen::Index f = 0; f < power.rows(); ++f) {
    std::vector<oracle::Real> row(power.row(f).data(), power.row(f).data() + 1025);
    const auto ref = oracle::log_mel_frame(fb_ref, row, 1e-10L);
    for (Eigen::Index m = 0; m < 128; ++m) CHECK(std::abs(a.frames(f, m) - static_cast<double>(ref[m])) <= 1e-6);
  }
  CHECK_THROWS_AS(log_mel(Matrix::Zero(2, 10), fb), Error);
}

TEST_CASE("segmentation drops the remainder") {
  auto frames = [](Eigen::Index n) {
    LmfbFrames f;
    f.frames = Matrix::NullaryExpr(n, 128, [](Eigen::Index i, Eigen::Index j) { return double(i * 1000 + j); });
    return f;
  };
  const auto s = segment_frames(frames(998), 20, "rec");
  CHECK(s.size() == 49);
  CHECK(s[3].data.rows() == 128);
  CHECK(s[3].data.cols() == 20);
  CHECK(s[3].data(7, 2) == 62 * 1000 + 7);
  CHECK(s[3].index == 3);
  CHECK(s[3].recording == "rec");
  CHECK(segment_frames(frames(40)).size() == 2);
  CHECK_THROWS_AS(segment_frames(frames(19)), Error);
}

TEST_CASE("feature extraction is deterministic and monotone in gain") {
  FeatureConfig cfg;
  const WaveBuffer w = noise(44100, 21);
  const LmfbFrames a = extract(w, cfg), b = extract(w, cfg);
  CHECK(a.frames.rows() == 98);
  CHECK(std::memcmp(a.frames.data(), b.frames.data(), sizeof(double) * a.frames.size()) == 0);
  for (double c : {1.5, 4.0}) {
    WaveBuffer loud = w;
    for (auto& x : loud.samples) x *= c;
    CHECK(((extract(loud, cfg).frames - a.frames).array() >= 0.0).all());
  }
  cfg.sample_rate = 16000;
  CHECK_THROWS_AS(extract(w, cfg), Error);
}

TEST_CASE("mean-variance normalization") {
  FeatureConfig cfg;
  cfg.normalize = true;
  const LmfbFrames f = extract(noise(44100, 3), cfg);
  CHECK(f.frames.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::RowVectorXd var = f.frames.array().square().colwise().mean();
  CHECK((var.array() - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("wav round trips") {
  WaveBuffer w = noise(1000, 4, 22050);
  w.samples[0] = 0.999;
  w.samples[1] = -1.0;
  const auto p16 = scratch("a16.wav").string(), p32 = scratch("a32.wav").string();
  write_wav(p16, w, WavFormat::pcm16);
  write_wav(p32, w, WavFormat::float32);
  const WaveBuffer r16 = read_wav(p16), r32 = read_wav(p32);
  CHECK(r16.sample_rate == 22050);
  REQUIRE(r16.samples.size() == w.samples.size());
  REQUIRE(r32.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    CHECK(std::abs(r16.samples[i] - w.samples[i]) <= 0.5 / 32768.0 + 1e-12);
    CHECK(r32.samples[i] == static_cast<double>(static_cast<float>(w.samples[i])));
  }

  binio::Bytes stereo = binio::read_file(p16);
  stereo[22] = 2;  // channel count
  binio::write_file(scratch("stereo.wav").string(), stereo);
  CHECK_THROWS_AS(read_wav(scratch("stereo.wav").string()), Error);
  CHECK_THROWS_AS(read_wav(scratch("missing.wav").string()), Error);
}

TEST_CASE("LMFB round trip, header checks and audit") {
  const LmfbFrames f = extract(noise(44100, 8), FeatureConfig{});
  const std::string path = scratch("f.lmfb").string();
  write_lmfb(path, f);
  CHECK(fs::file_size(path) == 14 + 98 * 128 * 4);
  io_audit::reset();
  const LmfbFrames g = read_lmfb(path);
  CHECK(io_audit::opened() == std::vector<std::string>{path});
  REQUIRE(g.frames.rows() == 98);
  REQUIRE(g.frames.cols() == 128);
  CHECK((g.frames.array() == f.frames.cast<float>().cast<double>().array()).all());

  binio::Bytes bytes = binio::read_file(path);
  bytes[4] = 9;
  binio::write_file(scratch("v9.lmfb").string(), bytes);
  CHECK_THROWS_AS(read_lmfb(scratch("v9.lmfb").string()), Error);
  bytes = binio::read_file(path);
  bytes[0] = 'X';
  binio::write_file(scratch("magic.lmfb").string(), bytes);
  CHECK_THROWS_AS(read_lmfb(scratch("magic.lmfb").string()), Error);
  bytes = binio::read_file(path);
  bytes.resize(bytes.size() - 3);
  binio::write_file(scratch("short.lmfb").string(), bytes);
  CHECK_THROWS_AS(read_lmfb(scratch("short.lmfb").string()), Error);
}
