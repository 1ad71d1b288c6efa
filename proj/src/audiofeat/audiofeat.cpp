#include "nlekit/audiofeat/audiofeat.hpp"

#include <cmath>
#include <numbers>

#include "../common/fft.hpp"
#include "nlekit/binio.hpp"
#include "nlekit/io_audit.hpp"

namespace nlekit::audiofeat {

std::size_t seconds_to_samples(double seconds, int sample_rate) {
  return static_cast<std::size_t>(std::floor(seconds * sample_rate + 1e-6));
}

Matrix stft_power(const WaveBuffer& wave, double win_len_s, double hop_s, std::size_t nfft) {
  require(wave.sample_rate > 0, ErrorKind::input, "stft: sample rate must be positive");
  require(nfft >= 2 && nfft % 2 == 0, ErrorKind::config, "stft: nfft must be even and >= 2");
  const std::size_t win = seconds_to_samples(win_len_s, wave.sample_rate);
  const std::size_t hop = seconds_to_samples(hop_s, wave.sample_rate);
  require(win >= 1 && hop >= 1, ErrorKind::config, "stft: window and hop must span at least one sample");
  require(win <= nfft, ErrorKind::config,
          "stft: window of " + std::to_string(win) + " samples exceeds nfft " + std::to_string(nfft));
  const std::size_t len = wave.samples.size();
  if (len < win)
    fail(ErrorKind::input, "stft: wave of " + std::to_string(len) + " samples is shorter than one window (" +
                               std::to_string(win) + ")");
  for (double s : wave.samples) require(std::isfinite(s), ErrorKind::input, "stft: non-finite sample");

  const std::size_t frames = (len - win) / hop + 1, bins = nfft / 2 + 1;
  std::vector<double> window(win);
  for (std::size_t n = 0; n < win; ++n)
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(win));

  const fftw_plan plan = fft::r2c(nfft);
  fft::RealBuf in = fft::real_buffer(nfft);
  fft::ComplexBuf out = fft::complex_buffer(bins);
  Matrix power(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  for (std::size_t f = 0; f < frames; ++f) {
    const double* x = wave.samples.data() + f * hop;
    for (std::size_t n = 0; n < win; ++n) in.get()[n] = x[n] * window[n];
    std::fill(in.get() + win, in.get() + nfft, 0.0);
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    for (std::size_t b = 0; b < bins; ++b) {
      const double re = out.get()[b][0], im = out.get()[b][1];
      power(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(b)) = re * re + im * im;
    }
  }
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

void check_band(int sample_rate, std::size_t n_mels, double f_min, double& f_max) {
  require(sample_rate > 0, ErrorKind::config, "mel_filterbank: sample rate must be positive");
  require(n_mels >= 2, ErrorKind::config, "mel_filterbank: n_mels must be >= 2");
  const double nyquist = sample_rate / 2.0;
  if (f_max == 0.0) f_max = nyquist;
  if (f_max > nyquist)
    fail(ErrorKind::config, "mel_filterbank: f_max " + std::to_string(f_max) + " Hz exceeds Nyquist " +
                                std::to_string(nyquist) + " Hz");
  require(f_min >= 0.0 && f_min < f_max, ErrorKind::config, "mel_filterbank: need 0 <= f_min < f_max");
}

std::vector<double> mel_points_hz(std::size_t n_mels, double f_min, double f_max) {
  const double lo = hz_to_mel(f_min), hi = hz_to_mel(f_max);
  std::vector<double> pts(n_mels + 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    pts[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  return pts;
}

}  // namespace

std::vector<double> mel_centers(int sample_rate, std::size_t n_mels, double f_min, double f_max) {
  check_band(sample_rate, n_mels, f_min, f_max);
  const auto pts = mel_points_hz(n_mels, f_min, f_max);
  return {pts.begin() + 1, pts.end() - 1};
}

Matrix mel_filterbank(std::size_t nfft, int sample_rate, std::size_t n_mels, double f_min, double f_max) {
  check_band(sample_rate, n_mels, f_min, f_max);
  require(nfft >= 2 && nfft % 2 == 0, ErrorKind::config, "mel_filterbank: nfft must be even and >= 2");
  const std::size_t bins = nfft / 2 + 1;
  const auto pts = mel_points_hz(n_mels, f_min, f_max);
  Matrix fb = Matrix::Zero(static_cast<Eigen::Index>(n_mels), static_cast<Eigen::Index>(bins));
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = pts[m], center = pts[m + 1], right = pts[m + 2];
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / static_cast<double>(nfft);
      double w = 0.0;
      if (f > left && f <= center) w = (f - left) / (center - left);
      else if (f > center && f < right) w = (right - f) / (right - center);
      fb(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(b)) = w;
    }
    // Narrow low-frequency triangles rarely land a bin on their apex.
    const double peak = fb.row(static_cast<Eigen::Index>(m)).maxCoeff();
    if (peak <= 0.0)
      fail(ErrorKind::config, "mel_filterbank: filter " + std::to_string(m) + " covers no FFT bin; raise nfft or lower n_mels");
    fb.row(static_cast<Eigen::Index>(m)) /= peak;
  }
  return fb;
}

LmfbFrames log_mel(const Matrix& power, const Matrix& filterbank, double floor, double frame_shift) {
  if (power.cols() != filterbank.cols())
    fail(ErrorKind::input, "log_mel: power has " + std::to_string(power.cols()) + " bins, filterbank expects " +
                               std::to_string(filterbank.cols()));
  require(floor > 0.0, ErrorKind::config, "log_mel: floor must be positive");
  LmfbFrames out;
  out.frame_shift = frame_shift;
  out.frames = (power * filterbank.transpose()).array().max(floor).log().matrix();
  return out;
}

void normalize_mean_variance(LmfbFrames& frames) {
  Matrix& x = frames.frames;
  if (x.rows() == 0) return;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::RowVectorXd sd = (x.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt();
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (sd(j) > 0.0) x.col(j) /= sd(j);
}

std::vector<Segment> segment_frames(const LmfbFrames& frames, std::size_t seg_len, const std::string& recording) {
  require(seg_len >= 1, ErrorKind::config, "segment_frames: seg_len must be >= 1");
  const auto n = static_cast<std::size_t>(frames.frames.rows());
  if (n < seg_len)
    fail(ErrorKind::input, "segment_frames: " + std::to_string(n) + " frames is fewer than one segment of " +
                               std::to_string(seg_len));
  std::vector<Segment> out;
  out.reserve(n / seg_len);
  const auto len = static_cast<Eigen::Index>(seg_len);
  for (std::size_t s = 0; s < n / seg_len; ++s)
    out.push_back({frames.frames.middleRows(static_cast<Eigen::Index>(s * seg_len), len).transpose(), recording, s});
  return out;
}

LmfbFrames extract(const WaveBuffer& wave, const FeatureConfig& cfg) {
  require(cfg.sample_rate == wave.sample_rate, ErrorKind::config,
          "wave sample rate " + std::to_string(wave.sample_rate) + " Hz does not match configured " +
              std::to_string(cfg.sample_rate) + " Hz (resampling is not supported)");
  const Matrix fb = mel_filterbank(cfg.nfft, cfg.sample_rate, cfg.n_mels, cfg.f_min, cfg.f_max);
  LmfbFrames f = log_mel(stft_power(wave, cfg.win_len_s, cfg.hop_s, cfg.nfft), fb, cfg.floor, cfg.hop_s);
  if (cfg.normalize) normalize_mean_variance(f);
  return f;
}

// ------------------------------------------------------------------ WAV

WaveBuffer read_wav(const std::string& path) {
  const binio::Bytes bytes = binio::read_file(path);
  binio::Reader r(bytes.data(), bytes.size(), "wav '" + path + "'");
  auto bad = [&](const std::string& why) { fail(ErrorKind::input, "wav '" + path + "': " + why); };
  if (bytes.size() < 12 || r.str(4) != "RIFF") bad("not a RIFF file");
  r.uint<std::uint32_t>();
  if (r.str(4) != "WAVE") bad("not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const std::string id = r.str(4);
    const std::uint32_t size = r.uint<std::uint32_t>();
    if (id == "fmt ") {
      if (size < 16) bad("short fmt chunk");
      binio::Reader f(r.take(size), size, "wav '" + path + "' fmt");
      format = f.uint<std::uint16_t>();
      channels = f.uint<std::uint16_t>();
      rate = f.uint<std::uint32_t>();
      f.uint<std::uint32_t>();
      f.uint<std::uint16_t>();
      bits = f.uint<std::uint16_t>();
      if (format == 0xFFFE && size >= 40) {  // WAVE_FORMAT_EXTENSIBLE: sub-format GUID leads with the tag
        f.take(8);
        format = f.uint<std::uint16_t>();
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) bad("data chunk before fmt chunk");
      if (channels != 1) bad(std::to_string(channels) + " channels; only mono is supported");
      const std::size_t n = std::min<std::size_t>(size, r.remaining());
      const std::uint8_t* p = r.take(n);
      WaveBuffer w;
      w.sample_rate = static_cast<int>(rate);
      if (format == 1 && bits == 16) {
        binio::Reader d(p, n, path);
        w.samples.resize(n / 2);
        for (auto& s : w.samples) s = static_cast<std::int16_t>(d.uint<std::uint16_t>()) / 32768.0;
      } else if (format == 3 && bits == 32) {
        binio::Reader d(p, n, path);
        w.samples.resize(n / 4);
        for (auto& s : w.samples) s = d.f32();
      } else {
        bad("unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
            " bits); expected 16-bit PCM or 32-bit float");
      }
      if (w.sample_rate <= 0) bad("sample rate must be positive");
      return w;
    } else {
      r.take(std::min<std::size_t>(size + (size & 1u), r.remaining()));
    }
  }
  fail(ErrorKind::input, "wav '" + path + "': no data chunk");
}

void write_wav(const std::string& path, const WaveBuffer& wave, WavFormat format) {
  require(wave.sample_rate > 0, ErrorKind::input, "write_wav: sample rate must be positive");
  const bool pcm = format == WavFormat::pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * (bits / 8));
  binio::Bytes b;
  binio::put_bytes(b, "RIFF");
  binio::put_uint<std::uint32_t>(b, 36 + data_bytes);
  binio::put_bytes(b, "WAVEfmt ");
  binio::put_uint<std::uint32_t>(b, 16);
  binio::put_uint<std::uint16_t>(b, pcm ? 1 : 3);
  binio::put_uint<std::uint16_t>(b, 1);
  binio::put_uint<std::uint32_t>(b, static_cast<std::uint32_t>(wave.sample_rate));
  binio::put_uint<std::uint32_t>(b, static_cast<std::uint32_t>(wave.sample_rate) * (bits / 8));
  binio::put_uint<std::uint16_t>(b, bits / 8);
  binio::put_uint<std::uint16_t>(b, bits);
  binio::put_bytes(b, "data");
  binio::put_uint<std::uint32_t>(b, data_bytes);
  for (double s : wave.samples) {
    require(std::isfinite(s), ErrorKind::input, "write_wav: non-finite sample");
    if (pcm) {
      const long q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
      binio::put_uint<std::uint16_t>(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      binio::put_f32(b, static_cast<float>(s));
    }
  }
  binio::write_file(path, b);
}

// ----------------------------------------------------------------- LMFB

void write_lmfb(const std::string& path, const LmfbFrames& frames) {
  const Matrix& x = frames.frames;
  binio::Bytes b;
  b.reserve(14 + static_cast<std::size_t>(x.size()) * 4);
  binio::put_bytes(b, "LMFB");
  binio::put_uint<std::uint16_t>(b, kLmfbVersion);
  binio::put_uint<std::uint32_t>(b, static_cast<std::uint32_t>(x.rows()));
  binio::put_uint<std::uint32_t>(b, static_cast<std::uint32_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) binio::put_f32(b, static_cast<float>(x(i, j)));
  binio::write_file(path, b);
}

LmfbFrames read_lmfb(const std::string& path) {
  io_audit::record_open(path);
  const binio::Bytes bytes = binio::read_file(path);
  binio::Reader r(bytes.data(), bytes.size(), "features '" + path + "'");
  if (r.str(4) != "LMFB") fail(ErrorKind::data, "features '" + path + "': bad magic (expected LMFB)");
  const auto version = r.uint<std::uint16_t>();
  if (version != kLmfbVersion)
    fail(ErrorKind::data, "features '" + path + "': unsupported LMFB version " + std::to_string(version));
  const auto rows = r.uint<std::uint32_t>(), cols = r.uint<std::uint32_t>();
  if (r.remaining() != static_cast<std::size_t>(rows) * cols * 4)
    fail(ErrorKind::data, "features '" + path + "': payload size does not match header");
  LmfbFrames out;
  out.frames.resize(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) out.frames(i, j) = r.f32();
  return out;
}

}  // namespace nlekit::audiofeat
