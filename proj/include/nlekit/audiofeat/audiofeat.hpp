#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "nlekit/error.hpp"

/// Log-mel filter-bank front end: framed power spectra, mel projection, log
/// compression and fixed-length segmentation, plus WAV and LMFB file I/O.
namespace nlekit::audiofeat {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct WaveBuffer {
  std::vector<double> samples;
  int sample_rate = 44100;
};

struct LmfbFrames {
  Matrix frames;  // [num_frames x n_mels]
  double frame_shift = 0.010;
};

struct Segment {
  Matrix data;  // [n_mels x seg_len]
  std::string recording;
  std::size_t index = 0;
};

struct FeatureConfig {
  int sample_rate = 44100;
  double win_len_s = 0.025;
  double hop_s = 0.010;
  std::size_t nfft = 2048;
  std::size_t n_mels = 128;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 means Nyquist
  double floor = 1e-10;
  std::size_t seg_len = 20;
  bool normalize = false;  // per-recording mean/variance normalization
};

/// Seconds to samples, tolerant of decimal representation error
/// (0.025 s at 44.1 kHz is 1102 samples).
std::size_t seconds_to_samples(double seconds, int sample_rate);

/// Power spectrogram [num_frames x nfft/2+1] of Hann-windowed frames, each
/// zero-padded to nfft. num_frames = floor((L - win) / hop) + 1.
Matrix stft_power(const WaveBuffer& wave, double win_len_s = 0.025, double hop_s = 0.010, std::size_t nfft = 2048);

/// Triangular mel filters [n_mels x nfft/2+1]; centers equally spaced on
/// mel = 2595 log10(1 + f/700), each row scaled to peak 1 on the bin grid.
Matrix mel_filterbank(std::size_t nfft, int sample_rate, std::size_t n_mels = 128, double f_min = 0.0,
                      double f_max = 0.0);

/// Filter center frequencies in Hz (the interior mel points).
std::vector<double> mel_centers(int sample_rate, std::size_t n_mels, double f_min, double f_max);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// log(max(filterbank * power^T, floor)), returned as [frames x n_mels].
LmfbFrames log_mel(const Matrix& power, const Matrix& filterbank, double floor = 1e-10, double frame_shift = 0.010);

/// Per-column zero mean, unit variance (columns with zero variance are only
/// centered).
void normalize_mean_variance(LmfbFrames& frames);

/// Non-overlapping seg_len-frame windows, transposed to [n_mels x seg_len];
/// a trailing remainder shorter than seg_len is dropped.
std::vector<Segment> segment_frames(const LmfbFrames& frames, std::size_t seg_len = 20,
                                    const std::string& recording = {});

/// stft_power -> log_mel (-> optional normalization) with one config.
LmfbFrames extract(const WaveBuffer& wave, const FeatureConfig& cfg);

enum class WavFormat { pcm16, float32 };

/// Mono PCM16 or IEEE float32 WAV.
WaveBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const WaveBuffer& wave, WavFormat format = WavFormat::pcm16);

/// "LMFB" | u16 version | u32 frames | u32 dim | f32 LE row-major.
inline constexpr std::uint16_t kLmfbVersion = 1;
void write_lmfb(const std::string& path, const LmfbFrames& frames);
/// Records the path in io_audit.
LmfbFrames read_lmfb(const std::string& path);

}  // namespace nlekit::audiofeat
