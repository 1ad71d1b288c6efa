#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nlekit/audiofeat/audiofeat.hpp"
#include "nlekit/diffcore/tensor.hpp"

/// Synthetic device-mismatch corpus. Each scene is a band-energy template
/// with tonal and modulation character; recordings are random instances of a
/// scene passed through a device channel (FIR coloration, gain, noise).
/// Target-device training recordings can be paired with a source-device
/// sibling rendered from the identical scene signal.
namespace nlekit::scenegen {

inline constexpr const char* kGeneratorVersion = "scenegen-1";

enum class SuperCluster { indoor, outdoor, transport };
std::string_view to_string(SuperCluster c);

struct SceneSpec {
  std::size_t id = 0;
  std::string name;
  SuperCluster cluster = SuperCluster::indoor;
  std::vector<double> band_db;     // energy template over mel-spaced bands
  std::vector<double> tone_hz;     // stationary tonal components
  std::vector<double> tone_db;     // their levels relative to the noise bed
  double mod_rate_hz = 0.0;        // amplitude modulation
  double mod_depth = 0.0;
};

struct DeviceChannel {
  std::string id;
  std::vector<double> fir_taps{1.0};
  double gain_db = 0.0;
  /// Additive white noise relative to the signal RMS; -inf disables it.
  double noise_db = -std::numeric_limits<double>::infinity();
};

/// Windowed-sinc (Hamming) designs; `taps` must be odd.
std::vector<double> lowpass_taps(double cutoff_hz, int sample_rate, std::size_t taps);
std::vector<double> highpass_taps(double cutoff_hz, int sample_rate, std::size_t taps);

/// y = 10^(gain/20) (h * x) + noise, causal and length preserving.
audiofeat::WaveBuffer apply_channel(const audiofeat::WaveBuffer& wave, const DeviceChannel& channel,
                                    std::uint64_t seed);

struct DevicePlan {
  DeviceChannel channel;
  std::size_t train = 0;
  std::size_t test = 0;
  /// Fraction of train recordings that get a source-device sibling.
  double pair_fraction = 0.0;
};

struct CorpusConfig {
  std::size_t num_scenes = 10;
  double duration_s = 1.0;
  std::size_t bands = 24;
  /// Seed for the scene definitions themselves; recordings use the corpus seed.
  std::uint64_t profile_seed = 7;
  /// Scene-specific deviation from the cluster template (dB) and per-recording
  /// variability around the scene (dB).
  double scene_spread_db = 6.0;
  double instance_spread_db = 2.0;
  double level_jitter_db = 2.0;
  /// Added to every scene tone level; large negative values mute the tones.
  double tone_offset_db = 0.0;
  /// First device is the source device; pairs reference its train recordings.
  std::vector<DevicePlan> devices;
  std::string source_device = "A";
  bool write_wav = false;
};

/// Scene library for a config; deterministic in profile_seed.
std::vector<SceneSpec> make_scenes(const CorpusConfig& cfg);

/// One instance of a scene before any device channel.
audiofeat::WaveBuffer render_scene(const SceneSpec& scene, const CorpusConfig& cfg, int sample_rate,
                                   std::uint64_t seed);

enum class Split { train, test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct RecordingEntry {
  std::string path;  // relative to the manifest's directory
  std::size_t scene_id = 0;
  std::string device_id;
  std::string pair_id;  // empty when unpaired
  Split split = Split::train;
  double duration_s = 0.0;
};

struct CorpusManifest {
  std::vector<RecordingEntry> entries;
  std::uint64_t seed = 0;
  std::string generator = kGeneratorVersion;
  std::size_t num_classes = 0;
  /// Directory the relative paths resolve against.
  std::string root;

  /// Checks path uniqueness and the pairing invariants; data error otherwise.
  void validate() const;
};

/// Validates the plan (counts, unique device ids, enough source recordings to
/// pair against); configuration error otherwise.
void validate(const CorpusConfig& cfg);

/// Renders every recording, extracts features and writes
/// <out_dir>/features/<device>/<split>/<index>.lmfb plus
/// <out_dir>/manifest.tsv. Work is spread over `workers` threads with
/// per-recording seeds, so output bytes do not depend on the worker count.
CorpusManifest generate_corpus(const CorpusConfig& cfg, const audiofeat::FeatureConfig& features, std::uint64_t seed,
                               const std::string& out_dir, unsigned workers = 1);

/// Tab-separated: path, scene_id, device_id, pair_id, split, duration_s with a
/// header row, preceded by "#key=value" metadata lines.
void write_manifest(const CorpusManifest& m, const std::string& path);
CorpusManifest read_manifest(const std::string& path);

struct Filter {
  std::vector<std::string> devices;  // empty: any
  std::optional<Split> split;
  bool matches(const RecordingEntry& e) const;
};

/// Segments of the selected recordings, in manifest order, ready for a model:
/// inputs [num_segments, 1, n_mels, seg_len].
struct SegmentSet {
  diffcore::Tensor<float> inputs;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> recording;  // index into `entries` per segment
  std::vector<RecordingEntry> entries;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  /// Copies the given segments into a contiguous batch.
  diffcore::Tensor<float> gather(const std::vector<std::size_t>& indices) const;
};

struct LoadOptions {
  std::size_t seg_len = 20;
  unsigned workers = 1;
};

SegmentSet load_split(const CorpusManifest& m, const Filter& filter, const LoadOptions& opts = {});

/// Target segments aligned with the source sibling's segment of the same
/// index, matched on pair_id.
struct PairedSet {
  SegmentSet source;
  SegmentSet target;
};

/// Data error when a selected target entry has no pair or no source sibling.
PairedSet load_paired(const CorpusManifest& m, const Filter& target_filter, const std::string& source_device,
                      const LoadOptions& opts = {});

/// Batch index lists covering [0, n) in an order fixed by `seed`.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch, std::uint64_t seed);

/// Cosine similarity of linear band energies.
double template_similarity(const SceneSpec& a, const SceneSpec& b);

}  // namespace nlekit::scenegen
