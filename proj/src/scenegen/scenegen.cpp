#include "nlekit/scenegen/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "../common/fft.hpp"
#include "nlekit/binio.hpp"
#include "nlekit/parallel.hpp"
#include "nlekit/rng.hpp"

namespace nlekit::scenegen {

namespace fs = std::filesystem;
using audiofeat::WaveBuffer;

std::string_view to_string(SuperCluster c) {
  switch (c) {
    case SuperCluster::indoor: return "indoor";
    case SuperCluster::outdoor: return "outdoor";
    case SuperCluster::transport: return "transport";
  }
  return "?";
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  fail(ErrorKind::data, "unknown split '" + std::string(s) + "' (expected train or test)");
}

// ------------------------------------------------------------- channels

namespace {

std::vector<double> windowed_sinc(double cutoff_hz, int sample_rate, std::size_t taps, bool highpass) {
  require(taps % 2 == 1, ErrorKind::config, "FIR design needs an odd tap count");
  require(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0, ErrorKind::config,
          "FIR cutoff must lie strictly between 0 and Nyquist");
  const double fc = cutoff_hz / sample_rate;
  const auto mid = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t n = 0; n < taps; ++n) {
    const double x = static_cast<double>(n) - mid;
    const double sinc = x == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * x) / (std::numbers::pi * x);
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(taps - 1));
    h[n] = sinc * w;
    sum += h[n];
  }
  for (auto& v : h) v /= sum;  // unit DC gain
  if (highpass) {
    for (auto& v : h) v = -v;
    h[taps / 2] += 1.0;
  }
  return h;
}

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

std::vector<double> lowpass_taps(double cutoff_hz, int sample_rate, std::size_t taps) {
  return windowed_sinc(cutoff_hz, sample_rate, taps, false);
}

std::vector<double> highpass_taps(double cutoff_hz, int sample_rate, std::size_t taps) {
  return windowed_sinc(cutoff_hz, sample_rate, taps, true);
}

WaveBuffer apply_channel(const WaveBuffer& wave, const DeviceChannel& channel, std::uint64_t seed) {
  const auto& h = channel.fir_taps;
  require(!h.empty(), ErrorKind::config, "device " + channel.id + ": FIR taps must be non-empty");
  for (double v : h) require(std::isfinite(v), ErrorKind::config, "device " + channel.id + ": non-finite FIR tap");
  const std::size_t n = wave.samples.size();
  WaveBuffer out{std::vector<double>(n, 0.0), wave.sample_rate};
  const double gain = std::pow(10.0, channel.gain_db / 20.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const std::size_t kmax = std::min(h.size(), i + 1);
    for (std::size_t k = 0; k < kmax; ++k) acc += h[k] * wave.samples[i - k];
    out.samples[i] = gain * acc;
  }
  if (std::isfinite(channel.noise_db)) {
    const double sigma = rms(out.samples) * std::pow(10.0, channel.noise_db / 20.0);
    Rng rng(seed);
    for (auto& v : out.samples) v += sigma * rng.normal();
  }
  return out;
}

// --------------------------------------------------------------- scenes

namespace {

struct NamedScene {
  const char* name;
  SuperCluster cluster;
};

constexpr std::array<NamedScene, 10> kDefaultScenes{{
    {"airport", SuperCluster::indoor},
    {"shopping_mall", SuperCluster::indoor},
    {"metro_station", SuperCluster::indoor},
    {"street_pedestrian", SuperCluster::outdoor},
    {"public_square", SuperCluster::outdoor},
    {"street_traffic", SuperCluster::outdoor},
    {"park", SuperCluster::outdoor},
    {"tram", SuperCluster::transport},
    {"bus", SuperCluster::transport},
    {"metro", SuperCluster::transport},
}};

/// Cluster spectral shape in dB at normalized mel position u in [0, 1].
double cluster_shape_db(SuperCluster c, double u) {
  auto bump = [u](double at, double width) { return std::exp(-(u - at) * (u - at) / (2 * width * width)); };
  switch (c) {
    case SuperCluster::indoor:  // babble and reverberant speech band
      return -14.0 * std::pow((u - 0.35) / 0.3, 2) + 4.0 * bump(0.3, 0.05);
    case SuperCluster::outdoor:  // broadband, tilted
      return -12.0 * u + 5.0 * bump(0.7, 0.08);
    case SuperCluster::transport:  // engine rumble
      return -28.0 * u + 12.0 * bump(0.08, 0.05);
  }
  return 0.0;
}

struct ToneRange {
  double lo, hi;
};

ToneRange tone_range(SuperCluster c) {
  switch (c) {
    case SuperCluster::indoor: return {400.0, 2500.0};
    case SuperCluster::outdoor: return {1500.0, 7000.0};
    case SuperCluster::transport: return {40.0, 300.0};
  }
  return {100.0, 1000.0};
}

double band_position(std::size_t b, std::size_t bands) {
  return (static_cast<double>(b) + 0.5) / static_cast<double>(bands);
}

}  // namespace

std::vector<SceneSpec> make_scenes(const CorpusConfig& cfg) {
  require(cfg.num_scenes >= 3, ErrorKind::config, "corpus: need at least 3 scenes (one per super-cluster)");
  require(cfg.bands >= 4, ErrorKind::config, "corpus: need at least 4 bands");
  std::vector<SceneSpec> scenes(cfg.num_scenes);
  for (std::size_t s = 0; s < cfg.num_scenes; ++s) {
    SceneSpec& sc = scenes[s];
    sc.id = s;
    if (cfg.num_scenes == kDefaultScenes.size()) {
      sc.name = kDefaultScenes[s].name;
      sc.cluster = kDefaultScenes[s].cluster;
    } else {
      sc.name = "scene_" + std::to_string(s);
      sc.cluster = static_cast<SuperCluster>(s % 3);
    }
    Rng rng(derive_seed(cfg.profile_seed, s));
    // Smooth scene signature: a few random bumps over the cluster shape.
    std::array<double, 3> at{}, width{}, amp{};
    for (std::size_t k = 0; k < 3; ++k) {
      at[k] = rng.uniform(0.05, 0.95);
      width[k] = rng.uniform(0.04, 0.12);
      amp[k] = cfg.scene_spread_db * rng.normal();
    }
    sc.band_db.resize(cfg.bands);
    for (std::size_t b = 0; b < cfg.bands; ++b) {
      const double u = band_position(b, cfg.bands);
      double v = cluster_shape_db(sc.cluster, u);
      for (std::size_t k = 0; k < 3; ++k) v += amp[k] * std::exp(-(u - at[k]) * (u - at[k]) / (2 * width[k] * width[k]));
      sc.band_db[b] = v;
    }
    const ToneRange tr = tone_range(sc.cluster);
    const std::size_t tones = 1 + rng.below(2);
    for (std::size_t k = 0; k < tones; ++k) {
      sc.tone_hz.push_back(tr.lo * std::pow(tr.hi / tr.lo, rng.uniform()));
      sc.tone_db.push_back(rng.uniform(-14.0, -4.0));
    }
    sc.mod_rate_hz = sc.cluster == SuperCluster::transport ? rng.uniform(0.5, 2.0) : rng.uniform(2.0, 8.0);
    sc.mod_depth = rng.uniform(0.1, 0.5);
  }
  return scenes;
}

double template_similarity(const SceneSpec& a, const SceneSpec& b) {
  require(a.band_db.size() == b.band_db.size(), ErrorKind::input, "template_similarity: band count mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.band_db.size(); ++i) {
    const double x = std::pow(10.0, a.band_db[i] / 10.0), y = std::pow(10.0, b.band_db[i] / 10.0);
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  return ab / std::sqrt(aa * bb);
}

WaveBuffer render_scene(const SceneSpec& scene, const CorpusConfig& cfg, int sample_rate, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * sample_rate));
  require(n >= 2, ErrorKind::config, "corpus: duration too short");
  Rng rng(seed);
  const std::size_t bands = scene.band_db.size();

  // Per-recording perturbation of the template, lightly smoothed over bands.
  std::vector<double> raw(bands), db(bands);
  for (auto& v : raw) v = cfg.instance_spread_db * rng.normal();
  for (std::size_t b = 0; b < bands; ++b) {
    const double l = raw[b > 0 ? b - 1 : b], r = raw[b + 1 < bands ? b + 1 : b];
    db[b] = scene.band_db[b] + 0.25 * l + 0.5 * raw[b] + 0.25 * r;
  }

  // Noise bed: white noise shaped in the frequency domain.
  fft::RealBuf time = fft::real_buffer(n);
  const std::size_t bins = n / 2 + 1;
  fft::ComplexBuf spec = fft::complex_buffer(bins);
  for (std::size_t i = 0; i < n; ++i) time.get()[i] = rng.normal();
  fftw_execute_dft_r2c(fft::r2c(n), time.get(), spec.get());
  const double mel_top = audiofeat::hz_to_mel(sample_rate / 2.0);
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
    const double pos = audiofeat::hz_to_mel(f) / mel_top * static_cast<double>(bands) - 0.5;
    double level;
    if (pos <= 0.0) level = db.front();
    else if (pos >= static_cast<double>(bands - 1)) level = db.back();
    else {
      const auto i = static_cast<std::size_t>(pos);
      const double t = pos - static_cast<double>(i);
      level = (1.0 - t) * db[i] + t * db[i + 1];
    }
    const double a = std::pow(10.0, level / 20.0) / static_cast<double>(n);
    spec.get()[k][0] *= a;
    spec.get()[k][1] *= a;
  }
  fftw_execute_dft_c2r(fft::c2r(n), spec.get(), time.get());

  WaveBuffer w{std::vector<double>(time.get(), time.get() + n), sample_rate};
  const double level = 0.05 * std::pow(10.0, cfg.level_jitter_db * rng.normal() / 20.0);
  const double bed = rms(w.samples);
  for (auto& v : w.samples) v *= level / bed;

  const double dt = 1.0 / sample_rate;
  for (std::size_t k = 0; k < scene.tone_hz.size(); ++k) {
    const double f = scene.tone_hz[k] * (1.0 + 0.01 * rng.normal());
    const double amp = level * std::sqrt(2.0) * std::pow(10.0, (scene.tone_db[k] + cfg.tone_offset_db + 2.0 * rng.normal()) / 20.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i)
      w.samples[i] += amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) * dt + phase);
  }
  const double mphase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] *= 1.0 + scene.mod_depth * std::sin(2.0 * std::numbers::pi * scene.mod_rate_hz * static_cast<double>(i) * dt + mphase);
  return w;
}

// -------------------------------------------------------------- corpus

void validate(const CorpusConfig& cfg) {
  std::vector<std::string> errs;
  if (cfg.num_scenes < 3) errs.push_back("num_scenes must be >= 3");
  if (!(cfg.duration_s > 0.0)) errs.push_back("duration_s must be > 0");
  if (cfg.devices.empty()) errs.push_back("at least one device is required");
  std::set<std::string> ids;
  std::size_t paired = 0, source_train = 0;
  bool have_source = false;
  for (const auto& d : cfg.devices) {
    if (d.channel.id.empty()) errs.push_back("device id must be non-empty");
    if (!ids.insert(d.channel.id).second) errs.push_back("duplicate device id '" + d.channel.id + "'");
    if (d.channel.fir_taps.empty()) errs.push_back("device " + d.channel.id + ": fir_taps must be non-empty");
    if (d.train + d.test == 0) errs.push_back("device " + d.channel.id + ": needs at least one recording");
    if (!(d.pair_fraction >= 0.0 && d.pair_fraction <= 1.0))
      errs.push_back("device " + d.channel.id + ": pair_fraction must lie in [0, 1]");
    if (d.channel.id == cfg.source_device) {
      have_source = true;
      source_train = d.train;
      if (d.pair_fraction > 0.0) errs.push_back("source device cannot itself be paired");
    } else {
      paired += static_cast<std::size_t>(std::llround(d.pair_fraction * static_cast<double>(d.train)));
    }
  }
  if (!have_source && !cfg.devices.empty()) errs.push_back("source device '" + cfg.source_device + "' is not listed");
  if (paired > source_train)
    errs.push_back("pairing needs " + std::to_string(paired) + " source train recordings, only " +
                   std::to_string(source_train) + " configured");
  if (!errs.empty()) {
    std::string msg = "invalid corpus configuration:";
    for (const auto& e : errs) msg += "\n  " + e;
    fail(ErrorKind::config, msg);
  }
}

namespace {

struct Job {
  RecordingEntry entry;
  const DevicePlan* device;
  std::uint64_t signal_seed;
  std::uint64_t channel_seed;
};

std::string pad(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
}

}  // namespace

CorpusManifest generate_corpus(const CorpusConfig& cfg, const audiofeat::FeatureConfig& features, std::uint64_t seed,
                               const std::string& out_dir, unsigned workers) {
  validate(cfg);
  const auto scenes = make_scenes(cfg);
  const std::size_t k = cfg.num_scenes;

  const DevicePlan* source = nullptr;
  for (const auto& d : cfg.devices)
    if (d.channel.id == cfg.source_device) source = &d;

  std::vector<Job> jobs;
  std::size_t signal_counter = 0;
  auto add_entries = [&](const DevicePlan& d, Split split, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      RecordingEntry e;
      e.device_id = d.channel.id;
      e.split = split;
      e.duration_s = cfg.duration_s;
      e.scene_id = i % k;
      e.path = "features/" + d.channel.id + "/" + std::string(to_string(split)) + "/" + d.channel.id + "_" +
               std::string(to_string(split)) + "_" + pad(i) + ".lmfb";
      jobs.push_back({e, &d, derive_seed(seed, signal_counter++), 0});
    }
  };
  // Source device first so pairs can point at its train recordings.
  add_entries(*source, Split::train, source->train);
  add_entries(*source, Split::test, source->test);
  std::size_t cursor = 0;
  for (const auto& d : cfg.devices) {
    if (&d == source) continue;
    const auto pairs = static_cast<std::size_t>(std::llround(d.pair_fraction * static_cast<double>(d.train)));
    const std::size_t first = jobs.size();
    add_entries(d, Split::train, d.train);
    for (std::size_t i = 0; i < pairs; ++i) {
      Job& sib = jobs[cursor + i];
      Job& j = jobs[first + i];
      if (sib.entry.pair_id.empty()) sib.entry.pair_id = "p" + pad(cursor + i);
      j.entry.pair_id = sib.entry.pair_id;
      j.entry.scene_id = sib.entry.scene_id;
      j.signal_seed = sib.signal_seed;
    }
    cursor += pairs;
    add_entries(d, Split::test, d.test);
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) jobs[i].channel_seed = derive_seed(seed ^ 0xC0FFEE5EEDULL, i);

  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const Job& j = jobs[i];
    const WaveBuffer clean = render_scene(scenes[j.entry.scene_id], cfg, features.sample_rate, j.signal_seed);
    WaveBuffer wave = apply_channel(clean, j.device->channel, j.channel_seed);
    // Features come from the float32 samples that go to disk, so re-extracting
    // from the WAV reproduces the LMFB bytes exactly.
    if (cfg.write_wav)
      for (auto& v : wave.samples) v = static_cast<float>(v);
    const fs::path path = fs::path(out_dir) / j.entry.path;
    audiofeat::write_lmfb(path.string(), audiofeat::extract(wave, features));
    if (cfg.write_wav) {
      fs::path wav = path;
      wav.replace_extension(".wav");
      audiofeat::write_wav(wav.string(), wave, audiofeat::WavFormat::float32);
    }
  });

  CorpusManifest m;
  m.seed = seed;
  m.num_classes = k;
  m.root = out_dir;
  for (auto& j : jobs) m.entries.push_back(std::move(j.entry));
  m.validate();
  write_manifest(m, (fs::path(out_dir) / "manifest.tsv").string());
  return m;
}

void CorpusManifest::validate() const {
  std::set<std::string> paths;
  std::map<std::string, std::vector<const RecordingEntry*>> pairs;
  for (const auto& e : entries) {
    if (!paths.insert(e.path).second) fail(ErrorKind::data, "manifest: duplicate path '" + e.path + "'");
    if (num_classes && e.scene_id >= num_classes)
      fail(ErrorKind::data, "manifest: scene id " + std::to_string(e.scene_id) + " out of range in '" + e.path + "'");
    if (!e.pair_id.empty()) pairs[e.pair_id].push_back(&e);
  }
  for (const auto& [id, group] : pairs) {
    std::set<std::string> devices;
    for (const auto* e : group) {
      if (e->scene_id != group.front()->scene_id || e->split != group.front()->split)
        fail(ErrorKind::data, "manifest: pair '" + id + "' mixes scenes or splits");
      if (!devices.insert(e->device_id).second)
        fail(ErrorKind::data, "manifest: pair '" + id + "' repeats device " + e->device_id);
    }
  }
}

// ------------------------------------------------------------ manifest

void write_manifest(const CorpusManifest& m, const std::string& path) {
  std::ostringstream out;
  out << "#generator=" << m.generator << "\n#seed=" << m.seed << "\n#num_classes=" << m.num_classes << "\n";
  out << "path\tscene_id\tdevice_id\tpair_id\tsplit\tduration_s\n";
  for (const auto& e : m.entries) {
    char dur[32];
    std::snprintf(dur, sizeof dur, "%.6g", e.duration_s);
    out << e.path << '\t' << e.scene_id << '\t' << e.device_id << '\t' << e.pair_id << '\t' << to_string(e.split)
        << '\t' << dur << '\n';
  }
  const std::string text = out.str();
  binio::write_file(path, binio::Bytes(text.begin(), text.end()));
}

CorpusManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open manifest '" + path + "'");
  CorpusManifest m;
  m.root = fs::path(path).parent_path().string();
  std::string line;
  bool header = false;
  std::size_t lineno = 0, max_scene = 0;
  auto bad = [&](const std::string& why) {
    fail(ErrorKind::data, "manifest '" + path + "' line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(1, eq - 1), value = line.substr(eq + 1);
      try {
        if (key == "seed") m.seed = std::stoull(value);
        else if (key == "generator") m.generator = value;
        else if (key == "num_classes") m.num_classes = std::stoul(value);
      } catch (const std::exception&) {
        bad("malformed metadata '" + key + "'");
      }
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, '\t');) cols.push_back(c);
    if (line.back() == '\t') cols.emplace_back();
    if (!header) {
      if (cols != std::vector<std::string>{"path", "scene_id", "device_id", "pair_id", "split", "duration_s"})
        bad("expected header 'path scene_id device_id pair_id split duration_s'");
      header = true;
      continue;
    }
    if (cols.size() != 6) bad("expected 6 tab-separated columns, got " + std::to_string(cols.size()));
    RecordingEntry e;
    e.path = cols[0];
    try {
      std::size_t used = 0;
      e.scene_id = std::stoul(cols[1], &used);
      if (used != cols[1].size()) throw std::invalid_argument("scene");
      e.duration_s = std::stod(cols[5]);
    } catch (const std::exception&) {
      bad("malformed numeric field");
    }
    e.device_id = cols[2];
    e.pair_id = cols[3];
    e.split = parse_split(cols[4]);
    if (e.path.empty() || e.device_id.empty()) bad("path and device_id are required");
    max_scene = std::max(max_scene, e.scene_id);
    m.entries.push_back(std::move(e));
  }
  if (!header) fail(ErrorKind::data, "manifest '" + path + "' has no header row");
  if (m.num_classes == 0) m.num_classes = max_scene + 1;
  m.validate();
  return m;
}

// ------------------------------------------------------------- loading

bool Filter::matches(const RecordingEntry& e) const {
  if (split && e.split != *split) return false;
  return devices.empty() || std::find(devices.begin(), devices.end(), e.device_id) != devices.end();
}

diffcore::Tensor<float> SegmentSet::gather(const std::vector<std::size_t>& indices) const {
  require(!indices.empty(), ErrorKind::input, "gather: empty index list");
  diffcore::Shape shape = inputs.shape();
  const std::size_t stride = diffcore::num_elements(shape) / shape[0];
  shape[0] = indices.size();
  diffcore::Tensor<float> out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < size(), ErrorKind::range, "gather: segment index out of range");
    std::copy_n(inputs.raw() + indices[i] * stride, stride, out.raw() + i * stride);
  }
  return out;
}

namespace {

SegmentSet load_entries(const CorpusManifest& m, std::vector<RecordingEntry> entries, const LoadOptions& opts,
                        const std::string& what) {
  if (entries.empty()) fail(ErrorKind::config, "no manifest entries match " + what);
  std::vector<std::vector<audiofeat::Segment>> segs(entries.size());
  parallel_for(entries.size(), opts.workers, [&](std::size_t i) {
    const std::string path = (fs::path(m.root) / entries[i].path).string();
    segs[i] = audiofeat::segment_frames(audiofeat::read_lmfb(path), opts.seg_len, entries[i].path);
  });
  std::size_t total = 0;
  const auto mels = static_cast<std::size_t>(segs.front().front().data.rows());
  for (const auto& s : segs) {
    total += s.size();
    if (static_cast<std::size_t>(s.front().data.rows()) != mels)
      fail(ErrorKind::data, "feature dimension differs across recordings (" + s.front().recording + ")");
  }
  SegmentSet set;
  set.num_classes = m.num_classes;
  set.inputs = diffcore::Tensor<float>({total, 1, mels, opts.seg_len});
  const std::size_t stride = mels * opts.seg_len;
  std::size_t at = 0;
  for (std::size_t r = 0; r < segs.size(); ++r) {
    for (const auto& s : segs[r]) {
      // Row-major [mels x seg_len], matching the tensor layout.
      for (Eigen::Index i = 0; i < s.data.rows(); ++i)
        for (Eigen::Index j = 0; j < s.data.cols(); ++j)
          set.inputs[at * stride + static_cast<std::size_t>(i) * opts.seg_len + static_cast<std::size_t>(j)] =
              static_cast<float>(s.data(i, j));
      set.labels.push_back(entries[r].scene_id);
      set.recording.push_back(r);
      ++at;
    }
  }
  set.entries = std::move(entries);
  return set;
}

std::string describe(const Filter& f) {
  std::string s = "devices {";
  for (std::size_t i = 0; i < f.devices.size(); ++i) s += (i ? "," : "") + f.devices[i];
  s += "}";
  if (f.split) s += " split " + std::string(to_string(*f.split));
  return s;
}

}  // namespace

SegmentSet load_split(const CorpusManifest& m, const Filter& filter, const LoadOptions& opts) {
  std::vector<RecordingEntry> sel;
  for (const auto& e : m.entries)
    if (filter.matches(e)) sel.push_back(e);
  return load_entries(m, std::move(sel), opts, describe(filter));
}

PairedSet load_paired(const CorpusManifest& m, const Filter& target_filter, const std::string& source_device,
                      const LoadOptions& opts) {
  std::map<std::string, const RecordingEntry*> siblings;
  for (const auto& e : m.entries)
    if (e.device_id == source_device && !e.pair_id.empty()) siblings[e.pair_id] = &e;
  std::vector<RecordingEntry> targets, sources;
  for (const auto& e : m.entries) {
    if (!target_filter.matches(e) || e.device_id == source_device) continue;
    if (e.pair_id.empty()) fail(ErrorKind::data, "paired loading: entry '" + e.path + "' has no pair_id");
    auto it = siblings.find(e.pair_id);
    if (it == siblings.end())
      fail(ErrorKind::data, "paired loading: pair '" + e.pair_id + "' has no " + source_device + " sibling");
    targets.push_back(e);
    sources.push_back(*it->second);
  }
  PairedSet p{load_entries(m, sources, opts, "paired source"), load_entries(m, targets, opts, describe(target_filter))};
  if (p.source.size() != p.target.size())
    fail(ErrorKind::data, "paired loading: source and target recordings differ in segment count");
  return p;
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch, std::uint64_t seed) {
  require(batch >= 1, ErrorKind::config, "batch size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch)));
  return out;
}

}  // namespace nlekit::scenegen
