#include "config.hpp"

#include <cmath>
#include <set>

#include "nlekit/binio.hpp"

namespace nlekit::tool {

using nlohmann::json;

std::vector<std::string> RunConfig::device_ids() const {
  std::vector<std::string> ids;
  for (const auto& d : corpus.devices) ids.push_back(d.channel.id);
  return ids;
}

std::vector<std::string> RunConfig::target_devices() const {
  std::vector<std::string> ids;
  for (const auto& d : corpus.devices)
    if (d.channel.id != corpus.source_device) ids.push_back(d.channel.id);
  return ids;
}

json read_config_file(const std::string& path) {
  const auto bytes = binio::read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::config, "config '" + path + "': " + e.what());
  }
}

void apply_override(json& j, const std::string& a) {
  const auto eq = a.find('=');
  if (eq == std::string::npos || eq == 0) fail(ErrorKind::config, "override '" + a + "' is not key=value");
  const std::string key = a.substr(0, eq), text = a.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) fail(ErrorKind::config, "override '" + a + "' has an empty key segment");
    if (!node->is_object()) fail(ErrorKind::config, "override '" + a + "': '" + part + "' is not inside an object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

namespace {

// Reads typed fields out of one JSON object, collecting violations and
// flagging keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path, std::vector<std::string>& errs) : path_(std::move(path)), errs_(errs) {
    if (j.is_null()) return;
    if (!j.is_object()) {
      bad("", "must be an object");
      return;
    }
    obj_ = &j;
  }
  ~Fields() {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it)
      if (!seen_.count(it.key())) bad(it.key(), "unknown key");
  }

  bool has(const std::string& k) const { return obj_ && obj_->contains(k); }
  const json& raw(const std::string& k) {
    seen_.insert(k);
    static const json null;
    return has(k) ? obj_->at(k) : null;
  }
  std::string sub(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  template <typename T>
  T get(const std::string& k, T def) {
    seen_.insert(k);
    if (!has(k)) return def;
    try {
      return obj_->at(k).get<T>();
    } catch (const json::exception&) {
      bad(k, "wrong type (got " + std::string(obj_->at(k).type_name()) + ")");
      return def;
    }
  }
  double real(const std::string& k, double def, double lo, double hi, bool lo_open = false) {
    const double v = get<double>(k, def);
    if (!std::isfinite(v) || (lo_open ? !(v > lo) : !(v >= lo)) || !(v <= hi))
      bad(k, "must lie in " + std::string(lo_open ? "(" : "[") + fmt(lo) + ", " + fmt(hi) + "], got " + fmt(v));
    return v;
  }
  std::size_t count(const std::string& k, std::size_t def, std::size_t lo, std::size_t hi = 1u << 30) {
    if (has(k) && obj_->at(k).is_number_integer() && obj_->at(k).get<long long>() < 0) {
      seen_.insert(k);
      bad(k, "must be >= " + std::to_string(lo) + ", got " + obj_->at(k).dump());
      return def;
    }
    const auto v = get<std::size_t>(k, def);
    if (v < lo || v > hi) bad(k, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + std::to_string(v));
    return v;
  }
  void bad(const std::string& k, const std::string& what) { errs_.push_back((k.empty() ? path_ : sub(k)) + ": " + what); }

 private:
  static std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    json j = v;
    return j.dump();
  }
  const json* obj_ = nullptr;
  std::string path_;
  std::vector<std::string>& errs_;
  std::set<std::string> seen_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

scenegen::DevicePlan parse_device(const json& j, const std::string& path, int sample_rate,
                                  std::vector<std::string>& errs) {
  Fields f(j, path, errs);
  scenegen::DevicePlan d;
  d.channel.id = f.get<std::string>("id", "");
  if (d.channel.id.empty()) f.bad("id", "required, non-empty");
  d.train = f.count("train", 0, 0);
  d.test = f.count("test", 0, 0);
  d.pair_fraction = f.real("pair_fraction", 0.0, 0.0, 1.0);
  d.channel.gain_db = f.real("gain_db", 0.0, -60.0, 60.0);
  const json& noise = f.raw("noise_db");
  if (!noise.is_null()) {
    if (!noise.is_number()) f.bad("noise_db", "must be a number or null");
    else d.channel.noise_db = noise.get<double>();
  }
  const std::size_t taps = f.count("taps", 63, 1, 4097);
  if (taps % 2 == 0) f.bad("taps", "must be odd");
  const double nyq = sample_rate / 2.0;
  const double lp = f.real("lowpass_hz", 0.0, 0.0, nyq), hp = f.real("highpass_hz", 0.0, 0.0, nyq);
  std::vector<double> fir = f.get<std::vector<double>>("fir", {});
  if (fir.empty()) {
    fir = {1.0};
    auto convolve = [&](const std::vector<double>& h) {
      std::vector<double> out(fir.size() + h.size() - 1, 0.0);
      for (std::size_t a = 0; a < fir.size(); ++a)
        for (std::size_t b = 0; b < h.size(); ++b) out[a + b] += fir[a] * h[b];
      fir = std::move(out);
    };
    if (taps % 2 == 1 && sample_rate > 0) {
      if (lp > 0) convolve(scenegen::lowpass_taps(lp, sample_rate, taps));
      if (hp > 0) convolve(scenegen::highpass_taps(hp, sample_rate, taps));
    }
  } else if (lp > 0 || hp > 0) {
    f.bad("fir", "give either explicit taps or lowpass_hz/highpass_hz, not both");
  }
  d.channel.fir_taps = fir;
  return d;
}

adapt::TrainPlan parse_plan(const json& j, const std::string& path, adapt::Regime regime, std::vector<std::string>& errs) {
  Fields f(j, path, errs);
  adapt::TrainPlan p = adapt::default_plan(regime);
  p.initial_lr = f.real("initial_lr", p.initial_lr, 0.0, 10.0, true);
  p.epochs = f.count("epochs", p.epochs, 0, 100000);
  p.batch = f.count("batch", p.batch, 2, 1u << 20);
  p.lambda = f.real("lambda", p.lambda, 0.0, 1e6);
  p.temperature = f.real("temperature", p.temperature, 0.0, 1e3, true);
  p.momentum = f.real("momentum", p.momentum, 0.0, 0.999999);
  p.freeze_bn = f.get<bool>("freeze_bn", p.freeze_bn);
  p.rtsl_all_columns = f.get<bool>("rtsl_all_columns", p.rtsl_all_columns);
  p.temper_nle = f.get<bool>("temper_nle", p.temper_nle);
  p.devices = f.get<std::vector<std::string>>("devices", p.devices);
  return p;
}

}  // namespace

ParsedConfig parse_config(const json& j) {
  ParsedConfig out;
  auto& errs = out.violations;
  RunConfig& c = out.config;
  Fields top(j, "", errs);
  c.seed = top.get<std::uint64_t>("seed", c.seed);
  c.workdir = top.get<std::string>("workdir", c.workdir);
  if (c.workdir.empty()) top.bad("workdir", "must not be empty");
  c.seeds = top.get<std::vector<std::uint64_t>>("seeds", {});
  if (c.seeds.empty()) c.seeds = {c.seed};
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) top.bad("seeds", "duplicate seed");

  {
    Fields f(top.raw("features"), "features", errs);
    auto& fe = c.features;
    fe.sample_rate = static_cast<int>(f.count("sample_rate", static_cast<std::size_t>(fe.sample_rate), 1000, 384000));
    fe.win_len_s = f.real("win_len_s", fe.win_len_s, 0.0, 1.0, true);
    fe.hop_s = f.real("hop_s", fe.hop_s, 0.0, 1.0, true);
    fe.nfft = f.count("nfft", fe.nfft, 16, 1u << 16);
    if (fe.nfft < audiofeat::seconds_to_samples(fe.win_len_s, fe.sample_rate)) f.bad("nfft", "must cover the window length");
    fe.n_mels = f.count("n_mels", fe.n_mels, 1, 1024);
    fe.f_min = f.real("f_min", fe.f_min, 0.0, fe.sample_rate / 2.0);
    fe.f_max = f.real("f_max", fe.f_max, 0.0, fe.sample_rate / 2.0);
    if (fe.f_max > 0 && fe.f_max <= fe.f_min) f.bad("f_max", "must exceed f_min (0 means Nyquist)");
    fe.floor = f.real("floor", fe.floor, 0.0, 1.0, true);
    fe.seg_len = f.count("seg_len", fe.seg_len, 1, 100000);
    fe.normalize = f.get<bool>("normalize", fe.normalize);
  }
  {
    Fields f(top.raw("corpus"), "corpus", errs);
    auto& co = c.corpus;
    c.corpus_seed = f.get<std::uint64_t>("seed", c.corpus_seed);
    co.num_scenes = f.count("num_scenes", co.num_scenes, 2, 1000);
    co.duration_s = f.real("duration_s", co.duration_s, 0.0, 3600.0, true);
    co.bands = f.count("bands", co.bands, 2, 512);
    co.profile_seed = f.get<std::uint64_t>("profile_seed", co.profile_seed);
    co.scene_spread_db = f.real("scene_spread_db", co.scene_spread_db, 0.0, 60.0);
    co.instance_spread_db = f.real("instance_spread_db", co.instance_spread_db, 0.0, 60.0);
    co.level_jitter_db = f.real("level_jitter_db", co.level_jitter_db, 0.0, 60.0);
    co.tone_offset_db = f.real("tone_offset_db", co.tone_offset_db, -200.0, 40.0);
    co.source_device = f.get<std::string>("source_device", co.source_device);
    co.write_wav = f.get<bool>("write_wav", co.write_wav);
    const json& devs = f.raw("devices");
    if (devs.is_null()) {
      f.bad("devices", "required");
    } else if (!devs.is_array() || devs.empty()) {
      f.bad("devices", "must be a non-empty array");
    } else {
      for (std::size_t i = 0; i < devs.size(); ++i)
        co.devices.push_back(parse_device(devs[i], "corpus.devices[" + std::to_string(i) + "]", c.features.sample_rate, errs));
    }
    std::set<std::string> ids;
    bool has_source = false;
    for (const auto& d : co.devices) {
      if (!d.channel.id.empty() && !ids.insert(d.channel.id).second) f.bad("devices", "duplicate device id '" + d.channel.id + "'");
      has_source |= d.channel.id == co.source_device;
    }
    if (!co.devices.empty() && !has_source) f.bad("source_device", "'" + co.source_device + "' is not among the devices");
    const double frames = std::floor((co.duration_s - c.features.win_len_s) / c.features.hop_s) + 1;
    if (frames < static_cast<double>(c.features.seg_len))
      f.bad("duration_s", "recordings too short for one segment of features.seg_len frames");
    if (errs.empty()) {
      try {
        scenegen::validate(co);
      } catch (const Error& e) {
        errs.push_back(std::string("corpus: ") + e.what());
      }
    }
  }
  {
    Fields f(top.raw("model"), "model", errs);
    auto& m = c.model;
    m.input_mels = c.features.n_mels;
    m.input_frames = c.features.seg_len;
    m.num_classes = c.corpus.num_scenes;
    m.conv_channels = f.get<std::vector<std::size_t>>("conv_channels", m.conv_channels);
    m.kernel = f.count("kernel", m.kernel, 1, 64);
    m.fc_hidden = f.count("fc_hidden", m.fc_hidden, 1, 1u << 20);
    m.bn_eps = f.real("bn_eps", m.bn_eps, 0.0, 1.0, true);
    m.bn_momentum = f.real("bn_momentum", m.bn_momentum, 0.0, 1.0, true);
    for (const auto& v : m.violations()) errs.push_back(v);
    if (m.violations().empty()) {
      auto chain_ok = [&] {
        try {
          asnet::build_network<float>(m, 0);
        } catch (const Error& e) {
          errs.push_back(std::string("model: ") + e.what());
        }
      };
      chain_ok();
    }
  }
  {
    Fields f(top.raw("train"), "train", errs);
    const std::map<std::string, adapt::Regime> regimes{
        {"source", adapt::Regime::source_ce},          {"all_devices", adapt::Regime::source_ce},
        {"finetune_onehot", adapt::Regime::finetune_onehot}, {"ts_paired", adapt::Regime::ts_paired},
        {"nle", adapt::Regime::nle},                   {"nle_rtsl", adapt::Regime::nle_rtsl}};
    for (const auto& name : kPlanNames) {
      auto p = parse_plan(f.raw(name), "train." + name, regimes.at(name), errs);
      const auto known = c.device_ids();
      for (const auto& d : p.devices)
        if (std::find(known.begin(), known.end(), d) == known.end())
          errs.push_back("train." + name + ".devices: unknown device '" + d + "'");
      if (p.devices.empty()) {
        if (name == "source") p.devices = {c.corpus.source_device};
        else if (name == "all_devices") p.devices = c.device_ids();
        else p.devices = c.target_devices();
      }
      c.plans[name] = p;
    }
  }
  {
    Fields f(top.raw("nle"), "nle", errs);
    auto& n = c.nle;
    n.lr = f.real("lr", n.lr, 0.0, 100.0, true);
    n.steps = f.count("steps", n.steps, 1, 1u << 24);
    n.batch = f.count("batch", n.batch, 1, 1u << 20);
    n.temperature = f.real("temperature", n.temperature, 0.0, 1e3, true);
    n.momentum = f.real("momentum", n.momentum, 0.0, 0.999999);
    n.eval_every = f.count("eval_every", n.eval_every, 1, 1u << 24);
  }
  {
    Fields f(top.raw("eval"), "eval", errs);
    c.average_posteriors = f.get<bool>("average_posteriors", c.average_posteriors);
  }
  {
    Fields f(top.raw("viz"), "viz", errs);
    c.viz.perplexity = f.real("perplexity", c.viz.perplexity, 1.0, 1e4, true);
    c.viz.iters = f.count("iters", c.viz.iters, 1, 1000000);
    c.viz.max_points = f.count("max_points", c.viz.max_points, 3, 20000);
    if (c.viz.perplexity >= static_cast<double>(c.viz.max_points))
      f.bad("perplexity", "must be below viz.max_points");
  }
  return out;
}

json corpus_section(const RunConfig& c) {
  json devs = json::array();
  for (const auto& d : c.corpus.devices)
    devs.push_back({{"id", d.channel.id},         {"train", d.train},       {"test", d.test},
                    {"pair_fraction", d.pair_fraction}, {"gain_db", d.channel.gain_db},
                    {"noise_db", std::isinf(d.channel.noise_db) ? json() : json(d.channel.noise_db)},
                    {"fir", d.channel.fir_taps}});
  const auto& f = c.features;
  return {{"seed", c.corpus_seed},
          {"generator", scenegen::kGeneratorVersion},
          {"num_scenes", c.corpus.num_scenes},
          {"duration_s", c.corpus.duration_s},
          {"bands", c.corpus.bands},
          {"profile_seed", c.corpus.profile_seed},
          {"scene_spread_db", c.corpus.scene_spread_db},
          {"instance_spread_db", c.corpus.instance_spread_db},
          {"level_jitter_db", c.corpus.level_jitter_db},
          {"tone_offset_db", c.corpus.tone_offset_db},
          {"source_device", c.corpus.source_device},
          {"write_wav", c.corpus.write_wav},
          {"devices", devs},
          {"features",
           {{"sample_rate", f.sample_rate}, {"win_len_s", f.win_len_s}, {"hop_s", f.hop_s}, {"nfft", f.nfft},
            {"n_mels", f.n_mels}, {"f_min", f.f_min}, {"f_max", f.f_max}, {"floor", f.floor},
            {"normalize", f.normalize}}}};
}

json plan_section(const RunConfig& c, const std::string& name, std::uint64_t seed) {
  json j = adapt::to_json(c.plans.at(name));
  j["seed"] = seed;
  j["seg_len"] = c.features.seg_len;
  j["model"] = asnet::to_json(c.model);
  return j;
}

}  // namespace nlekit::tool
