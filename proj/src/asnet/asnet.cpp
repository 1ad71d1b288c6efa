#include "nlekit/asnet/asnet.hpp"

#include <algorithm>
#include <cmath>

#include "nlekit/parallel.hpp"
#include "nlekit/rng.hpp"

namespace nlekit::asnet {

using namespace diffcore;

std::vector<std::string> ModelConfig::violations() const {
  std::vector<std::string> v;
  if (input_mels < 1) v.push_back("model.input_mels: must be >= 1");
  if (input_frames < 1) v.push_back("model.input_frames: must be >= 1");
  if (conv_channels.size() != 5) v.push_back("model.conv_channels: exactly 5 conv blocks required");
  for (auto ch : conv_channels)
    if (ch < 1) v.push_back("model.conv_channels: every width must be >= 1");
  if (kernel < 1) v.push_back("model.kernel: must be >= 1");
  if (fc_hidden < 1) v.push_back("model.fc_hidden: must be >= 1");
  if (num_classes < 2) v.push_back("model.num_classes: must be >= 2");
  if (!(bn_eps > 0.0)) v.push_back("model.bn_eps: must be > 0");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) v.push_back("model.bn_momentum: must lie in (0, 1]");
  return v;
}

void ModelConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid model configuration:";
  for (const auto& s : v) msg += "\n  " + s;
  fail(ErrorKind::config, msg);
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"input_mels", c.input_mels},   {"input_frames", c.input_frames}, {"conv_channels", c.conv_channels},
          {"kernel", c.kernel},           {"fc_hidden", c.fc_hidden},       {"num_classes", c.num_classes},
          {"bn_eps", c.bn_eps},           {"bn_momentum", c.bn_momentum}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.input_mels = j.value("input_mels", c.input_mels);
    c.input_frames = j.value("input_frames", c.input_frames);
    c.conv_channels = j.value("conv_channels", c.conv_channels);
    c.kernel = j.value("kernel", c.kernel);
    c.fc_hidden = j.value("fc_hidden", c.fc_hidden);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.bn_eps = j.value("bn_eps", c.bn_eps);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("model config: ") + e.what());
  }
  return c;
}

std::vector<PoolWindow> pool_schedule(const ModelConfig& c) {
  std::vector<PoolWindow> out;
  std::size_t h = c.input_mels, w = c.input_frames;
  for (std::size_t i = 0; i < c.conv_channels.size(); ++i) {
    const PoolWindow p = (h >= 2 && w >= 2) ? PoolWindow{2, 2} : PoolWindow{2, 1};
    out.push_back(p);
    h /= p.h;
    w /= p.w;
  }
  return out;
}

template <typename T>
Sequential<T> build_network(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  Sequential<T> net;
  const auto pools = pool_schedule(c);
  std::size_t cin = 1;
  std::uint64_t layer = 0;
  for (std::size_t b = 0; b < c.conv_channels.size(); ++b) {
    const std::string n = "block" + std::to_string(b + 1);
    auto conv = std::make_unique<Conv2d<T>>(cin, c.conv_channels[b], c.kernel, c.kernel,
                                            Padding2d::same(c.kernel, c.kernel));
    kaiming_uniform_init(conv->weight(), cin * c.kernel * c.kernel, derive_seed(seed, layer++));
    net.add(n + ".conv", std::move(conv));
    net.add(n + ".bn", std::make_unique<BatchNorm<T>>(c.conv_channels[b], c.bn_eps, c.bn_momentum));
    net.add(n + ".relu", std::make_unique<Relu<T>>());
    net.add(n + ".pool", std::make_unique<MaxPool2d<T>>(pools[b].h, pools[b].w, pools[b].h, pools[b].w));
    cin = c.conv_channels[b];
  }
  net.add("flatten", std::make_unique<Flatten<T>>());
  // Flattened width comes from the shape chain so a bad config reports every stage.
  const Shape input{1, 1, c.input_mels, c.input_frames};
  const auto chain = net.shape_chain(input);
  const std::size_t flat = chain.back()[1];
  auto fc1 = std::make_unique<Dense<T>>(flat, c.fc_hidden);
  kaiming_uniform_init(fc1->weight(), flat, derive_seed(seed, layer++));
  net.add("fc1", std::move(fc1));
  net.add("fc1.relu", std::make_unique<Relu<T>>());
  auto fc2 = std::make_unique<Dense<T>>(c.fc_hidden, c.num_classes);
  kaiming_uniform_init(fc2->weight(), c.fc_hidden, derive_seed(seed, layer++));
  net.add("fc2", std::move(fc2));
  const auto out = net.shape_chain(input).back();
  require(out == Shape{1, c.num_classes}, ErrorKind::config, "model does not end in [N x num_classes]");
  return net;
}

template Sequential<float> build_network<float>(const ModelConfig&, std::uint64_t);
template Sequential<double> build_network<double>(const ModelConfig&, std::uint64_t);

Model build_model(const ModelConfig& c, std::uint64_t seed) { return Model{c, build_network<float>(c, seed), "source"}; }

void set_batchnorm_frozen(Model& m, bool frozen) {
  for (std::size_t i = 0; i < m.net.size(); ++i)
    if (auto* bn = dynamic_cast<BatchNorm<float>*>(&m.net.layer(i))) bn->set_frozen_stats(frozen);
}

void check_input(const Model& m, const Shape& s) {
  if (s.size() != 4 || s[1] != 1 || s[2] != m.config.input_mels || s[3] != m.config.input_frames)
    fail(ErrorKind::input, "segments of shape " + shape_to_string(s) + " do not match the model input [N x 1 x " +
                               std::to_string(m.config.input_mels) + " x " + std::to_string(m.config.input_frames) + "]");
}

divloss::Matrix infer_logits(Model& m, const Tensor<float>& segments, std::size_t chunk, unsigned workers) {
  check_input(m, segments.shape());
  require(chunk > 0, ErrorKind::input, "infer_logits: chunk must be > 0");
  const std::size_t n = segments.dim(0), stride = segments.size() / n, k = m.config.num_classes;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, chunks));
  divloss::Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  // Eval mode touches only per-call caches, so each worker gets its own copy.
  std::vector<Sequential<float>> copies(workers - 1, m.net);
  parallel_for(chunks, workers, [&](std::size_t c, unsigned w) {
    Sequential<float>& net = w == 0 ? m.net : copies[w - 1];
    const std::size_t start = c * chunk, len = std::min(chunk, n - start);
    Tensor<float> batch({len, 1, m.config.input_mels, m.config.input_frames});
    std::copy_n(segments.raw() + start * stride, len * stride, batch.raw());
    const Tensor<float> logits = net.forward(std::move(batch), Mode::eval);
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < k; ++j) out(static_cast<Eigen::Index>(start + i), static_cast<Eigen::Index>(j)) = logits[i * k + j];
  });
  return out;
}

divloss::Matrix infer_posteriors(Model& m, const Tensor<float>& segments, double temperature, std::size_t chunk,
                                 unsigned workers) {
  if (!(temperature > 0.0)) fail(ErrorKind::input, "infer_posteriors: temperature must be > 0");
  return divloss::softmax_rows(infer_logits(m, segments, chunk, workers), temperature);
}

checkpoint::Container to_container(const Model& m) {
  checkpoint::Container c;
  c.config = {{"kind", "model"}, {"role", m.role}, {"model", to_json(m.config)}};
  auto& net = const_cast<Sequential<float>&>(m.net);
  for (const auto& p : net.state()) {
    checkpoint::Record r;
    r.name = p.name;
    for (auto d : p.tensor->shape()) r.dims.push_back(static_cast<std::uint32_t>(d));
    r.f32_data.assign(p.tensor->data().begin(), p.tensor->data().end());
    c.records.push_back(std::move(r));
  }
  return c;
}

Model from_container(const checkpoint::Container& c, const std::string& what) {
  if (c.config.value("kind", "") != "model")
    fail(ErrorKind::persistence, what + ": not a model checkpoint (kind '" + c.config.value("kind", "") + "')");
  Model m = build_model(model_config_from_json(c.config.at("model")), 0);
  m.role = c.config.value("role", "source");
  auto state = m.net.state();
  if (state.size() != c.records.size())
    fail(ErrorKind::persistence, what + ": expected " + std::to_string(state.size()) + " records, found " +
                                     std::to_string(c.records.size()));
  for (auto& p : state) {
    const auto& r = c.find(p.name);
    std::vector<std::size_t> dims(r.dims.begin(), r.dims.end());
    if (r.f64 || dims != p.tensor->shape())
      fail(ErrorKind::persistence, what + ": record '" + p.name + "' has the wrong dtype or shape");
    std::copy(r.f32_data.begin(), r.f32_data.end(), p.tensor->data().begin());
  }
  return m;
}

std::string save_checkpoint(const Model& m, const std::string& path) { return checkpoint::save(to_container(m), path); }

Model load_checkpoint(const std::string& path) {
  return from_container(checkpoint::load(path), "checkpoint '" + path + "'");
}

std::string model_digest(const Model& m) { return checkpoint::digest(to_container(m)); }

}  // namespace nlekit::asnet
