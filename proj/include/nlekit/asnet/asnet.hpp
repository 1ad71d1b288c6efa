#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlekit/checkpoint.hpp"
#include "nlekit/diffcore/layers.hpp"
#include "nlekit/divloss/divloss.hpp"

/// AlexNet-L: five conv(4x4, same) -> batchnorm -> relu -> maxpool blocks,
/// flatten, dense(fc_hidden) + relu, dense(num_classes).
namespace nlekit::asnet {

struct ModelConfig {
  std::size_t input_mels = 128;
  std::size_t input_frames = 20;
  std::vector<std::size_t> conv_channels{32, 64, 128, 128, 64};
  std::size_t kernel = 4;
  std::size_t fc_hidden = 1024;
  std::size_t num_classes = 10;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  /// Every violation, as "field: problem" strings.
  std::vector<std::string> violations() const;
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
/// Missing keys keep their defaults; type errors are configuration errors.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// 2x2 while both spatial dims are >= 2, else 2x1 (frequency only).
struct PoolWindow {
  std::size_t h, w;
};
std::vector<PoolWindow> pool_schedule(const ModelConfig& c);

template <typename T>
diffcore::Sequential<T> build_network(const ModelConfig& c, std::uint64_t seed);

struct Model {
  ModelConfig config;
  diffcore::Sequential<float> net;
  std::string role = "source";  // source (F_S) or target (F_T)
};

/// Deterministic in seed; configuration error listing per-layer shapes when
/// the chain cannot reach [N x num_classes].
Model build_model(const ModelConfig& c, std::uint64_t seed);

/// Freezes or releases batchnorm running statistics in every block.
void set_batchnorm_frozen(Model& m, bool frozen);

/// softmax(logits / T) per segment of [N, 1, mels, frames], in eval mode,
/// processed in chunks of `chunk` segments. With workers > 1 chunks are
/// spread over copies of the network; chunk boundaries, and so the result,
/// do not depend on the worker count.
divloss::Matrix infer_posteriors(Model& m, const diffcore::Tensor<float>& segments, double temperature,
                                 std::size_t chunk = 256, unsigned workers = 1);
divloss::Matrix infer_logits(Model& m, const diffcore::Tensor<float>& segments, std::size_t chunk = 256,
                             unsigned workers = 1);

/// Checks an input batch against the model's expected segment shape.
void check_input(const Model& m, const diffcore::Shape& shape);

checkpoint::Container to_container(const Model& m);
Model from_container(const checkpoint::Container& c, const std::string& what);
std::string save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);
std::string model_digest(const Model& m);

}  // namespace nlekit::asnet
