#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ranet/blocks.hpp"

namespace ranet {

struct ModelConfig {
  int input_size = 224;
  int stem_channels = 32;
  int num_classes = 2;
  float channel_scale = 1.0f;  // divisor applied to stem and stage channel counts
  int head_hidden = 64;
};

struct StageTrace {
  std::string name;
  std::vector<int> shape;
};

enum class FeatureTap { stem_conv, stem_pool };

// The full network: 5x5/2 conv stem + 2x2 max-pool, three
// residual+attention stages, three plain residual stages, global average
// pool, and a two-layer softmax head. Owns every parameter.
class ModelGraph {
 public:
  ModelGraph(ModelConfig config, std::uint64_t seed);
  ModelGraph(ModelGraph&&) = default;
  ModelGraph& operator=(ModelGraph&&) = default;

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }

  // Builds the graph on an existing tape; input must be [N,3,S,S].
  Tape::Id forward_on(Tape& t, Tape::Id input, std::vector<StageTrace>* trace = nullptr);

  // Convenience single forward returning class probabilities [N,num_classes].
  Tensor forward(const Tensor& batch, Mode mode);

  std::vector<StageTrace> forward_trace(const Tensor& batch);

  // First `count` channel activations at the tap for one image, each min-max
  // normalized to [0,1] (constant maps collapse to 0).
  std::vector<Tensor> feature_maps(const Tensor& image, FeatureTap tap, int count);
  int tap_channels(FeatureTap tap) const;

  void save(const std::string& path) const;
  static ModelGraph load(const std::string& path);

  int scaled(int channels) const;

 private:
  ModelConfig cfg_;
  ParamRegistry params_;
  Conv2dLayer stem_conv_;
  std::vector<ResidualBlock> res_;
  std::vector<AttentionBlock> att_;
  DenseLayer fc1_, fc2_;
};

}  // namespace ranet
