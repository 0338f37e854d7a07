#pragma once

#include <optional>
#include <string>

#include "ranet/rng.hpp"
#include "ranet/tape.hpp"

namespace ranet {

// Uniform Xavier/Glorot initialization: bound = sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(Tensor& w, int fan_in, int fan_out, Rng& rng);

// Parameter-owning layers. Construction registers parameters under
// `prefix.{weight,bias,...}` and initializes them (Xavier weights, zero
// biases, identity batch-norm).

struct Conv2dLayer {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  int stride = 1;
  kernels::Padding pad = kernels::Padding::same;

  Conv2dLayer() = default;
  Conv2dLayer(ParamRegistry& reg, const std::string& prefix, int in_ch, int out_ch, int kernel, int stride,
              kernels::Padding pad, Rng& rng);
  Tape::Id forward(Tape& t, Tape::Id x) const;
};

struct BatchNorm2dLayer {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  Parameter* running_mean = nullptr;
  Parameter* running_var = nullptr;
  bool stats_ready = false;
  float eps = 1e-5f;
  float momentum = 0.99f;

  BatchNorm2dLayer() = default;
  // identity_stats: start running stats at mean 0 / var 1, making eval-mode
  // forward legal before any training update.
  BatchNorm2dLayer(ParamRegistry& reg, const std::string& prefix, int channels, bool identity_stats);
  Tape::Id forward(Tape& t, Tape::Id x);
};

struct DenseLayer {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  DenseLayer() = default;
  DenseLayer(ParamRegistry& reg, const std::string& prefix, int in_dim, int out_dim, Rng& rng);
  Tape::Id forward(Tape& t, Tape::Id x) const;
};

// Full pre-activation bottleneck: [relu -> batchnorm -> conv] three times
// (1x1 to mid, 3x3 to mid carrying the stride, 1x1 to out) plus a shortcut.
// The shortcut is the identity when in == out and stride == 1, otherwise a
// strided 1x1 projection.
struct ResidualBlockSpec {
  int in_channels = 0;
  int mid_channels = 0;
  int out_channels = 0;
  int stride = 1;
};

class ResidualBlock {
 public:
  ResidualBlock(ParamRegistry& reg, const std::string& prefix, ResidualBlockSpec spec, Rng& rng);
  Tape::Id forward(Tape& t, Tape::Id x);
  const ResidualBlockSpec& spec() const { return spec_; }

 private:
  ResidualBlockSpec spec_;
  BatchNorm2dLayer bn1_, bn2_, bn3_;
  Conv2dLayer conv1_, conv2_, conv3_;
  std::optional<Conv2dLayer> shortcut_;
};

// Soft-attention unit: trunk = two stacked channel-preserving residual
// blocks; mask = encoder (maxpool 2x2 -> residual -> maxpool 2x2 -> residual)
// then a decoder that bilinearly resizes back through the recorded encoder
// sizes, two 1x1 convolutions, and a sigmoid. Output is (1 + mask) * trunk.
struct AttentionBlockSpec {
  int channels = 0;
  int spatial = 0;  // input height == width
};

// Diagnostic override for the mask branch; `none` is the learned mask.
enum class MaskStub { none, zeros, ones };

class AttentionBlock {
 public:
  AttentionBlock(ParamRegistry& reg, const std::string& prefix, AttentionBlockSpec spec, Rng& rng);
  Tape::Id forward(Tape& t, Tape::Id x, MaskStub stub = MaskStub::none);
  // Mask branch output (before the 1 + M gate); exposed for inspection.
  Tape::Id mask(Tape& t, Tape::Id x);
  Tape::Id trunk(Tape& t, Tape::Id x);
  const AttentionBlockSpec& spec() const { return spec_; }

 private:
  AttentionBlockSpec spec_;
  ResidualBlock trunk1_, trunk2_, mask_res1_, mask_res2_;
  Conv2dLayer mask_conv1_, mask_conv2_;
};

}  // namespace ranet
