#include "ranet/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace ranet {

void xavier_uniform(Tensor& w, int fan_in, int fan_out, Rng& rng) {
  const float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  for (float& v : w.data) v = rng.uniform(-bound, bound);
}

Conv2dLayer::Conv2dLayer(ParamRegistry& reg, const std::string& prefix, int in_ch, int out_ch, int kernel,
                         int stride_, kernels::Padding pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
  weight = &reg.create(prefix + ".weight", {out_ch, in_ch, kernel, kernel});
  bias = &reg.create(prefix + ".bias", {out_ch});
  xavier_uniform(weight->value, in_ch * kernel * kernel, out_ch * kernel * kernel, rng);
}

Tape::Id Conv2dLayer::forward(Tape& t, Tape::Id x) const {
  return t.conv2d(x, t.param(*weight), t.param(*bias), stride, pad);
}

BatchNorm2dLayer::BatchNorm2dLayer(ParamRegistry& reg, const std::string& prefix, int channels,
                                   bool identity_stats) {
  gamma = &reg.create(prefix + ".gamma", {channels});
  beta = &reg.create(prefix + ".beta", {channels});
  running_mean = &reg.create(prefix + ".running_mean", {channels}, /*trainable=*/false);
  running_var = &reg.create(prefix + ".running_var", {channels}, /*trainable=*/false);
  std::fill(gamma->value.data.begin(), gamma->value.data.end(), 1.0f);
  if (identity_stats) {
    std::fill(running_var->value.data.begin(), running_var->value.data.end(), 1.0f);
    stats_ready = true;
  }
}

Tape::Id BatchNorm2dLayer::forward(Tape& t, Tape::Id x) {
  BatchNormState st{&running_mean->value, &running_var->value, &stats_ready, eps, momentum};
  return t.batchnorm2d(x, t.param(*gamma), t.param(*beta), st);
}

DenseLayer::DenseLayer(ParamRegistry& reg, const std::string& prefix, int in_dim, int out_dim, Rng& rng) {
  weight = &reg.create(prefix + ".weight", {in_dim, out_dim});
  bias = &reg.create(prefix + ".bias", {out_dim});
  xavier_uniform(weight->value, in_dim, out_dim, rng);
}

Tape::Id DenseLayer::forward(Tape& t, Tape::Id x) const {
  return t.dense(x, t.param(*weight), t.param(*bias));
}

ResidualBlock::ResidualBlock(ParamRegistry& reg, const std::string& prefix, ResidualBlockSpec spec, Rng& rng)
    : spec_(spec) {
  if (spec.mid_channels > spec.out_channels)
    throw std::invalid_argument(prefix + ": bottleneck requires mid_channels <= out_channels, got " +
                                std::to_string(spec.mid_channels) + " > " + std::to_string(spec.out_channels));
  if (spec.stride != 1 && spec.stride != 2)
    throw std::invalid_argument(prefix + ": stride must be 1 or 2, got " + std::to_string(spec.stride));

  bn1_ = BatchNorm2dLayer(reg, prefix + ".bn1", spec.in_channels, true);
  conv1_ = Conv2dLayer(reg, prefix + ".conv1", spec.in_channels, spec.mid_channels, 1, 1,
                       kernels::Padding::same, rng);
  bn2_ = BatchNorm2dLayer(reg, prefix + ".bn2", spec.mid_channels, true);
  conv2_ = Conv2dLayer(reg, prefix + ".conv2", spec.mid_channels, spec.mid_channels, 3, spec.stride,
                       kernels::Padding::same, rng);
  bn3_ = BatchNorm2dLayer(reg, prefix + ".bn3", spec.mid_channels, true);
  conv3_ = Conv2dLayer(reg, prefix + ".conv3", spec.mid_channels, spec.out_channels, 1, 1,
                       kernels::Padding::same, rng);
  if (spec.in_channels != spec.out_channels || spec.stride != 1)
    shortcut_ = Conv2dLayer(reg, prefix + ".shortcut", spec.in_channels, spec.out_channels, 1, spec.stride,
                            kernels::Padding::same, rng);
}

Tape::Id ResidualBlock::forward(Tape& t, Tape::Id x) {
  if (t.value(x).dim(1) != spec_.in_channels)
    throw std::invalid_argument("residual block expects " + std::to_string(spec_.in_channels) +
                                " input channels, got " + shape_str(t.value(x).shape));
  Tape::Id h = conv1_.forward(t, bn1_.forward(t, t.relu(x)));
  h = conv2_.forward(t, bn2_.forward(t, t.relu(h)));
  h = conv3_.forward(t, bn3_.forward(t, t.relu(h)));
  const Tape::Id sc = shortcut_ ? shortcut_->forward(t, x) : x;
  return t.add(h, sc);
}

AttentionBlock::AttentionBlock(ParamRegistry& reg, const std::string& prefix, AttentionBlockSpec spec,
                               Rng& rng)
    : spec_(spec),
      trunk1_(reg, prefix + ".trunk1", {spec.channels, spec.channels, spec.channels, 1}, rng),
      trunk2_(reg, prefix + ".trunk2", {spec.channels, spec.channels, spec.channels, 1}, rng),
      mask_res1_(reg, prefix + ".mask.res1", {spec.channels, spec.channels, spec.channels, 1}, rng),
      mask_res2_(reg, prefix + ".mask.res2", {spec.channels, spec.channels, spec.channels, 1}, rng),
      mask_conv1_(reg, prefix + ".mask.conv1", spec.channels, spec.channels, 1, 1, kernels::Padding::same,
                  rng),
      mask_conv2_(reg, prefix + ".mask.conv2", spec.channels, spec.channels, 1, 1, kernels::Padding::same,
                  rng) {
  if (spec.spatial < 4)
    throw std::invalid_argument(prefix +
                                ": attention needs spatial extent >= 4 for two downsampling levels, got " +
                                std::to_string(spec.spatial));
}

Tape::Id AttentionBlock::trunk(Tape& t, Tape::Id x) { return trunk2_.forward(t, trunk1_.forward(t, x)); }

Tape::Id AttentionBlock::mask(Tape& t, Tape::Id x) {
  const int h0 = t.value(x).dim(2), w0 = t.value(x).dim(3);
  Tape::Id m = t.maxpool2d(x, 2, 2);
  const int h1 = t.value(m).dim(2), w1 = t.value(m).dim(3);
  m = mask_res1_.forward(t, m);
  m = t.maxpool2d(m, 2, 2);
  m = mask_res2_.forward(t, m);
  m = t.resize_bilinear(m, h1, w1);
  m = t.resize_bilinear(m, h0, w0);
  m = mask_conv1_.forward(t, m);
  m = mask_conv2_.forward(t, m);
  return t.sigmoid(m);
}

Tape::Id AttentionBlock::forward(Tape& t, Tape::Id x, MaskStub stub) {
  const Tensor& v = t.value(x);
  if (v.dim(1) != spec_.channels || v.dim(2) != spec_.spatial || v.dim(3) != spec_.spatial)
    throw std::invalid_argument("attention block expects [N," + std::to_string(spec_.channels) + "," +
                                std::to_string(spec_.spatial) + "," + std::to_string(spec_.spatial) +
                                "], got " + shape_str(v.shape));
  const Tape::Id tk = trunk(t, x);
  Tape::Id m;
  switch (stub) {
    case MaskStub::zeros:
      m = t.leaf(Tensor::zeros(t.value(tk).shape));
      break;
    case MaskStub::ones:
      m = t.leaf(Tensor::full(t.value(tk).shape, 1.0f));
      break;
    default:
      m = mask(t, x);
      break;
  }
  return t.mul(t.add_scalar(m, 1.0f), tk);
}

}  // namespace ranet
