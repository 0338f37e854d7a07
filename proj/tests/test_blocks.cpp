#include <stdexcept>

#include "doctest.h"
#include "ranet/blocks.hpp"
#include "test_util.hpp"

using namespace ranet;
using test_util::bit_equal;
using test_util::max_abs_diff;
using test_util::random_tensor;

namespace {

void zero_conv_params(ParamRegistry& reg) {
  for (const auto& p : reg.all())
    if (p->name.find("conv") != std::string::npos || p->name.find("shortcut") != std::string::npos)
      std::fill(p->value.data.begin(), p->value.data.end(), 0.0f);
}

}  // namespace

TEST_CASE("zero-weight residual block is the identity in eval mode") {
  ParamRegistry reg;
  Rng rng(1);
  ResidualBlock block(reg, "blk", {8, 8, 8, 1}, rng);
  zero_conv_params(reg);

  Tape t(Mode::eval);
  Tensor x = random_tensor({2, 8, 6, 6}, rng);
  auto out = block.forward(t, t.leaf(x));
  CHECK(bit_equal(t.value(out), x));
}

TEST_CASE("residual block bottleneck shape from the architecture table") {
  ParamRegistry reg;
  Rng rng(2);
  ResidualBlock block(reg, "stage1.res", {32, 32, 128, 1}, rng);
  Tape t(Mode::eval);
  auto out = block.forward(t, t.leaf(random_tensor({1, 32, 56, 56}, rng)));
  CHECK(t.value(out).shape == std::vector<int>{1, 128, 56, 56});
}

TEST_CASE("stride-2 residual block halves the spatial extent via projection shortcut") {
  ParamRegistry reg;
  Rng rng(3);
  ResidualBlock block(reg, "blk", {4, 4, 8, 2}, rng);
  CHECK(reg.find("blk.shortcut.weight") != nullptr);
  Tape t(Mode::eval);
  auto out = block.forward(t, t.leaf(random_tensor({1, 4, 8, 8}, rng)));
  CHECK(t.value(out).shape == std::vector<int>{1, 8, 4, 4});

  ParamRegistry reg2;
  ResidualBlock ident(reg2, "blk", {4, 4, 4, 1}, rng);
  CHECK(reg2.find("blk.shortcut.weight") == nullptr);
}

TEST_CASE("residual block equals the explicit kernel composition") {
  ParamRegistry reg;
  Rng rng(4);
  ResidualBlock block(reg, "b", {3, 4, 8, 2}, rng);
  Tensor x = random_tensor({2, 3, 8, 8}, rng);

  Tape t(Mode::eval);
  auto out = block.forward(t, t.leaf(x));

  auto val = [&](const std::string& n) { return reg.find(n)->value; };
  auto bn_eval = [&](const Tensor& in, const std::string& p) {
    return kernels::batchnorm2d_eval(in, val(p + ".gamma"), val(p + ".beta"), val(p + ".running_mean"),
                                     val(p + ".running_var"), 1e-5f);
  };
  Tensor h = kernels::relu_forward(x);
  h = bn_eval(h, "b.bn1");
  h = kernels::conv2d_forward(h, val("b.conv1.weight"), val("b.conv1.bias"), 1, kernels::Padding::same);
  h = kernels::relu_forward(h);
  h = bn_eval(h, "b.bn2");
  h = kernels::conv2d_forward(h, val("b.conv2.weight"), val("b.conv2.bias"), 2, kernels::Padding::same);
  h = kernels::relu_forward(h);
  h = bn_eval(h, "b.bn3");
  h = kernels::conv2d_forward(h, val("b.conv3.weight"), val("b.conv3.bias"), 1, kernels::Padding::same);
  Tensor sc = kernels::conv2d_forward(x, val("b.shortcut.weight"), val("b.shortcut.bias"), 2,
                                      kernels::Padding::same);
  Tensor want = kernels::add_forward(h, sc);

  CHECK(max_abs_diff(t.value(out), want) < 1e-5f);
}

TEST_CASE("residual block validates its spec and input") {
  ParamRegistry reg;
  Rng rng(5);
  CHECK_THROWS_AS(ResidualBlock(reg, "bad1", {4, 16, 8, 1}, rng), std::invalid_argument);  // mid > out
  CHECK_THROWS_AS(ResidualBlock(reg, "bad2", {4, 4, 8, 3}, rng), std::invalid_argument);   // stride 3

  ParamRegistry reg2;
  ResidualBlock block(reg2, "b", {4, 4, 8, 1}, rng);
  Tape t(Mode::eval);
  auto x = t.leaf(random_tensor({1, 3, 8, 8}, rng));
  CHECK_THROWS_AS(block.forward(t, x), std::invalid_argument);
}

TEST_CASE("attention with a zero mask passes the trunk through bit-exactly") {
  ParamRegistry reg;
  Rng rng(6);
  AttentionBlock att(reg, "att", {8, 8}, rng);
  Tensor x = random_tensor({2, 8, 8, 8}, rng);

  Tape t(Mode::eval);
  auto in = t.leaf(x);
  auto gated = att.forward(t, in, MaskStub::zeros);
  auto trunk = att.trunk(t, in);
  CHECK(bit_equal(t.value(gated), t.value(trunk)));
}

TEST_CASE("attention with an all-ones mask doubles the trunk") {
  ParamRegistry reg;
  Rng rng(7);
  AttentionBlock att(reg, "att", {4, 8}, rng);
  Tensor x = random_tensor({1, 4, 8, 8}, rng);

  Tape t(Mode::eval);
  auto in = t.leaf(x);
  auto gated = att.forward(t, in, MaskStub::ones);
  auto trunk = att.trunk(t, in);
  const Tensor& g = t.value(gated);
  const Tensor& tk = t.value(trunk);
  for (std::size_t i = 0; i < g.numel(); ++i)
    CHECK(std::fabs(g.data[i] - 2.0f * tk.data[i]) <= 1e-6f * (1.0f + std::fabs(tk.data[i])));
}

TEST_CASE("attention preserves shape, including non-multiple-of-4 spatial sizes") {
  Rng rng(8);
  for (int spatial : {56, 14, 6}) {
    CAPTURE(spatial);
    const int channels = spatial == 56 ? 128 : 8;
    ParamRegistry reg;
    AttentionBlock att(reg, "att", {channels, spatial}, rng);
    Tape t(Mode::eval);
    Tensor x = random_tensor({1, channels, spatial, spatial}, rng);
    auto out = att.forward(t, t.leaf(x));
    CHECK(t.value(out).shape == x.shape);
  }
}

TEST_CASE("learned mask values lie strictly inside (0,1)") {
  ParamRegistry reg;
  Rng rng(9);
  AttentionBlock att(reg, "att", {6, 12}, rng);
  Tape t(Mode::eval);
  auto m = att.mask(t, t.leaf(random_tensor({2, 6, 12, 12}, rng)));
  for (float v : t.value(m).data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("gradient reaches the attention block input") {
  ParamRegistry reg;
  Rng rng(10);
  AttentionBlock att(reg, "att", {4, 8}, rng);
  Tape t(Mode::train);
  auto in = t.leaf(random_tensor({1, 4, 8, 8}, rng), true);
  t.backward(t.sum(att.forward(t, in)));
  float norm = 0.0f;
  for (float g : t.grad(in).data) norm += g * g;
  CHECK(norm > 0.0f);
}

TEST_CASE("attention construction and input validation") {
  Rng rng(11);
  ParamRegistry reg;
  CHECK_THROWS_AS(AttentionBlock(reg, "bad", {4, 2}, rng), std::invalid_argument);

  ParamRegistry reg2;
  AttentionBlock att(reg2, "att", {4, 8}, rng);
  Tape t(Mode::eval);
  auto wrong = t.leaf(Tensor::zeros({1, 4, 6, 6}));
  CHECK_THROWS_AS(att.forward(t, wrong), std::invalid_argument);
}
