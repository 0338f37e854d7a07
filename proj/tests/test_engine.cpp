#include <stdexcept>

#include "doctest.h"
#include "ranet/tape.hpp"
#include "ranet/tensor.hpp"
#include "test_util.hpp"

using namespace ranet;
using test_util::bit_equal;
using test_util::random_tensor;

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3, 4, 5});
  CHECK(t.numel() == 120);
  CHECK(t.all_finite());
  t.at(1, 2, 3, 4) = 7.0f;
  CHECK(t.data.back() == 7.0f);
  CHECK(shape_str(t.shape) == "[2x3x4x5]");
  CHECK_THROWS_AS(Tensor({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0f}), std::invalid_argument);
}

TEST_CASE("parameter registry rejects duplicate names and counts elements") {
  ParamRegistry reg;
  Parameter& a = reg.create("w", {2, 3});
  reg.create("b", {3}, false);
  CHECK(a.grad.shape == a.value.shape);
  CHECK(reg.total_count() == 9);
  CHECK(reg.find("w") == &a);
  CHECK(reg.find("nope") == nullptr);
  CHECK_THROWS_AS(reg.create("w", {1}), std::invalid_argument);
}

TEST_CASE("loss = sum(x) gives an all-ones gradient") {
  Tape t(Mode::train);
  Rng rng(3);
  auto id = t.leaf(random_tensor({2, 3}, rng), true);
  t.backward(t.sum(id));
  for (float g : t.grad(id).data) CHECK(g == 1.0f);
}

TEST_CASE("loss = sum(x*x) gives gradient 2x") {
  Tape t(Mode::train);
  Rng rng(4);
  Tensor x = random_tensor({3, 4}, rng);
  auto id = t.leaf(x, true);
  t.backward(t.sum(t.mul(id, id)));
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(t.grad(id).data[i] == doctest::Approx(2.0f * x.data[i]).epsilon(1e-6));
}

TEST_CASE("backward requires a scalar loss") {
  Tape t(Mode::train);
  auto id = t.leaf(Tensor::zeros({2, 2}), true);
  CHECK_THROWS_AS(t.backward(id), std::invalid_argument);
}

TEST_CASE("backward visits each node exactly once and zeroes unreachable parameters") {
  ParamRegistry reg;
  Parameter& used = reg.create("used", {2, 2});
  Parameter& unused = reg.create("unused", {2, 2});
  used.value = Tensor::full({2, 2}, 2.0f);
  unused.value = Tensor::full({2, 2}, 5.0f);

  Tape t(Mode::train);
  auto u = t.param(used);
  auto v = t.param(unused);  // bound but never feeds the loss
  auto dbl = t.add(u, u);
  auto loss = t.sum(dbl);
  t.backward(loss);

  CHECK(t.visit_count(loss) == 1);
  CHECK(t.visit_count(dbl) == 1);
  CHECK(t.visit_count(u) == 1);
  CHECK(t.visit_count(v) == 0);  // no path to the loss

  CHECK(used.grad_valid);
  CHECK(unused.grad_valid);
  for (float g : used.grad.data) CHECK(g == 2.0f);
  for (float g : unused.grad.data) CHECK(g == 0.0f);
}

TEST_CASE("binding a parameter twice reuses its node") {
  ParamRegistry reg;
  Parameter& p = reg.create("p", {2});
  p.value.data = {1.0f, 2.0f};
  Tape t(Mode::train);
  CHECK(t.param(p) == t.param(p));
  t.backward(t.sum(t.mul(t.param(p), t.param(p))));
  CHECK(p.grad.data[0] == doctest::Approx(2.0f));
  CHECK(p.grad.data[1] == doctest::Approx(4.0f));
}

TEST_CASE("eval-mode parameters do not collect gradients") {
  ParamRegistry reg;
  Parameter& p = reg.create("p", {2});
  Tape t(Mode::eval);
  auto id = t.param(p);
  auto loss = t.sum(id);
  t.backward(loss);
  CHECK(p.grad_valid);
  for (float g : p.grad.data) CHECK(g == 0.0f);
}

TEST_CASE("forward kernels are deterministic across two runs in one build") {
  Rng rng(99);
  Tensor x = random_tensor({1, 2, 6, 6}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  Tensor a = kernels::conv2d_forward(x, w, b, 1, kernels::Padding::same);
  Tensor c = kernels::conv2d_forward(x, w, b, 1, kernels::Padding::same);
  CHECK(bit_equal(a, c));
}

TEST_CASE("kernel outputs stay finite on finite inputs") {
  Rng rng(123);
  Tensor x = random_tensor({2, 3, 8, 8}, rng, -50.0f, 50.0f);
  Tensor w = random_tensor({4, 3, 3, 3}, rng, -5.0f, 5.0f);
  Tensor b = random_tensor({4}, rng);
  CHECK(kernels::conv2d_forward(x, w, b, 2, kernels::Padding::same).all_finite());
  CHECK(kernels::sigmoid_forward(random_tensor({4, 4}, rng, -100.0f, 100.0f)).all_finite());
  CHECK(kernels::softmax_forward(random_tensor({4, 4}, rng, -100.0f, 100.0f)).all_finite());
}
