#include "ranet/tape.hpp"

#include <numeric>

#include "ranet/simd.hpp"

namespace ranet {

Parameter& ParamRegistry::create(const std::string& name, std::vector<int> shape, bool trainable) {
  if (index_.count(name) != 0) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(shape);
  p->grad = Tensor(std::move(shape));
  p->trainable = trainable;
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParamRegistry::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

std::size_t ParamRegistry::total_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

Tape::Id Tape::leaf(Tensor value, bool needs_grad) {
  return emit(std::move(value), needs_grad, nullptr);
}

Tape::Id Tape::param(Parameter& p) {
  auto it = bound_index_.find(&p);
  if (it != bound_index_.end()) return it->second;
  const Id id = emit(p.value, mode_ == Mode::train && p.trainable, nullptr);
  bound_.emplace_back(&p, id);
  bound_index_[&p] = id;
  return id;
}

Tape::Id Tape::emit(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
  Node nd;
  nd.value = std::move(value);
  nd.needs_grad = needs_grad;
  if (needs_grad) nd.back = std::move(back);
  nodes_.push_back(std::move(nd));
  return static_cast<Id>(nodes_.size() - 1);
}

Tensor* Tape::sink(Id id) {
  Node& nd = node(id);
  if (!nd.needs_grad) return nullptr;
  if (nd.grad.numel() == 0) nd.grad = Tensor::zeros(nd.value.shape);
  return &nd.grad;
}

void Tape::backward(Id loss) {
  if (node(loss).value.numel() != 1)
    throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_str(node(loss).value.shape));
  for (auto& nd : nodes_) {
    nd.grad = Tensor();
    nd.visits = 0;
  }
  node(loss).grad = Tensor::full(node(loss).value.shape, 1.0f);

  for (Id i = loss; i >= 0; --i) {
    Node& nd = node(i);
    if (nd.grad.numel() == 0) continue;  // no path to the loss
    nd.visits += 1;
    if (nd.back) nd.back(*this);
  }

  for (auto& [p, id] : bound_) {
    const Node& nd = node(id);
    if (nd.grad.numel() == 0)
      p->grad = Tensor::zeros(p->value.shape);
    else
      p->grad = nd.grad;
    p->grad_valid = true;
  }
}

Tape::Id Tape::conv2d(Id x, Id w, Id b, int stride, kernels::Padding pad) {
  Tensor out = kernels::conv2d_forward(value(x), value(w), value(b), stride, pad);
  const bool ng = wants(x) || wants(w) || wants(b);
  if (!ng) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    kernels::conv2d_backward(t.value(x), t.value(w), t.grad(self), stride, pad, t.sink(x), t.sink(w),
                             t.sink(b));
  };
  return self;
}

Tape::Id Tape::maxpool2d(Id x, int window, int stride) {
  auto argmax = std::make_shared<std::vector<int>>();
  Tensor out = kernels::maxpool2d_forward(value(x), window, stride, wants(x) ? argmax.get() : nullptr);
  if (!wants(x)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    kernels::maxpool2d_backward(t.value(x), t.grad(self), *argmax, t.sink(x));
  };
  return self;
}

Tape::Id Tape::avgpool2d(Id x, int window) {
  Tensor out = kernels::avgpool2d_forward(value(x), window);
  if (!wants(x)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    kernels::avgpool2d_backward(t.value(x), t.grad(self), window, t.sink(x));
  };
  return self;
}

Tape::Id Tape::batchnorm2d(Id x, Id gamma, Id beta, const BatchNormState& state) {
  const bool ng = wants(x) || wants(gamma) || wants(beta);
  if (mode_ == Mode::train) {
    auto saved = std::make_shared<kernels::BatchNormSaved>();
    Tensor out = kernels::batchnorm2d_train(value(x), value(gamma), value(beta), *state.running_mean,
                                            *state.running_var, state.eps, state.momentum,
                                            ng ? saved.get() : nullptr);
    *state.stats_ready = true;
    if (!ng) return emit(std::move(out), false, nullptr);
    Id self = emit(std::move(out), true, nullptr);
    node(self).back = [=](Tape& t) {
      kernels::batchnorm2d_train_backward(t.value(x), t.value(gamma), t.grad(self), *saved, t.sink(x),
                                          t.sink(gamma), t.sink(beta));
    };
    return self;
  }
  if (!*state.stats_ready)
    throw std::runtime_error(
        "batchnorm2d eval-mode forward before any training update; initialize running stats explicitly "
        "(mean 0, var 1) or train first");
  Tensor out = kernels::batchnorm2d_eval(value(x), value(gamma), value(beta), *state.running_mean,
                                         *state.running_var, state.eps);
  if (!ng) return emit(std::move(out), false, nullptr);
  // Snapshot the stats: the layer may keep training afterwards.
  auto rm = std::make_shared<Tensor>(*state.running_mean);
  auto rv = std::make_shared<Tensor>(*state.running_var);
  const float eps = state.eps;
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    kernels::batchnorm2d_eval_backward(t.value(x), t.value(gamma), t.grad(self), *rm, *rv, eps, t.sink(x),
                                       t.sink(gamma), t.sink(beta));
  };
  return self;
}

Tape::Id Tape::relu(Id x) {
  Tensor out = kernels::relu_forward(value(x));
  if (!wants(x)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) { kernels::relu_backward(t.value(x), t.grad(self), t.sink(x)); };
  return self;
}

Tape::Id Tape::sigmoid(Id x) {
  Tensor out = kernels::sigmoid_forward(value(x));
  if (!wants(x)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) { kernels::sigmoid_backward(t.value(self), t.grad(self), t.sink(x)); };
  return self;
}

Tape::Id Tape::softmax(Id x) {
  Tensor out = kernels::softmax_forward(value(x));
  if (!wants(x)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) { kernels::softmax_backward(t.value(self), t.grad(self), t.sink(x)); };
  return self;
}

Tape::Id Tape::upsample_bilinear2x(Id x) {
  return resize_bilinear(x, 2 * value(x).dim(2), 2 * value(x).dim(3));
}

Tape::Id Tape::resize_bilinear(Id x, int out_h, int out_w) {
  Tensor out = kernels::resize_bilinear_forward(value(x), out_h, out_w);
  if (!wants(x)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    kernels::resize_bilinear_backward(t.value(x), t.grad(self), t.sink(x));
  };
  return self;
}

Tape::Id Tape::dense(Id x, Id w, Id b) {
  Tensor out = kernels::dense_forward(value(x), value(w), value(b));
  const bool ng = wants(x) || wants(w) || wants(b);
  if (!ng) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    kernels::dense_backward(t.value(x), t.value(w), t.grad(self), t.sink(x), t.sink(w), t.sink(b));
  };
  return self;
}

Tape::Id Tape::add(Id a, Id b) {
  Tensor out = kernels::add_forward(value(a), value(b));
  const bool ng = wants(a) || wants(b);
  if (!ng) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    const Tensor& gy = t.grad(self);
    if (Tensor* ga = t.sink(a)) simd::active().axpy(ga->ptr(), 1.0f, gy.ptr(), gy.numel());
    if (Tensor* gb = t.sink(b)) simd::active().axpy(gb->ptr(), 1.0f, gy.ptr(), gy.numel());
  };
  return self;
}

Tape::Id Tape::mul(Id a, Id b) {
  Tensor out = kernels::mul_forward(value(a), value(b));
  const bool ng = wants(a) || wants(b);
  if (!ng) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    const Tensor& gy = t.grad(self);
    if (Tensor* ga = t.sink(a)) simd::active().fma_acc(ga->ptr(), gy.ptr(), t.value(b).ptr(), gy.numel());
    if (Tensor* gb = t.sink(b)) simd::active().fma_acc(gb->ptr(), gy.ptr(), t.value(a).ptr(), gy.numel());
  };
  return self;
}

Tape::Id Tape::add_scalar(Id a, float s) {
  Tensor out = kernels::add_scalar_forward(value(a), s);
  if (!wants(a)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    const Tensor& gy = t.grad(self);
    if (Tensor* ga = t.sink(a)) simd::active().axpy(ga->ptr(), 1.0f, gy.ptr(), gy.numel());
  };
  return self;
}

Tape::Id Tape::flatten(Id x) {
  const Tensor& v = value(x);
  if (v.ndim() < 2) throw std::invalid_argument("flatten expects at least 2 dims, got " + shape_str(v.shape));
  const int n = v.dim(0);
  const int rest = static_cast<int>(v.numel()) / n;
  Tensor out({n, rest}, v.data);
  if (!wants(x)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    const Tensor& gy = t.grad(self);
    if (Tensor* gx = t.sink(x)) simd::active().axpy(gx->ptr(), 1.0f, gy.ptr(), gy.numel());
  };
  return self;
}

Tape::Id Tape::sum(Id x) {
  const Tensor& v = value(x);
  Tensor out = Tensor::scalar(simd::active().sum(v.ptr(), v.numel()));
  if (!wants(x)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    const float g = t.grad(self).data[0];
    if (Tensor* gx = t.sink(x))
      for (float& e : gx->data) e += g;
  };
  return self;
}

Tape::Id Tape::bce_loss(Id probs, Id targets) {
  Tensor out = Tensor::scalar(kernels::bce_loss_forward(value(probs), value(targets)));
  if (!wants(probs)) return emit(std::move(out), false, nullptr);
  Id self = emit(std::move(out), true, nullptr);
  node(self).back = [=](Tape& t) {
    kernels::bce_loss_backward(t.value(probs), t.value(targets), t.grad(self).data[0], t.sink(probs));
  };
  return self;
}

}  // namespace ranet
