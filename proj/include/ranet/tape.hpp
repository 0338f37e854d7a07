#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ranet/kernels.hpp"
#include "ranet/tensor.hpp"

namespace ranet {

// A named trainable (or tracked, e.g. batch-norm running stats) tensor.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool grad_valid = false;  // set once a backward pass has populated grad
};

// Owns all parameters of a model, keyed by unique name, in creation order.
class ParamRegistry {
 public:
  Parameter& create(const std::string& name, std::vector<int> shape, bool trainable = true);
  Parameter* find(const std::string& name);
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  std::size_t total_count() const;  // sum of numel over every entry

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Mode { train, eval };

// Batch-norm layer state threaded through the tape op. Running stats are
// mutated in place during train-mode forward.
struct BatchNormState {
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
  bool* stats_ready = nullptr;
  float eps = 1e-5f;
  float momentum = 0.99f;
};

// Records a forward computation and replays it in reverse for gradients.
// Single-owner: must not be shared across threads while recording or during
// backward. Nodes are appended in execution order, so every node's inputs
// precede it.
class Tape {
 public:
  using Id = int;

  explicit Tape(Mode mode) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Mode mode() const { return mode_; }
  std::size_t size() const { return nodes_.size(); }

  Id leaf(Tensor value, bool needs_grad = false);
  Id param(Parameter& p);  // cached: binding the same parameter twice returns the same node

  Id conv2d(Id x, Id w, Id b, int stride, kernels::Padding pad);
  Id maxpool2d(Id x, int window, int stride);
  Id avgpool2d(Id x, int window);
  Id batchnorm2d(Id x, Id gamma, Id beta, const BatchNormState& state);
  Id relu(Id x);
  Id sigmoid(Id x);
  Id softmax(Id x);
  Id upsample_bilinear2x(Id x);
  Id resize_bilinear(Id x, int out_h, int out_w);
  Id dense(Id x, Id w, Id b);
  Id add(Id a, Id b);
  Id mul(Id a, Id b);
  Id add_scalar(Id a, float s);
  Id flatten(Id x);  // [N,...] -> [N, rest]
  Id sum(Id x);      // scalar
  Id bce_loss(Id probs, Id targets);

  const Tensor& value(Id id) const { return node(id).value; }
  // Empty tensor when the node received no gradient.
  const Tensor& grad(Id id) const { return node(id).grad; }

  // Populates grads of every bound Parameter; parameters with no path to the
  // loss get a zero gradient. The loss must be scalar.
  void backward(Id loss);

  // Number of times the reverse sweep has processed this node (diagnostics).
  int visit_count(Id id) const { return node(id).visits; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape&)> back;
    int visits = 0;
  };

  Node& node(Id id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& node(Id id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  Id emit(Tensor value, bool needs_grad, std::function<void(Tape&)> back);
  bool wants(Id id) const { return node(id).needs_grad; }
  // Gradient accumulator for a node, or nullptr when it does not need one.
  Tensor* sink(Id id);

  Mode mode_;
  std::vector<Node> nodes_;
  std::vector<std::pair<Parameter*, Id>> bound_;
  std::unordered_map<const Parameter*, Id> bound_index_;
};

}  // namespace ranet
