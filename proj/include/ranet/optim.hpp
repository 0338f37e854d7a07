#pragma once

#include <cstdint>
#include <vector>

#include "ranet/model.hpp"

namespace ranet {

struct TrainConfig {
  float initial_lr = 1e-4f;
  int batch_size = 8;
  int epochs = 100;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& c);

// Per-update inverse decay: lr(i) = initial_lr / (1 + decay * i) with
// decay = initial_lr / epochs.
double decayed_lr(const TrainConfig& c, long iteration);

// Adam moments, kept in double so the update math carries no single-precision
// drift; parameters themselves stay 32-bit.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const ParamRegistry& params, const TrainConfig& c);

  long step_count() const { return t_; }
  bool initialized() const { return !m_.empty(); }
  const std::vector<double>& first_moment(std::size_t param_index) const { return m_[param_index]; }
  const std::vector<double>& second_moment(std::size_t param_index) const { return v_[param_index]; }

  void step(ParamRegistry& params, double lr);

 private:
  std::vector<std::vector<double>> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

// One bias-corrected Adam update over every trainable parameter. Requires a
// completed backward pass (populated gradients).
void adam_step(ParamRegistry& params, AdamState& state, double lr);

struct TrainSample {
  Tensor image;   // [3,S,S]
  Tensor target;  // one-hot [num_classes]
};

struct EpochStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

// Seeded shuffle, per-sample random rotation in [-15,+15] degrees (keyed to
// seed/epoch/sample index), mini-batches with a short final batch, and one
// Adam update per batch at the decayed rate.
EpochStats train_epoch(ModelGraph& model, const std::vector<TrainSample>& samples, const TrainConfig& c,
                       AdamState& state, int epoch);

// Eval-mode probabilities for a sample list, batched; rows align with input order.
Tensor forward_batched(ModelGraph& model, const std::vector<TrainSample>& samples, int batch_size);

// Eval-mode loss and accuracy (no augmentation, running batch-norm stats).
EpochStats evaluate(ModelGraph& model, const std::vector<TrainSample>& samples, int batch_size);

}  // namespace ranet
