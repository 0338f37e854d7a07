#include "ranet/optim.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ranet/image.hpp"

namespace ranet {

void validate(const TrainConfig& c) {
  if (!(c.initial_lr > 0.0f)) throw std::invalid_argument("initial_lr must be positive");
  if (!(c.beta1 > 0.0f && c.beta1 < 1.0f && c.beta2 > 0.0f && c.beta2 < 1.0f))
    throw std::invalid_argument("adam betas must lie in (0,1)");
  if (c.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

double decayed_lr(const TrainConfig& c, long iteration) {
  const double decay = static_cast<double>(c.initial_lr) / static_cast<double>(c.epochs);
  return static_cast<double>(c.initial_lr) / (1.0 + decay * static_cast<double>(iteration));
}

AdamState::AdamState(const ParamRegistry& params, const TrainConfig& c)
    : beta1_(c.beta1), beta2_(c.beta2), eps_(c.adam_eps) {
  for (const auto& p : params.all()) {
    m_.emplace_back(p->trainable ? p->value.numel() : 0, 0.0);
    v_.emplace_back(p->trainable ? p->value.numel() : 0, 0.0);
  }
}

void AdamState::step(ParamRegistry& params, double lr) {
  if (m_.size() != params.all().size())
    throw std::invalid_argument("adam state does not match this parameter registry");
  for (const auto& p : params.all())
    if (p->trainable && !p->grad_valid)
      throw std::runtime_error("adam_step before any backward pass: gradient of " + p->name +
                               " is uninitialized");

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.all().size(); ++i) {
    Parameter& p = *params.all()[i];
    if (!p.trainable) continue;
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t e = 0; e < p.value.numel(); ++e) {
      const double g = static_cast<double>(p.grad.data[e]);
      m[e] = beta1_ * m[e] + (1.0 - beta1_) * g;
      v[e] = beta2_ * v[e] + (1.0 - beta2_) * g * g;
      const double mhat = m[e] / bc1;
      const double vhat = v[e] / bc2;
      p.value.data[e] =
          static_cast<float>(static_cast<double>(p.value.data[e]) - lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

void adam_step(ParamRegistry& params, AdamState& state, double lr) { state.step(params, lr); }

namespace {

Tensor stack_batch(const std::vector<TrainSample>& samples, const std::vector<std::size_t>& idx,
                   std::size_t lo, std::size_t hi, bool targets) {
  const Tensor& first = targets ? samples[idx[lo]].target : samples[idx[lo]].image;
  std::vector<int> shape = first.shape;
  shape.insert(shape.begin(), static_cast<int>(hi - lo));
  Tensor out(shape);
  for (std::size_t k = lo; k < hi; ++k) {
    const Tensor& t = targets ? samples[idx[k]].target : samples[idx[k]].image;
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>((k - lo) * t.numel()));
  }
  return out;
}

int argmax_row(const Tensor& t, int row) {
  const int c = t.dim(1);
  int best = 0;
  for (int j = 1; j < c; ++j)
    if (t.data[static_cast<std::size_t>(row) * c + j] > t.data[static_cast<std::size_t>(row) * c + best])
      best = j;
  return best;
}

}  // namespace

EpochStats train_epoch(ModelGraph& model, const std::vector<TrainSample>& samples, const TrainConfig& c,
                       AdamState& state, int epoch) {
  validate(c);
  if (samples.empty()) throw std::invalid_argument("train_epoch: empty split");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(mix_seed(c.seed, static_cast<std::uint64_t>(epoch), 0x5u));
  shuffle_rng.shuffle(order);

  // Augmented copies; rotation angle is a pure function of
  // (seed, epoch, original sample index).
  std::vector<TrainSample> rotated(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng arng(mix_seed(c.seed, static_cast<std::uint64_t>(epoch), i + 1));
    rotated[i].image = rotate_image(samples[i].image, arng.uniform(-15.0f, 15.0f));
    rotated[i].target = samples[i].target;
  }

  double loss_sum = 0.0;
  long correct = 0;
  for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(c.batch_size)) {
    const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(c.batch_size));
    Tensor batch = stack_batch(rotated, order, lo, hi, false);
    Tensor targets = stack_batch(rotated, order, lo, hi, true);

    Tape tape(Mode::train);
    const Tape::Id probs = model.forward_on(tape, tape.leaf(std::move(batch)));
    const Tape::Id loss = tape.bce_loss(probs, tape.leaf(targets));
    tape.backward(loss);

    const double lr = decayed_lr(c, state.step_count());
    adam_step(model.params(), state, lr);

    loss_sum += static_cast<double>(tape.value(loss).data[0]) * static_cast<double>(hi - lo);
    const Tensor& p = tape.value(probs);
    for (std::size_t k = 0; k < hi - lo; ++k)
      if (argmax_row(p, static_cast<int>(k)) == argmax_row(targets, static_cast<int>(k))) ++correct;
  }

  EpochStats stats;
  stats.mean_loss = loss_sum / static_cast<double>(samples.size());
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return stats;
}

Tensor forward_batched(ModelGraph& model, const std::vector<TrainSample>& samples, int batch_size) {
  if (samples.empty()) throw std::invalid_argument("forward_batched: empty split");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  Tensor all({static_cast<int>(samples.size()), samples[0].target.dim(0)});
  for (std::size_t lo = 0; lo < samples.size(); lo += static_cast<std::size_t>(batch_size)) {
    const std::size_t hi = std::min(samples.size(), lo + static_cast<std::size_t>(batch_size));
    Tensor probs = model.forward(stack_batch(samples, order, lo, hi, false), Mode::eval);
    std::copy(probs.data.begin(), probs.data.end(),
              all.data.begin() + static_cast<std::ptrdiff_t>(lo * static_cast<std::size_t>(probs.dim(1))));
  }
  return all;
}

EpochStats evaluate(ModelGraph& model, const std::vector<TrainSample>& samples, int batch_size) {
  Tensor probs = forward_batched(model, samples, batch_size);
  Tensor targets({static_cast<int>(samples.size()), samples[0].target.dim(0)});
  for (std::size_t i = 0; i < samples.size(); ++i)
    std::copy(samples[i].target.data.begin(), samples[i].target.data.end(),
              targets.data.begin() + static_cast<std::ptrdiff_t>(i * samples[i].target.numel()));

  EpochStats stats;
  stats.mean_loss = static_cast<double>(kernels::bce_loss_forward(probs, targets));
  long correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (argmax_row(probs, static_cast<int>(i)) == argmax_row(targets, static_cast<int>(i))) ++correct;
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return stats;
}

}  // namespace ranet
