#include "ranet/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ranet::metrics {

ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels,
                          int positive_class) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(labels.size()) + " labels");
  if (predictions.empty()) throw std::invalid_argument("confusion: need at least one sample");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred_pos = predictions[i] == positive_class;
    const bool is_pos = labels[i] == positive_class;
    if (pred_pos && is_pos) ++c.tp;
    else if (pred_pos && !is_pos) ++c.fp;
    else if (!pred_pos && is_pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Summary summarize(const ConfusionCounts& c) {
  Summary s;
  auto ratio = [](long num, long den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  s.sensitivity = ratio(c.tp, c.tp + c.fn);
  s.recall = s.sensitivity;
  s.specificity = ratio(c.tn, c.tn + c.fp);
  s.precision = ratio(c.tp, c.tp + c.fp);
  s.accuracy = ratio(c.tp + c.tn, c.total());
  return s;
}

std::optional<double> auc(const std::vector<double>& scores, const std::vector<int>& labels,
                          int positive_class) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: " + std::to_string(scores.size()) + " scores vs " +
                                std::to_string(labels.size()) + " labels");
  long pos = 0, neg = 0;
  for (int l : labels) (l == positive_class ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups; rank values are integers or half-integers, so
  // the accumulation below is exact in double.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == positive_class) rank_sum_pos += midrank;
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::optional<double> auc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels,
                                    int positive_class) {
  long pos = 0, neg = 0;
  for (int l : labels) (l == positive_class ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Sweep thresholds from high to low; accumulate 2x the trapezoid area in
  // integer counts (exact in double), divide once at the end.
  double twice_area = 0.0;
  long tp = 0, fp = 0, prev_tp = 0, prev_fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k)
      (labels[order[k]] == positive_class ? tp : fp) += 1;
    twice_area += static_cast<double>(fp - prev_fp) * static_cast<double>(tp + prev_tp);
    prev_tp = tp;
    prev_fp = fp;
    i = j;
  }
  return twice_area / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace ranet::metrics
