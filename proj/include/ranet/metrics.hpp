#pragma once

#include <optional>
#include <vector>

namespace ranet::metrics {

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels,
                          int positive_class = 0);

// Ratios are absent (not zero) when their denominator vanishes.
struct Summary {
  std::optional<double> sensitivity, specificity, precision, recall, accuracy;
};

// sensitivity = recall = tp/(tp+fn), specificity = tn/(tn+fp),
// precision = tp/(tp+fp), accuracy = (tp+tn)/total.
Summary summarize(const ConfusionCounts& c);

// Probability that a random positive outranks a random negative, ties
// counted one half (computed via midranks; identical to the trapezoidal ROC
// area). Absent when only one class is present.
std::optional<double> auc(const std::vector<double>& scores, const std::vector<int>& labels,
                          int positive_class = 0);

// Trapezoidal area under the ROC curve over all unique thresholds. Agrees
// exactly with auc(); kept as the second algebraic route.
std::optional<double> auc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels,
                                    int positive_class = 0);

}  // namespace ranet::metrics
