#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vapf {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Scores and labels of one evaluation, thresholded at `threshold`
/// (score >= threshold predicts the positive class).
struct EvalResult {
  std::vector<double> scores;
  std::vector<int> labels;
  double threshold = 0.5;

  ConfusionCounts confusion() const;
};

/// Mean of sensitivity and specificity. MetricError unless both classes occur.
double bacc(const EvalResult& r);
/// 2TP / (2TP + FP + FN). MetricError when TP + FP + FN == 0.
double f1(const EvalResult& r);
/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. MetricError unless both classes occur.
double auc(const EvalResult& r);
/// Area under the empirical ROC curve by the trapezoid rule.
double auc_trapezoid(const EvalResult& r);

struct MetricSummary {
  double bacc = 0.0, f1 = 0.0, auc = 0.0;
};
MetricSummary summarize(const EvalResult& r);

}  // namespace vapf
