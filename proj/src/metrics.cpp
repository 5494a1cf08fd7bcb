#include "vapf/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "vapf/errors.hpp"

namespace vapf {

namespace {

void check_sizes(const EvalResult& r) {
  if (r.scores.size() != r.labels.size()) throw MetricError("scores and labels differ in length");
  for (int y : r.labels)
    if (y != 0 && y != 1) throw MetricError("labels must be 0 or 1");
}

void require_both_classes(const EvalResult& r, const char* metric) {
  const auto pos = std::count(r.labels.begin(), r.labels.end(), 1);
  if (pos == 0 || pos == static_cast<long>(r.labels.size())) {
    throw MetricError(std::string(metric) + " is undefined when only one class is present");
  }
}

}  // namespace

ConfusionCounts EvalResult::confusion() const {
  check_sizes(*this);
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      pred ? ++c.tp : ++c.fn;
    } else {
      pred ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

double bacc(const EvalResult& r) {
  require_both_classes(r, "BACC");
  const auto c = r.confusion();
  const double sens = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double spec = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return (sens + spec) / 2.0;
}

double f1(const EvalResult& r) {
  const auto c = r.confusion();
  if (c.tp + c.fp + c.fn == 0) throw MetricError("F1 is undefined without any positives");
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

double auc(const EvalResult& r) {
  check_sizes(r);
  require_both_classes(r, "AUC");
  // Sort once and count, per positive, the negatives strictly below it and
  // the ties; equivalent to the pairwise definition.
  std::vector<std::size_t> order(r.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return r.scores[a] < r.scores[b]; });
  double wins = 0.0;
  std::size_t neg_below = 0;
  std::size_t npos = 0, nneg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos_here = 0, neg_here = 0;
    while (j < order.size() && r.scores[order[j]] == r.scores[order[i]]) {
      r.labels[order[j]] == 1 ? ++pos_here : ++neg_here;
      ++j;
    }
    wins += static_cast<double>(pos_here) *
            (static_cast<double>(neg_below) + 0.5 * static_cast<double>(neg_here));
    neg_below += neg_here;
    npos += pos_here;
    nneg += neg_here;
    i = j;
  }
  return wins / (static_cast<double>(npos) * static_cast<double>(nneg));
}

double auc_trapezoid(const EvalResult& r) {
  check_sizes(r);
  require_both_classes(r, "AUC");
  std::vector<std::size_t> order(r.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Descending score; tied scores form one ROC step.
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
  const double P = static_cast<double>(std::count(r.labels.begin(), r.labels.end(), 1));
  const double N = static_cast<double>(r.labels.size()) - P;
  double area = 0.0;
  double tp = 0.0, fp = 0.0;
  double prev_tpr = 0.0, prev_fpr = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && r.scores[order[j]] == r.scores[order[i]]) {
      r.labels[order[j]] == 1 ? tp += 1.0 : fp += 1.0;
      ++j;
    }
    const double tpr = tp / P, fpr = fp / N;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
    i = j;
  }
  return area;
}

MetricSummary summarize(const EvalResult& r) { return {bacc(r), f1(r), auc(r)}; }

}  // namespace vapf
