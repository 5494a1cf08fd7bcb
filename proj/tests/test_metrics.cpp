#include <cmath>

#include <gtest/gtest.h>

#include "vapf/errors.hpp"
#include "vapf/metrics.hpp"
#include "vapf/reference.hpp"
#include "vapf/rng.hpp"

using namespace vapf;

namespace {

EvalResult make(std::vector<double> scores, std::vector<int> labels) {
  EvalResult r;
  r.scores = std::move(scores);
  r.labels = std::move(labels);
  return r;
}

}  // namespace

TEST(Metrics, Bacc) {
  EXPECT_EQ(bacc(make({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0})), 1.0);
  EXPECT_EQ(bacc(make({0.9, 0.1, 0.1, 0.1}, {1, 1, 0, 0})), 0.75);
  EXPECT_EQ(bacc(make({0.9, 0.9, 0.9, 0.9}, {1, 1, 0, 0})), 0.5);
  EXPECT_THROW(bacc(make({0.9, 0.1}, {1, 1})), MetricError);
}

TEST(Metrics, F1) {
  EXPECT_EQ(f1(make({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(f1(make({0.9, 0.1, 0.1, 0.1}, {1, 1, 0, 0})), 2.0 / 3.0);
  EXPECT_EQ(f1(make({0.1, 0.1, 0.9, 0.9}, {1, 1, 0, 0})), 0.0);
  EXPECT_THROW(f1(make({0.1, 0.2}, {0, 0})), MetricError);
}

TEST(Metrics, Auc) {
  EXPECT_EQ(auc(make({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1})), 1.0);
  EXPECT_EQ(auc(make({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1})), 0.75);
  EXPECT_EQ(auc(make({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1})), 0.5);
  EXPECT_THROW(auc(make({0.5, 0.6}, {1, 1})), MetricError);
}

TEST(Metrics, ConfusionSumsToCount) {
  const EvalResult r = make({0.1, 0.5, 0.7, 0.49, 0.51}, {0, 1, 0, 1, 1});
  const auto c = r.confusion();
  EXPECT_EQ(c.tp + c.fp + c.tn + c.fn, 5u);
  EXPECT_EQ(c.tp, 2u);  // 0.5 counts as positive
}

TEST(Metrics, AucInvariantUnderMonotoneTransform) {
  Rng rng(1);
  EvalResult r;
  for (int i = 0; i < 60; ++i) {
    r.scores.push_back(rng.uniform());
    r.labels.push_back(i % 3 == 0);
  }
  EvalResult t = r;
  for (auto& s : t.scores) s = std::exp(3.0 * s) - 7.0;
  EXPECT_EQ(auc(r), auc(t));
}

TEST(Metrics, BaccInvariantUnderPermutation) {
  EvalResult r = make({0.9, 0.2, 0.7, 0.4, 0.6, 0.1}, {1, 0, 0, 1, 1, 0});
  EvalResult p = make({0.1, 0.6, 0.9, 0.4, 0.7, 0.2}, {0, 1, 1, 1, 0, 0});
  EXPECT_EQ(bacc(r), bacc(p));
}

TEST(Metrics, PairwiseMatchesTrapezoid) {
  Rng rng(2);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 2 + rng.below(199);
    EvalResult r;
    for (std::size_t i = 0; i < n; ++i) {
      r.labels.push_back(static_cast<int>(rng.below(2)));
      r.scores.push_back(inst % 2 ? rng.uniform() : static_cast<double>(rng.below(5)) / 4.0);
    }
    r.labels[0] = 0;
    r.labels[1] = 1;
    EXPECT_NEAR(auc(r), auc_trapezoid(r), 1e-12);
    EXPECT_NEAR(auc(r), reference::pairwise_auc(r.scores, r.labels), 1e-12);
  }
}

TEST(Metrics, ExhaustiveSmallInstances) {
  const double levels[] = {0.2, 0.5, 0.8};
  for (std::size_t n = 2; n <= 6; ++n) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 3;
    for (std::size_t lm = 0; lm < (std::size_t{1} << n); ++lm) {
      for (std::size_t sm = 0; sm < combos; ++sm) {
        EvalResult e;
        std::size_t code = sm;
        for (std::size_t i = 0; i < n; ++i) {
          e.labels.push_back(static_cast<int>((lm >> i) & 1U));
          e.scores.push_back(levels[code % 3]);
          code /= 3;
        }
        const auto c = reference::count_confusion(e.scores, e.labels);
        const std::size_t pos = c.tp + c.fn, neg = c.tn + c.fp;
        if (pos == 0 || neg == 0) continue;
        const double tpr = static_cast<double>(c.tp) / static_cast<double>(pos);
        const double tnr = static_cast<double>(c.tn) / static_cast<double>(neg);
        ASSERT_EQ(bacc(e), (tpr + tnr) / 2.0);
        if (c.tp + c.fp + c.fn > 0) {
          ASSERT_EQ(f1(e), static_cast<double>(c.tp) /
                               (static_cast<double>(c.tp) + 0.5 * static_cast<double>(c.fp + c.fn)));
        }
      }
    }
  }
}
