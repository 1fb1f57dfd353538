#pragma once

#include <cstdint>
#include <vector>

#include "hfl/tensor.hpp"

namespace hfl {

struct ConfusionMatrix {
  Index num_classes = 0;
  std::vector<std::int64_t> counts;  // row-major (true, predicted)

  std::int64_t& at(Index truth, Index predicted);
  std::int64_t at(Index truth, Index predicted) const;
  std::int64_t total() const;
};

ConfusionMatrix confusion(const std::vector<Index>& truth,
                          const std::vector<Index>& predicted,
                          Index num_classes);

// One-vs-rest counts and the derived ratios for a single class.
// Division-by-zero convention: precision, recall, and F1 are 0 when their
// denominators vanish.
struct ClassMetrics {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  Scalar accuracy = 0.0;
  Scalar precision = 0.0;
  Scalar recall = 0.0;
  Scalar f1 = 0.0;
  Scalar tpr = 0.0;  // == recall
  Scalar fpr = 0.0;
};

ClassMetrics class_metrics_from_counts(std::int64_t tp, std::int64_t fp,
                                       std::int64_t fn, std::int64_t tn);

struct MetricsSummary {
  std::vector<ClassMetrics> per_class;
  ClassMetrics macro;        // arithmetic mean over classes
  Scalar overall_accuracy = 0.0;  // trace / total
};

MetricsSummary metrics(const ConfusionMatrix& cm);

struct RocPoint {
  Scalar threshold = 0.0;
  Scalar fpr = 0.0;
  Scalar tpr = 0.0;
};

// Threshold sweep over the distinct scores (descending, predicted positive
// iff score >= threshold) with a sentinel above the maximum; first point is
// (0,0), last is (1,1). AUC by the trapezoid rule.
struct RocCurve {
  std::vector<RocPoint> points;
  Scalar auc = 0.0;
};

RocCurve roc(const std::vector<Scalar>& scores, const std::vector<Index>& truth,
             Index positive_class);

// argmax per row; ties break toward the smaller class index.
std::vector<Index> argmax_predictions(const Tensor& logits);

}  // namespace hfl
