#include "hfl/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace hfl {

std::int64_t& ConfusionMatrix::at(Index truth, Index predicted) {
  return counts[truth * num_classes + predicted];
}

std::int64_t ConfusionMatrix::at(Index truth, Index predicted) const {
  return counts[truth * num_classes + predicted];
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion(const std::vector<Index>& truth,
                          const std::vector<Index>& predicted,
                          Index num_classes) {
  if (truth.size() != predicted.size())
    throw ValidationError("label lists differ in length: " +
                          std::to_string(truth.size()) + " vs " +
                          std::to_string(predicted.size()));
  if (num_classes < 1) throw ValidationError("need >= 1 class");
  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 ||
        predicted[i] >= num_classes)
      throw ValidationError("label outside [0," + std::to_string(num_classes) +
                            ") at row " + std::to_string(i));
    ++cm.at(truth[i], predicted[i]);
  }
  return cm;
}

ClassMetrics class_metrics_from_counts(std::int64_t tp, std::int64_t fp,
                                       std::int64_t fn, std::int64_t tn) {
  ClassMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  const Scalar total = static_cast<Scalar>(tp + fp + fn + tn);
  m.accuracy = total > 0 ? static_cast<Scalar>(tp + tn) / total : 0.0;
  m.precision = tp + fp > 0 ? static_cast<Scalar>(tp) / static_cast<Scalar>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<Scalar>(tp) / static_cast<Scalar>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.tpr = m.recall;
  m.fpr = fp + tn > 0 ? static_cast<Scalar>(fp) / static_cast<Scalar>(fp + tn) : 0.0;
  return m;
}

MetricsSummary metrics(const ConfusionMatrix& cm) {
  if (cm.num_classes < 1 ||
      cm.counts.size() !=
          static_cast<std::size_t>(cm.num_classes) * cm.num_classes)
    throw ValidationError("malformed confusion matrix");
  const std::int64_t total = cm.total();
  if (total < 1) throw ValidationError("empty confusion matrix");

  MetricsSummary s;
  std::int64_t diagonal = 0;
  for (Index k = 0; k < cm.num_classes; ++k) {
    std::int64_t tp = cm.at(k, k);
    std::int64_t fp = 0, fn = 0;
    for (Index o = 0; o < cm.num_classes; ++o) {
      if (o == k) continue;
      fp += cm.at(o, k);
      fn += cm.at(k, o);
    }
    const std::int64_t tn = total - tp - fp - fn;
    s.per_class.push_back(class_metrics_from_counts(tp, fp, fn, tn));
    diagonal += tp;
  }
  const Scalar k = static_cast<Scalar>(cm.num_classes);
  for (const auto& m : s.per_class) {
    s.macro.accuracy += m.accuracy / k;
    s.macro.precision += m.precision / k;
    s.macro.recall += m.recall / k;
    s.macro.f1 += m.f1 / k;
    s.macro.tpr += m.tpr / k;
    s.macro.fpr += m.fpr / k;
  }
  s.overall_accuracy = static_cast<Scalar>(diagonal) / static_cast<Scalar>(total);
  return s;
}

RocCurve roc(const std::vector<Scalar>& scores, const std::vector<Index>& truth,
             Index positive_class) {
  if (scores.size() != truth.size())
    throw ValidationError("score and label lists differ in length");
  std::int64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] < 0.0 || scores[i] > 1.0)
      throw ValidationError("score " + std::to_string(scores[i]) +
                            " outside [0,1]");
    (truth[i] == positive_class ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0)
    throw ValidationError("ROC undefined: class " +
                          std::to_string(positive_class) +
                          " needs both positive and negative samples");

  // sweep thresholds from above the maximum score downward
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  curve.points.push_back({scores[order.front()] + 1.0, 0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  Scalar auc = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const Scalar threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (truth[order[i]] == positive_class ? tp : fp) += 1;
      ++i;
    }
    const Scalar tpr = static_cast<Scalar>(tp) / static_cast<Scalar>(pos);
    const Scalar fpr = static_cast<Scalar>(fp) / static_cast<Scalar>(neg);
    const auto& prev = curve.points.back();
    auc += (fpr - prev.fpr) * (tpr + prev.tpr) * 0.5;
    curve.points.push_back({threshold, fpr, tpr});
  }
  curve.auc = auc;
  return curve;
}

std::vector<Index> argmax_predictions(const Tensor& logits) {
  if (logits.rank() != 2)
    throw StructuralError("predictions need {B, K} logits");
  const Index B = logits.dim(0), K = logits.dim(1);
  std::vector<Index> pred(B, 0);
  for (Index i = 0; i < B; ++i) {
    Index best = 0;
    for (Index k = 1; k < K; ++k)
      if (logits.values[i * K + k] > logits.values[i * K + best]) best = k;
    pred[i] = best;
  }
  return pred;
}

}  // namespace hfl
