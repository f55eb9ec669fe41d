// SPDX-License-Identifier: Apache-2.0
#include "msgl/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "msgl/errors.hpp"

namespace msgl {

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < classes_; ++i) t += at(i, i);
  return t;
}

std::size_t ConfusionMatrix::support(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(truth, j);
  return s;
}

std::size_t ConfusionMatrix::predicted(std::size_t pred) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, pred);
  return s;
}

namespace {

std::size_t checked_label(int v, std::size_t classes, const char* what) {
  if (v < 0 || static_cast<std::size_t>(v) >= classes) {
    throw UsageError(std::string(what) + " label " + std::to_string(v) + " out of range for " +
                     std::to_string(classes) + " classes");
  }
  return static_cast<std::size_t>(v);
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix compute_confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t classes) {
  if (classes == 0) throw UsageError("confusion matrix needs at least one class");
  if (y_true.size() != y_pred.size()) throw UsageError("y_true and y_pred differ in length");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ++cm.at(checked_label(y_true[i], classes, "true"), checked_label(y_pred[i], classes, "predicted"));
  }
  return cm;
}

ClassReport class_report(const ConfusionMatrix& cm) {
  const std::size_t c = cm.classes();
  const std::size_t total = cm.total();
  if (c == 0 || total == 0) throw UsageError("class report needs a non-empty confusion matrix");
  ClassReport r;
  r.per_class.resize(c);
  double recall_sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t tp = cm.at(k, k);
    const std::size_t support = cm.support(k);
    const std::size_t predicted = cm.predicted(k);
    ClassMetrics& m = r.per_class[k];
    m.support = support;
    if (predicted == 0) r.warnings.push_back("class " + std::to_string(k) + ": precision undefined, set to 0");
    if (support == 0) r.warnings.push_back("class " + std::to_string(k) + ": recall undefined, set to 0");
    m.precision = ratio(tp, predicted);
    m.recall = ratio(tp, support);
    const double pr = m.precision + m.recall;
    m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
    const double w = static_cast<double>(support) / static_cast<double>(total);
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
    recall_sum += m.recall;
  }
  r.weighted.support = total;
  r.accuracy = ratio(cm.trace(), total);
  // Support-weighted recall is sum_k tp_k / total; use that exact form so it
  // matches accuracy bit for bit rather than up to rounding.
  r.weighted.recall = r.accuracy;
  r.macro_recall = recall_sum / static_cast<double>(c);
  return r;
}

double avg_per_class_accuracy(const ConfusionMatrix& cm) {
  if (cm.classes() == 0) throw UsageError("empty confusion matrix");
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const std::size_t s = cm.support(k);
    if (s == 0) throw UsageError("class " + std::to_string(k) + " has no support");
    sum += ratio(cm.at(k, k), s);
  }
  return sum / static_cast<double>(cm.classes());
}

RocCurve roc_auc(std::span<const int> y_true, std::span<const double> scores, std::size_t classes, std::size_t cls) {
  const std::size_t n = y_true.size();
  if (cls >= classes) throw UsageError("ROC class index out of range");
  if (scores.size() != n * classes) throw DimensionError("score matrix does not match label count");
  std::vector<std::pair<double, bool>> items(n);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool p = checked_label(y_true[i], classes, "true") == cls;
    items[i] = {scores[i * classes + cls], p};
    if (p) ++pos;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    throw UndefinedMetricError("AUC undefined for class " + std::to_string(cls) +
                               ": needs both positive and negative samples");
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  const double inf = std::numeric_limits<double>::infinity();
  curve.points.push_back({inf, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double auc2 = 0.0;  // twice the area, accumulated in counts
  for (std::size_t i = 0; i < n;) {
    const double s = items[i].first;
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < n && items[i].first == s; ++i) (items[i].second ? tp : fp) += 1;
    auc2 += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
    curve.points.push_back({s, ratio(fp, neg), ratio(tp, pos)});
  }
  curve.points.push_back({-inf, 1.0, 1.0});
  curve.auc = auc2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

std::vector<std::optional<std::size_t>> transition_distances(std::span<const std::string> labels) {
  const std::size_t n = labels.size();
  std::vector<std::optional<std::size_t>> dist(n);
  // Forward pass: distance to the latest transition at or before t; backward
  // pass: to the earliest one at or after t.
  std::optional<std::size_t> last;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0 && labels[t] != labels[t - 1]) last = t;
    if (last) dist[t] = t - *last;
  }
  std::optional<std::size_t> next;
  for (std::size_t t = n; t-- > 0;) {
    if (t > 0 && labels[t] != labels[t - 1]) next = t;
    if (next && (!dist[t] || *next - t < *dist[t])) dist[t] = *next - t;
  }
  return dist;
}

BoundaryReport boundary_analysis(std::span<const VideoRecord> videos, std::span<const WindowPrediction> predictions,
                                 std::size_t classes) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < videos.size(); ++i) by_id.emplace(videos[i].video_id, i);

  std::vector<std::vector<std::optional<std::size_t>>> distances(videos.size());
  std::vector<bool> used(videos.size(), false);
  BoundaryReport r;
  r.class_near.resize(classes);
  r.class_far.resize(classes);
  std::map<std::size_t, BoundaryBin> finite;
  BoundaryBin unbounded;
  std::map<std::pair<int, int>, std::size_t> pairs;

  for (const auto& p : predictions) {
    auto it = by_id.find(p.video_id);
    if (it == by_id.end()) throw UsageError("prediction refers to unknown video '" + p.video_id + "'");
    const std::size_t v = it->second;
    const VideoRecord& video = videos[v];
    if (p.end_frame >= video.num_frames()) {
      throw UsageError("prediction frame " + std::to_string(p.end_frame) + " outside video " + p.video_id);
    }
    const std::size_t truth = checked_label(p.truth, classes, "true");
    checked_label(p.predicted, classes, "predicted");
    if (!used[v]) {
      used[v] = true;
      distances[v] = transition_distances(video.labels);
      for (std::size_t t = 1; t < video.num_frames(); ++t) {
        if (video.labels[t] != video.labels[t - 1]) ++r.transitions;
      }
    }
    const bool hit = p.truth == p.predicted;
    const auto d = distances[v][p.end_frame];
    BoundaryBin& bin = d ? finite[*d] : unbounded;
    bin.distance = d;
    ++bin.samples;
    if (hit) ++bin.correct;
    if (!d) continue;
    if (*d == 0) r.at_transition.add(hit);
    if (*d <= kNearTransition) {
      r.near.add(hit);
      r.class_near[truth].add(hit);
      if (!hit) ++pairs[{p.truth, p.predicted}];
    } else if (*d > kFarFromTransition) {
      r.far.add(hit);
      r.class_far[truth].add(hit);
    }
  }
  for (auto& [d, bin] : finite) r.bins.push_back(bin);
  if (unbounded.samples > 0) r.bins.push_back(unbounded);
  r.confused_pairs.assign(pairs.begin(), pairs.end());
  std::stable_sort(r.confused_pairs.begin(), r.confused_pairs.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return r;
}

}  // namespace msgl
