// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msgl/dataset.hpp"
#include "msgl/preprocessing.hpp"

namespace msgl {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return classes_; }
  std::size_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
  std::size_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * classes_ + pred]; }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t support(std::size_t truth) const;
  std::size_t predicted(std::size_t pred) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix compute_confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  bool operator==(const ClassMetrics&) const = default;
};

struct ClassReport {
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  ClassMetrics weighted;  // support = total
  double macro_recall = 0.0;
  std::vector<std::string> warnings;  // zero-denominator notes; not part of equality
};

/// Zero denominators give 0 and add a warning. An all-zero matrix throws.
ClassReport class_report(const ConfusionMatrix& cm);

/// Mean of per-class recalls; every class needs support.
double avg_per_class_accuracy(const ConfusionMatrix& cm);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // thresholds descending, from +inf to -inf
  double auc = 0.0;
};

/// One-vs-rest ROC for class `cls`. `scores` is n x classes row-major.
/// Throws UndefinedMetricError unless the class has positives and negatives.
RocCurve roc_auc(std::span<const int> y_true, std::span<const double> scores, std::size_t classes, std::size_t cls);

/// A test window's prediction placed in its source video.
struct WindowPrediction {
  std::string video_id;
  std::size_t end_frame = 0;
  int truth = 0;
  int predicted = 0;
};

/// Per-frame distance to the nearest transition frame; nullopt when the
/// stream has no transition.
std::vector<std::optional<std::size_t>> transition_distances(std::span<const std::string> labels);

struct BoundaryBin {
  std::optional<std::size_t> distance;  // nullopt: video without transitions
  std::size_t samples = 0;
  std::size_t correct = 0;
  double accuracy() const { return samples == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples); }
  bool operator==(const BoundaryBin&) const = default;
};

struct AccuracyTally {
  std::size_t samples = 0;
  std::size_t correct = 0;
  double accuracy() const { return samples == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples); }
  void add(bool hit) {
    ++samples;
    if (hit) ++correct;
  }
};

inline constexpr std::size_t kNearTransition = 5;
inline constexpr std::size_t kFarFromTransition = 10;

struct BoundaryReport {
  std::vector<BoundaryBin> bins;  // ascending distance, unbounded bin last
  std::size_t transitions = 0;    // over the videos referenced by predictions
  AccuracyTally at_transition;    // distance 0
  AccuracyTally near;             // distance <= 5
  AccuracyTally far;              // distance > 10
  std::vector<AccuracyTally> class_near;  // by true class
  std::vector<AccuracyTally> class_far;
  /// Misclassified near-transition windows as ((true, predicted), count),
  /// most frequent first.
  std::vector<std::pair<std::pair<int, int>, std::size_t>> confused_pairs;
};

/// Distances come from each video's full label stream, so transitions into
/// or out of filtered classes still count.
BoundaryReport boundary_analysis(std::span<const VideoRecord> videos, std::span<const WindowPrediction> predictions,
                                 std::size_t classes);

}  // namespace msgl
