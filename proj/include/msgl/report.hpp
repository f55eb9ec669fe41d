// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msgl/evaluation.hpp"
#include "msgl/preprocessing.hpp"

namespace msgl {

struct EvalReport {
  std::string dataset;
  std::string split;
  LabelMap labels;
  ConfusionMatrix confusion;
  ClassReport metrics;
  std::vector<std::optional<RocCurve>> roc;  // by class; nullopt when undefined
  std::optional<BoundaryReport> boundary;
};

/// Builds the report from predictions and class probabilities (n x C).
EvalReport make_eval_report(std::string dataset, std::string split, const LabelMap& labels,
                            std::span<const int> y_true, std::span<const int> y_pred,
                            std::span<const double> probabilities);

/// Writes metrics.json, confusion.csv, roc_<class>.csv and, when present,
/// boundary.csv. SVG plots (roc.svg, boundary.svg) are optional.
void emit_report(const EvalReport& report, const std::filesystem::path& dir, bool svg = true);

/// Parsed metrics.json.
struct MetricsFile {
  std::string dataset;
  std::string split;
  std::map<std::string, ClassMetrics> per_class;
  double accuracy = 0.0;
  ClassMetrics weighted;
  double macro_recall = 0.0;
  std::map<std::string, std::optional<double>> auc;
};

MetricsFile load_metrics(const std::filesystem::path& path);

/// File-name-safe form of a class name (spaces become underscores).
std::string class_file_stem(const std::string& name);

}  // namespace msgl
