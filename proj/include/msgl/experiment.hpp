// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msgl/gradcheck.hpp"
#include "msgl/model.hpp"
#include "msgl/training.hpp"

namespace msgl {

struct SplitSpec {
  std::vector<std::string> train_videos;  // empty: every remaining video
  std::vector<std::string> val_videos;    // empty: dataset default rule
  std::vector<std::string> test_videos;   // empty: dataset default rule
};

struct ExperimentConfig {
  std::string dataset = "ratsi";  // ratsi | calms21
  std::filesystem::path root;
  SplitSpec split;
  Variant variant = Variant::full;
  ModelConfig model;
  TrainConfig train;
  std::size_t stride = 1;
  std::uint64_t seed = 42;
  std::filesystem::path out = "runs/default";
  std::optional<std::filesystem::path> expected_counts;

  /// Throws ConfigError for unknown datasets, overlapping splits and bad
  /// numeric settings.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Resolved video lists for one experiment.
struct ResolvedSplits {
  std::vector<VideoRecord> train;
  std::vector<VideoRecord> val;
  std::vector<VideoRecord> test;
  std::vector<std::string> kept_classes;
};

/// Loads the dataset and assigns videos. RatSI defaults: everything except
/// test and validation trains. CalMS21: the official test file is the test
/// split; without explicit validation videos every tenth training video
/// (sorted by id, starting with the tenth) is held out for validation.
ResolvedSplits resolve_splits(const ExperimentConfig& cfg);

/// The model settings actually trained: variant, window and the data's
/// dimensionality and class count applied.
ModelConfig effective_model_config(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t num_classes);

// Output layout under cfg.out
inline constexpr const char* kArtifactsFile = "artifacts.json";
inline constexpr const char* kSplitsFile = "splits.json";
inline constexpr const char* kBestCheckpoint = "best.ckpt";
inline constexpr const char* kLastCheckpoint = "last.ckpt";
inline constexpr const char* kTrainLogFile = "train_log.csv";
inline constexpr const char* kEvalDir = "eval";

void cmd_prepare(const ExperimentConfig& cfg, std::ostream& log);
void cmd_train(const ExperimentConfig& cfg, std::ostream& log);
/// Returns the directory holding the report files.
std::filesystem::path cmd_evaluate(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                                   bool boundary, std::ostream& log);

struct GradcheckOptions {
  std::uint64_t seed = 7;
  double tolerance = 1e-4;
  double step = kDefaultFiniteStep;
};

struct VariantGradcheck {
  Variant variant = Variant::full;
  GradCheckReport report;
  bool passed() const;
  double tolerance = 1e-4;
};

/// Gradient check of every parameter of each ablation variant at reduced
/// sizes (T=8, D=6, C=3, d=16), in training mode with a fixed dropout mask.
std::vector<VariantGradcheck> run_gradcheck(const GradcheckOptions& opts);
/// Prints the per-variant report; returns true when all variants pass.
bool cmd_gradcheck(const GradcheckOptions& opts, std::ostream& log);

ModelConfig gradcheck_model_config(Variant v);

}  // namespace msgl
