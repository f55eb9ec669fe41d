// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "msgl/model.hpp"
#include "msgl/preprocessing.hpp"

namespace msgl {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  double smoothing = 0.1;
  double plateau_factor = 0.5;
  std::size_t plateau_patience = 5;
  std::size_t early_stop_patience = 25;
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double min_lr = 1e-6;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// -sum_c q_c log softmax(logits)_c with q = (1 - eps) onehot(target) + eps / C.
Tensor label_smoothing_ce(const Tensor& logits, std::size_t target, double smoothing);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(std::span<const NamedTensor> params);

/// One bias-corrected Adam update from the gradients held by each parameter.
void adam_step(std::span<NamedTensor> params, OptimizerState& state, const AdamHyper& hyper, double lr);

/// Halves (by `factor`) the rate once the monitored loss has failed to
/// strictly decrease for more than `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, std::size_t patience, double min_lr);

  double step(double val_loss);
  double lr() const { return lr_; }
  std::size_t bad_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  double factor_;
  std::size_t patience_;
  double min_lr_;
  std::optional<double> best_;
  std::size_t bad_epochs_ = 0;
};

enum class StopDecision { keep_going, stop };

/// Tracks the best validation loss and keeps a snapshot of the matching
/// parameters.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  StopDecision update(double val_loss, const ModelParams& params, std::size_t epoch);
  bool has_snapshot() const { return best_.has_value(); }
  double best_loss() const { return *best_; }
  std::size_t best_epoch() const { return best_epoch_; }
  const ModelParams& snapshot() const { return snapshot_; }
  /// Writes the best-epoch values back into params.
  void restore(ModelParams& params) const;

 private:
  std::size_t patience_;
  std::optional<double> best_;
  std::size_t best_epoch_ = 0;
  std::size_t bad_epochs_ = 0;
  ModelParams snapshot_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  /// `epoch,train_loss,val_loss,val_acc,lr,seconds`
  void write_csv(const std::filesystem::path& path) const;
  /// True when every column except wall time is bit-identical.
  bool same_trajectory(const TrainLog& other) const;
};

struct DatasetScores {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
  std::vector<double> probabilities;  // size x C, row-major
};

/// Eval-mode pass over a dataset: mean smoothed loss, accuracy, predictions
/// and softmax probabilities.
DatasetScores score_dataset(const Model& model, const WindowedDataset& ds, double smoothing);

struct FitResult {
  Model best;
  Model last;
  TrainLog log;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

FitResult fit(const ModelConfig& model_cfg, const WindowedDataset& train, const WindowedDataset& val,
              const TrainConfig& train_cfg);

}  // namespace msgl
