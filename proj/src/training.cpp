// SPDX-License-Identifier: Apache-2.0
#include "msgl/training.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>

#include "msgl/errors.hpp"
#include "msgl/ops.hpp"
#include "text.hpp"

namespace msgl {
namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("smoothing must lie in [0, 1)");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ConfigError("plateau_factor must lie in (0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(min_lr >= 0.0)) throw ConfigError("min_lr must be non-negative");
  if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be at least 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"batch_size", c.batch_size},
                     {"max_epochs", c.max_epochs},
                     {"smoothing", c.smoothing},
                     {"plateau_factor", c.plateau_factor},
                     {"plateau_patience", c.plateau_patience},
                     {"early_stop_patience", c.early_stop_patience},
                     {"seed", c.seed},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"min_lr", c.min_lr}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.lr = j.value("lr", d.lr);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.smoothing = j.value("smoothing", d.smoothing);
  c.plateau_factor = j.value("plateau_factor", d.plateau_factor);
  c.plateau_patience = j.value("plateau_patience", d.plateau_patience);
  c.early_stop_patience = j.value("early_stop_patience", d.early_stop_patience);
  c.seed = j.value("seed", d.seed);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.min_lr = j.value("min_lr", d.min_lr);
}

Tensor label_smoothing_ce(const Tensor& logits, std::size_t target, double smoothing) {
  if (logits.rank() != 1) throw DimensionError("loss expects a vector of logits, got " + shape_to_string(logits.shape()));
  const std::size_t c = logits.numel();
  if (target >= c) {
    throw UsageError("target class " + std::to_string(target) + " out of range for " + std::to_string(c) +
                     " classes");
  }
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("smoothing must lie in [0, 1)");
  std::vector<double> q(c, smoothing / static_cast<double>(c));
  q[target] += 1.0 - smoothing;
  Tensor logp = log_softmax(logits, 0);
  return scale(sum(mul(logp, Tensor::from_data({c}, std::move(q)))), -1.0);
}

OptimizerState make_optimizer_state(std::span<const NamedTensor> params) {
  OptimizerState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.tensor.numel(), 0.0);
    s.second_moment.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adam_step(std::span<NamedTensor> params, OptimizerState& state, const AdamHyper& h, double lr) {
  if (state.first_moment.size() != params.size()) throw UsageError("optimizer state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    auto w = params[k].tensor.mutable_data();
    if (m.size() != w.size()) throw UsageError("optimizer state does not match " + params[k].name);
    if (!params[k].tensor.has_grad()) continue;
    const std::vector<double> g = params[k].tensor.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

PlateauScheduler::PlateauScheduler(double lr, double factor, std::size_t patience, double min_lr)
    : lr_(lr), factor_(factor), patience_(patience), min_lr_(min_lr) {}

double PlateauScheduler::step(double val_loss) {
  if (!best_ || val_loss < *best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (bad_epochs_ > patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    bad_epochs_ = 0;
  }
  return lr_;
}

StopDecision EarlyStopping::update(double val_loss, const ModelParams& params, std::size_t epoch) {
  if (!best_ || val_loss < *best_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    bad_epochs_ = 0;
    snapshot_ = params.clone();
    return StopDecision::keep_going;
  }
  ++bad_epochs_;
  return bad_epochs_ >= patience_ ? StopDecision::stop : StopDecision::keep_going;
}

void EarlyStopping::restore(ModelParams& params) const {
  if (!best_) throw UsageError("no snapshot to restore");
  params.assign_values(snapshot_);
}

void TrainLog::write_csv(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PersistenceError(path.string() + ": cannot open for writing");
  out << "epoch,train_loss,val_loss,val_acc,lr,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << text::format_double(e.train_loss) << ',' << text::format_double(e.val_loss) << ','
        << text::format_double(e.val_acc) << ',' << text::format_double(e.lr) << ','
        << text::format_double(e.seconds) << '\n';
  }
  if (!out) throw PersistenceError(path.string() + ": write failed");
}

bool TrainLog::same_trajectory(const TrainLog& other) const {
  if (epochs.size() != other.epochs.size()) return false;
  auto bits = [](double x) { return std::bit_cast<std::uint64_t>(x); };
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = other.epochs[i];
    if (a.epoch != b.epoch || bits(a.train_loss) != bits(b.train_loss) || bits(a.val_loss) != bits(b.val_loss) ||
        bits(a.val_acc) != bits(b.val_acc) || bits(a.lr) != bits(b.lr)) {
      return false;
    }
  }
  return true;
}

DatasetScores score_dataset(const Model& model, const WindowedDataset& ds, double smoothing) {
  NoGradGuard no_grad;
  const std::size_t c = model.config.num_classes;
  DatasetScores s;
  s.predictions.reserve(ds.size());
  s.probabilities.reserve(ds.size() * c);
  std::size_t correct = 0;
  double loss_sum = 0.0;
  const ForwardContext ctx{false, nullptr};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Tensor logits = classify(model.params, model.config, ds.window_tensor(i), ctx);
    const auto label = static_cast<std::size_t>(ds.labels()[i]);
    loss_sum += label_smoothing_ce(logits, label, smoothing).item();
    Tensor probs = softmax(logits, 0);
    const auto p = probs.data();
    s.probabilities.insert(s.probabilities.end(), p.begin(), p.end());
    const std::size_t pred = argmax(logits.data());
    s.predictions.push_back(static_cast<int>(pred));
    if (pred == label) ++correct;
  }
  if (!ds.empty()) {
    s.loss = loss_sum / static_cast<double>(ds.size());
    s.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
  }
  return s;
}

FitResult fit(const ModelConfig& model_cfg, const WindowedDataset& train, const WindowedDataset& val,
              const TrainConfig& cfg) {
  model_cfg.validate();
  cfg.validate();
  if (train.empty()) throw UsageError("training set is empty");
  if (val.empty()) throw UsageError("validation set is empty");
  if (train.window() != model_cfg.window || train.dims() != model_cfg.input_dim) {
    throw DimensionError("training windows are " + std::to_string(train.window()) + "x" +
                         std::to_string(train.dims()) + ", model expects " + std::to_string(model_cfg.window) + "x" +
                         std::to_string(model_cfg.input_dim));
  }
  for (int y : train.labels()) {
    if (y < 0 || static_cast<std::size_t>(y) >= model_cfg.num_classes) {
      throw UsageError("training label " + std::to_string(y) + " out of range");
    }
  }

  const RngStream root(cfg.seed);
  RngStream init_rng = root.fork(0);
  RngStream shuffle_rng = root.fork(1);
  RngStream dropout_rng = root.fork(2);

  Model model{model_cfg, init_params(model_cfg, init_rng)};
  OptimizerState opt = make_optimizer_state(model.params.entries());
  const AdamHyper hyper{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  PlateauScheduler scheduler(cfg.lr, cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr);
  EarlyStopping stopper(cfg.early_stop_patience);
  FitResult result;
  const ForwardContext ctx{true, &dropout_rng};

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = scheduler.lr();
    double loss_sum = 0.0;
    for (const Batch& batch : batch_iter(train, cfg.batch_size, true, shuffle_rng)) {
      model.params.zero_grad();
      const double inv_b = 1.0 / static_cast<double>(batch.indices.size());
      for (std::size_t k = 0; k < batch.indices.size(); ++k) {
        Tensor logits = classify(model.params, model.config, train.window_tensor(batch.indices[k]), ctx);
        Tensor loss = label_smoothing_ce(logits, static_cast<std::size_t>(batch.labels[k]), cfg.smoothing);
        loss_sum += loss.item();
        scale(loss, inv_b).backward();
      }
      adam_step(model.params.entries(), opt, hyper, lr);
    }
    const DatasetScores v = score_dataset(model, val, cfg.smoothing);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(
        {epoch, loss_sum / static_cast<double>(train.size()), v.loss, v.accuracy, lr, seconds});
    scheduler.step(v.loss);
    if (stopper.update(v.loss, model.params, epoch) == StopDecision::stop) {
      result.stopped_early = true;
      break;
    }
  }

  result.last = Model{model_cfg, model.params.clone()};
  stopper.restore(model.params);
  result.best = std::move(model);
  result.best_epoch = stopper.best_epoch();
  return result;
}

}  // namespace msgl
