// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "msgl/dataset.hpp"
#include "msgl/rng.hpp"
#include "msgl/tensor.hpp"

namespace msgl {

/// Per-feature training means used to fill missing coordinates.
struct ImputerState {
  std::vector<double> means;
  bool operator==(const ImputerState&) const = default;
};

/// Per-feature training mean / population standard deviation.
struct ScalerState {
  std::vector<double> mu;
  std::vector<double> sigma;
  bool operator==(const ScalerState&) const = default;
};

/// Class names in lexicographic order; index = position.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  /// Throws UsageError for a name outside the map.
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const;

  bool operator==(const LabelMap&) const = default;

 private:
  std::vector<std::string> names_;
};

ImputerState fit_imputer(std::span<const VideoRecord> train_videos);
std::vector<VideoRecord> apply_imputer(const ImputerState& state, std::span<const VideoRecord> videos);

/// Expects imputed videos; zero-variance features get sigma = 1.
ScalerState fit_scaler(std::span<const VideoRecord> train_videos);
std::vector<VideoRecord> apply_scaler(const ScalerState& state, std::span<const VideoRecord> videos);

struct WindowOrigin {
  std::string video_id;
  std::size_t end_frame = 0;
  bool operator==(const WindowOrigin&) const = default;
};

/// Windows over standardized videos. Each window is a view (video, end frame)
/// into the stored frame matrices, materialized on demand.
class WindowedDataset {
 public:
  WindowedDataset() = default;
  WindowedDataset(std::vector<VideoRecord> videos, std::size_t window);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t window() const { return window_; }
  std::size_t dims() const { return dims_; }

  const std::vector<int>& labels() const { return labels_; }
  const std::vector<WindowOrigin>& origins() const { return origins_; }
  const std::vector<VideoRecord>& videos() const { return videos_; }

  /// Window i as a [T x D] tensor.
  Tensor window_tensor(std::size_t i) const;
  /// Copies window i into out (T*D values).
  void copy_window(std::size_t i, std::span<double> out) const;

  /// FNV-1a over window values, labels and origins; used to compare runs.
  std::uint64_t content_hash() const;

  void push_window(std::size_t video_index, std::size_t end_frame, int label);

 private:
  std::vector<VideoRecord> videos_;
  std::size_t window_ = 0;
  std::size_t dims_ = 0;
  std::vector<int> labels_;
  std::vector<WindowOrigin> origins_;
  std::vector<std::size_t> video_index_;
};

/// Emits a window ending at every frame T-1, T-1+stride, ... whose label is
/// in the map; videos shorter than T contribute nothing.
WindowedDataset build_windows(std::vector<VideoRecord> videos, const LabelMap& labels, std::size_t window,
                              std::size_t stride = 1);

struct PreprocessArtifacts {
  ImputerState imputer;
  ScalerState scaler;
  LabelMap labels;
  bool operator==(const PreprocessArtifacts&) const = default;
};

inline constexpr int kArtifactSchemaVersion = 1;

void persist_artifacts(const PreprocessArtifacts& artifacts, const std::filesystem::path& path);
PreprocessArtifacts load_artifacts(const std::filesystem::path& path);

/// Fits imputer, scaler and the kept-class label map on the training videos.
PreprocessArtifacts fit_artifacts(std::span<const VideoRecord> train_videos, std::span<const std::string> kept_classes);
/// Imputes, standardizes and windows videos with already-fitted artifacts.
WindowedDataset transform(const PreprocessArtifacts& artifacts, std::span<const VideoRecord> videos,
                          std::size_t window, std::size_t stride = 1);

struct Batch {
  std::vector<std::size_t> indices;
  std::vector<int> labels;
};

/// Splits [0, size) into batches; shuffled by rng when requested. The final
/// partial batch is kept.
std::vector<Batch> batch_iter(const WindowedDataset& ds, std::size_t batch_size, bool shuffle, RngStream& rng);

}  // namespace msgl
