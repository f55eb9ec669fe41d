// SPDX-License-Identifier: Apache-2.0
#include "msgl/preprocessing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "msgl/errors.hpp"

namespace msgl {
namespace fs = std::filesystem;

LabelMap::LabelMap(std::vector<std::string> names) : names_(std::move(names)) {
  std::sort(names_.begin(), names_.end());
  if (std::adjacent_find(names_.begin(), names_.end()) != names_.end()) {
    throw UsageError("label map needs distinct class names");
  }
}

std::size_t LabelMap::index(const std::string& name) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), name);
  if (it == names_.end() || *it != name) throw UsageError("class '" + name + "' is not in the label map");
  return static_cast<std::size_t>(it - names_.begin());
}

bool LabelMap::contains(const std::string& name) const {
  return std::binary_search(names_.begin(), names_.end(), name);
}

namespace {

std::size_t common_dims(std::span<const VideoRecord> videos) {
  if (videos.empty()) throw UsageError("no videos given");
  const std::size_t d = videos.front().dims;
  for (const auto& v : videos) {
    if (v.dims != d) throw DimensionError("videos disagree on pose dimensionality");
  }
  return d;
}

}  // namespace

ImputerState fit_imputer(std::span<const VideoRecord> train_videos) {
  const std::size_t d = common_dims(train_videos);
  std::vector<double> sums(d, 0.0);
  std::vector<std::size_t> counts(d, 0);
  for (const auto& v : train_videos) {
    for (std::size_t t = 0; t < v.num_frames(); ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        const double x = v.at(t, j);
        if (is_missing(x)) continue;
        sums[j] += x;
        ++counts[j];
      }
    }
  }
  ImputerState state;
  state.means.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (counts[j] == 0) {
      throw FitError("feature " + std::to_string(j) + " has no valid observation in the training videos");
    }
    state.means[j] = sums[j] / static_cast<double>(counts[j]);
  }
  return state;
}

std::vector<VideoRecord> apply_imputer(const ImputerState& state, std::span<const VideoRecord> videos) {
  std::vector<VideoRecord> out(videos.begin(), videos.end());
  for (auto& v : out) {
    if (v.dims != state.means.size()) throw DimensionError("imputer fitted for a different dimensionality");
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
      if (is_missing(v.frames[i])) v.frames[i] = state.means[i % v.dims];
    }
  }
  return out;
}

ScalerState fit_scaler(std::span<const VideoRecord> train_videos) {
  const std::size_t d = common_dims(train_videos);
  std::size_t n = 0;
  std::vector<double> sums(d, 0.0);
  for (const auto& v : train_videos) {
    n += v.num_frames();
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
      if (is_missing(v.frames[i])) throw UsageError("fit_scaler needs imputed videos");
      sums[i % d] += v.frames[i];
    }
  }
  if (n == 0) throw FitError("no training frames to fit the scaler");
  ScalerState state;
  state.mu.resize(d);
  state.sigma.resize(d);
  for (std::size_t j = 0; j < d; ++j) state.mu[j] = sums[j] / static_cast<double>(n);
  std::vector<double> sq(d, 0.0);
  for (const auto& v : train_videos) {
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
      const double c = v.frames[i] - state.mu[i % d];
      sq[i % d] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double s = std::sqrt(sq[j] / static_cast<double>(n));
    state.sigma[j] = s > 0.0 ? s : 1.0;
  }
  return state;
}

std::vector<VideoRecord> apply_scaler(const ScalerState& state, std::span<const VideoRecord> videos) {
  std::vector<VideoRecord> out(videos.begin(), videos.end());
  for (auto& v : out) {
    if (v.dims != state.mu.size()) throw DimensionError("scaler fitted for a different dimensionality");
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
      const std::size_t j = i % v.dims;
      v.frames[i] = (v.frames[i] - state.mu[j]) / state.sigma[j];
    }
  }
  return out;
}

WindowedDataset::WindowedDataset(std::vector<VideoRecord> videos, std::size_t window)
    : videos_(std::move(videos)), window_(window) {
  if (window_ == 0) throw ConfigError("window length must be at least 1");
  if (!videos_.empty()) dims_ = common_dims(videos_);
}

void WindowedDataset::push_window(std::size_t video_index, std::size_t end_frame, int label) {
  const auto& v = videos_.at(video_index);
  if (end_frame + 1 < window_ || end_frame >= v.num_frames()) {
    throw UsageError("window ending at frame " + std::to_string(end_frame) + " does not fit video " + v.video_id);
  }
  labels_.push_back(label);
  origins_.push_back({v.video_id, end_frame});
  video_index_.push_back(video_index);
}

void WindowedDataset::copy_window(std::size_t i, std::span<double> out) const {
  const auto& v = videos_[video_index_.at(i)];
  const std::size_t first = origins_[i].end_frame + 1 - window_;
  if (out.size() != window_ * dims_) throw DimensionError("window buffer has the wrong size");
  std::copy_n(v.frames.begin() + static_cast<std::ptrdiff_t>(first * dims_), window_ * dims_, out.begin());
}

Tensor WindowedDataset::window_tensor(std::size_t i) const {
  std::vector<double> buf(window_ * dims_);
  copy_window(i, buf);
  return Tensor::from_data({window_, dims_}, std::move(buf));
}

std::uint64_t WindowedDataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  std::vector<double> buf(window_ * dims_);
  for (std::size_t i = 0; i < size(); ++i) {
    copy_window(i, buf);
    mix_bytes(buf.data(), buf.size() * sizeof(double));
    mix_bytes(&labels_[i], sizeof(int));
    mix_bytes(origins_[i].video_id.data(), origins_[i].video_id.size());
    const std::uint64_t end = origins_[i].end_frame;
    mix_bytes(&end, sizeof(end));
  }
  return h;
}

WindowedDataset build_windows(std::vector<VideoRecord> videos, const LabelMap& labels, std::size_t window,
                              std::size_t stride) {
  if (window == 0) throw ConfigError("window length must be at least 1");
  if (stride == 0) throw ConfigError("window stride must be at least 1");
  WindowedDataset ds(std::move(videos), window);
  const auto& vs = ds.videos();
  for (std::size_t k = 0; k < vs.size(); ++k) {
    const auto& v = vs[k];
    for (std::size_t end = window - 1; end < v.num_frames(); end += stride) {
      const std::string& label = v.labels[end];
      if (!labels.contains(label)) continue;
      ds.push_window(k, end, static_cast<int>(labels.index(label)));
    }
  }
  return ds;
}

void persist_artifacts(const PreprocessArtifacts& a, const fs::path& path) {
  nlohmann::json j;
  j["schema_version"] = kArtifactSchemaVersion;
  j["means"] = a.imputer.means;
  j["mu"] = a.scaler.mu;
  j["sigma"] = a.scaler.sigma;
  j["classes"] = a.labels.names();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PersistenceError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw PersistenceError(path.string() + ": write failed");
}

PreprocessArtifacts load_artifacts(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError(path.string() + ": cannot open artifact file");
  PreprocessArtifacts a;
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("schema_version").get<int>() != kArtifactSchemaVersion) {
      throw PersistenceError(path.string() + ": unsupported schema_version " + j.at("schema_version").dump());
    }
    a.imputer.means = j.at("means").get<std::vector<double>>();
    a.scaler.mu = j.at("mu").get<std::vector<double>>();
    a.scaler.sigma = j.at("sigma").get<std::vector<double>>();
    auto classes = j.at("classes").get<std::vector<std::string>>();
    if (!std::is_sorted(classes.begin(), classes.end())) {
      throw PersistenceError(path.string() + ": classes are not in canonical order");
    }
    a.labels = LabelMap(std::move(classes));
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError(path.string() + ": corrupted artifact file (" + e.what() + ")");
  } catch (const UsageError& e) {
    throw PersistenceError(path.string() + ": " + e.what());
  }
  const std::size_t d = a.imputer.means.size();
  if (d == 0 || a.scaler.mu.size() != d || a.scaler.sigma.size() != d) {
    throw PersistenceError(path.string() + ": feature arrays disagree in length");
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (!(a.scaler.sigma[j] > 0.0)) throw PersistenceError(path.string() + ": non-positive sigma");
  }
  if (a.labels.size() == 0) throw PersistenceError(path.string() + ": empty class list");
  return a;
}

PreprocessArtifacts fit_artifacts(std::span<const VideoRecord> train_videos,
                                  std::span<const std::string> kept_classes) {
  PreprocessArtifacts a;
  a.imputer = fit_imputer(train_videos);
  auto imputed = apply_imputer(a.imputer, train_videos);
  a.scaler = fit_scaler(imputed);
  a.labels = LabelMap(std::vector<std::string>(kept_classes.begin(), kept_classes.end()));
  return a;
}

WindowedDataset transform(const PreprocessArtifacts& a, std::span<const VideoRecord> videos, std::size_t window,
                          std::size_t stride) {
  auto imputed = apply_imputer(a.imputer, videos);
  auto scaled = apply_scaler(a.scaler, imputed);
  return build_windows(std::move(scaled), a.labels, window, stride);
}

std::vector<Batch> batch_iter(const WindowedDataset& ds, std::size_t batch_size, bool shuffle, RngStream& rng) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) rng.shuffle(order);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    const std::size_t stop = std::min(order.size(), start + batch_size);
    b.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(stop));
    for (std::size_t i : b.indices) b.labels.push_back(ds.labels()[i]);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace msgl
