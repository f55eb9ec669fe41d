// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace msgl {

/// Marker for a missing keypoint coordinate inside VideoRecord::frames.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// One recording session: per-frame pose coordinates and behavior labels.
struct VideoRecord {
  std::string video_id;
  std::size_t dims = 0;
  std::vector<double> frames;  // num_frames x dims, row-major, kMissing where absent
  std::vector<std::string> labels;

  std::size_t num_frames() const { return labels.size(); }
  double at(std::size_t frame, std::size_t feature) const { return frames[frame * dims + feature]; }
  std::span<const double> frame(std::size_t t) const { return {frames.data() + t * dims, dims}; }
};

struct DatasetManifest {
  std::string dataset_name;
  std::vector<VideoRecord> videos;
  std::vector<std::string> kept_classes;
  std::vector<std::string> dropped_classes;

  std::size_t dims() const { return videos.empty() ? 0 : videos.front().dims; }
  std::size_t total_frames() const;
  bool is_kept(const std::string& label) const;
  const VideoRecord* find(const std::string& video_id) const;
  /// Frame counts per label, over all videos.
  std::map<std::string, std::size_t> class_counts() const;
};

inline constexpr std::size_t kRatsiDims = 12;
inline constexpr std::size_t kCalms21Dims = 28;

const std::vector<std::string>& ratsi_all_behaviors();
const std::vector<std::string>& ratsi_kept_behaviors();
const std::vector<std::string>& calms21_behaviors();
/// Observation01 .. Observation09
std::vector<std::string> ratsi_video_ids();

// RatSI canonical CSV: header `frame,c0,...,c11,label`, empty field = missing.
VideoRecord read_ratsi_csv(const std::filesystem::path& path, const std::string& video_id);
void write_ratsi_csv(const std::filesystem::path& path, const VideoRecord& video);
/// Reads <root>/ObservationNN.csv for all nine sessions.
DatasetManifest load_ratsi(const std::filesystem::path& root);
/// Same as load_ratsi but limited to the given ids (still validated).
DatasetManifest load_ratsi(const std::filesystem::path& root, std::span<const std::string> video_ids);

// CalMS21 canonical JSON: {video_id: {"keypoints": [[28 numbers|null]...], "labels": [...]}}
std::vector<VideoRecord> read_calms21_json(const std::filesystem::path& path);
void write_calms21_json(const std::filesystem::path& path, std::span<const VideoRecord> videos);

struct Calms21Splits {
  DatasetManifest train;
  DatasetManifest test;
};
/// Reads <root>/train.json and <root>/test.json.
Calms21Splits load_calms21(const std::filesystem::path& root);

/// One row of an expected-counts table. video_id "*" means the whole manifest.
struct ExpectedCount {
  std::string video_id;
  std::string class_name;
  std::size_t count = 0;
};

struct CountMismatch {
  std::string video_id;
  std::string class_name;
  std::size_t expected = 0;
  std::size_t actual = 0;
};

struct ValidationReport {
  std::vector<CountMismatch> mismatches;
  bool ok() const { return mismatches.empty(); }
};

std::vector<ExpectedCount> read_expected_counts(const std::filesystem::path& path);
void write_expected_counts(const std::filesystem::path& path, std::span<const ExpectedCount> rows);
ValidationReport validate_manifest(const DatasetManifest& manifest, std::span<const ExpectedCount> expected);

}  // namespace msgl
