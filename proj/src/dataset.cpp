// SPDX-License-Identifier: Apache-2.0
#include "msgl/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "msgl/errors.hpp"
#include "text.hpp"

namespace msgl {
namespace fs = std::filesystem;

std::size_t DatasetManifest::total_frames() const {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.num_frames();
  return n;
}

bool DatasetManifest::is_kept(const std::string& label) const {
  return std::find(kept_classes.begin(), kept_classes.end(), label) != kept_classes.end();
}

const VideoRecord* DatasetManifest::find(const std::string& video_id) const {
  for (const auto& v : videos) {
    if (v.video_id == video_id) return &v;
  }
  return nullptr;
}

std::map<std::string, std::size_t> DatasetManifest::class_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& v : videos)
    for (const auto& l : v.labels) ++counts[l];
  return counts;
}

const std::vector<std::string>& ratsi_all_behaviors() {
  static const std::vector<std::string> names = {
      "Solitary", "Approaching",    "Following", "Moving Away", "Social Nose Contact",
      "Allogrooming", "Nape Attacking", "Pinning", "Other", "Uncertain"};
  return names;
}

const std::vector<std::string>& ratsi_kept_behaviors() {
  static const std::vector<std::string> names = {"Solitary", "Approaching", "Following", "Moving Away",
                                                 "Social Nose Contact"};
  return names;
}

const std::vector<std::string>& calms21_behaviors() {
  static const std::vector<std::string> names = {"Attack", "Investigation", "Mount", "Other"};
  return names;
}

std::vector<std::string> ratsi_video_ids() {
  std::vector<std::string> ids;
  for (int i = 1; i <= 9; ++i) ids.push_back("Observation0" + std::to_string(i));
  return ids;
}

namespace {

std::string ratsi_header() {
  std::string h = "frame";
  for (std::size_t j = 0; j < kRatsiDims; ++j) h += ",c" + std::to_string(j);
  return h + ",label";
}

[[noreturn]] void ingest_fail(const fs::path& path, std::size_t line, const std::string& what) {
  throw IngestionError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

VideoRecord read_ratsi_csv(const fs::path& path, const std::string& video_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path.string() + ": cannot open video file");
  const auto& known = ratsi_all_behaviors();

  VideoRecord video;
  video.video_id = video_id;
  video.dims = kRatsiDims;

  std::string line;
  std::size_t line_no = 0;
  long long first_frame = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != ratsi_header()) ingest_fail(path, line_no, "unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    auto fields = text::split(line, ',');
    if (fields.size() != kRatsiDims + 2) {
      ingest_fail(path, line_no, "ragged row with " + std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(kRatsiDims + 2));
    }
    auto frame = text::parse_int(fields[0]);
    if (!frame) ingest_fail(path, line_no, "bad frame index '" + std::string(fields[0]) + "'");
    if (video.labels.empty()) {
      first_frame = *frame;
    } else if (*frame != first_frame + static_cast<long long>(video.labels.size())) {
      ingest_fail(path, line_no, "frame indices are not consecutive");
    }
    for (std::size_t j = 0; j < kRatsiDims; ++j) {
      std::string_view f = fields[1 + j];
      if (f.empty()) {
        video.frames.push_back(kMissing);
        continue;
      }
      auto v = text::parse_double(f);
      if (!v || !std::isfinite(*v)) ingest_fail(path, line_no, "bad coordinate '" + std::string(f) + "'");
      video.frames.push_back(*v);
    }
    std::string label(fields.back());
    if (std::find(known.begin(), known.end(), label) == known.end()) {
      ingest_fail(path, line_no, "unknown label '" + label + "'");
    }
    video.labels.push_back(std::move(label));
  }
  if (line_no == 0) ingest_fail(path, 1, "empty file");
  return video;
}

void write_ratsi_csv(const fs::path& path, const VideoRecord& video) {
  if (video.dims != kRatsiDims) throw UsageError("RatSI records have 12 coordinates per frame");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path.string() + ": cannot open for writing");
  std::string buf = ratsi_header() + "\n";
  for (std::size_t t = 0; t < video.num_frames(); ++t) {
    buf += std::to_string(t);
    for (std::size_t j = 0; j < kRatsiDims; ++j) {
      buf += ',';
      const double v = video.at(t, j);
      if (!is_missing(v)) buf += text::format_double(v);
    }
    buf += ',';
    buf += video.labels[t];
    buf += '\n';
  }
  out << buf;
  if (!out) throw IngestionError(path.string() + ": write failed");
}

DatasetManifest load_ratsi(const fs::path& root) {
  const auto ids = ratsi_video_ids();
  return load_ratsi(root, ids);
}

DatasetManifest load_ratsi(const fs::path& root, std::span<const std::string> video_ids) {
  DatasetManifest m;
  m.dataset_name = "ratsi";
  m.kept_classes = ratsi_kept_behaviors();
  for (const auto& name : ratsi_all_behaviors()) {
    if (!m.is_kept(name)) m.dropped_classes.push_back(name);
  }
  for (const auto& id : video_ids) {
    const fs::path file = root / (id + ".csv");
    if (!fs::exists(file)) throw IngestionError(file.string() + ": missing video file");
    m.videos.push_back(read_ratsi_csv(file, id));
  }
  return m;
}

namespace {

// Streams a CalMS21 split straight into VideoRecords; the DOM would need
// several hundred MB for the full training split.
class Calms21Reader : public nlohmann::json_sax<nlohmann::json> {
 public:
  explicit Calms21Reader(const fs::path& path) : path_(path) {}

  std::vector<VideoRecord> videos;

  bool null() override { return value(kMissing, true); }
  bool boolean(bool) override { return fail("unexpected boolean"); }
  bool number_integer(number_integer_t v) override { return value(static_cast<double>(v), false); }
  bool number_unsigned(number_unsigned_t v) override { return value(static_cast<double>(v), false); }
  bool number_float(number_float_t v, const string_t&) override { return value(v, false); }
  bool binary(binary_t&) override { return fail("unexpected binary value"); }

  bool string(string_t& s) override {
    if (depth_ != 3 || field_ != Field::labels) return fail("unexpected string");
    const auto& known = calms21_behaviors();
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      return fail("unknown label '" + s + "' at frame " + std::to_string(current().labels.size()));
    }
    current().labels.push_back(s);
    return true;
  }

  bool start_object(std::size_t) override {
    ++depth_;
    if (depth_ == 1) return true;
    if (depth_ == 2) {
      saw_keypoints_ = saw_labels_ = false;
      return true;
    }
    return fail("unexpected object");
  }

  bool end_object() override {
    if (depth_ == 2) {
      if (!saw_keypoints_ || !saw_labels_) return fail("video needs both 'keypoints' and 'labels'");
      VideoRecord& v = current();
      const std::size_t rows = v.dims ? v.frames.size() / v.dims : 0;
      if (rows != v.labels.size()) {
        return fail("frame-count/label-count mismatch: " + std::to_string(rows) + " keypoint rows vs " +
                    std::to_string(v.labels.size()) + " labels");
      }
    }
    --depth_;
    return true;
  }

  bool key(string_t& k) override {
    if (depth_ == 1) {
      VideoRecord v;
      v.video_id = k;
      videos.push_back(std::move(v));
      return true;
    }
    if (depth_ == 2) {
      if (k == "keypoints") {
        field_ = Field::keypoints;
        saw_keypoints_ = true;
      } else if (k == "labels") {
        field_ = Field::labels;
        saw_labels_ = true;
      } else {
        return fail("unknown field '" + k + "'");
      }
      return true;
    }
    return fail("unexpected key '" + k + "'");
  }

  bool start_array(std::size_t) override {
    ++depth_;
    if (depth_ == 3) return true;
    if (depth_ == 4 && field_ == Field::keypoints) {
      row_values_ = 0;
      return true;
    }
    return fail("unexpected array");
  }

  bool end_array() override {
    if (depth_ == 4) {
      VideoRecord& v = current();
      if (row_values_ != kCalms21Dims) {
        return fail("keypoint row " + std::to_string(v.frames.size() / kCalms21Dims) + " has " +
                    std::to_string(row_values_) + " values, expected 28");
      }
      v.dims = kCalms21Dims;
    }
    --depth_;
    return true;
  }

  bool parse_error(std::size_t position, const std::string&, const nlohmann::detail::exception& ex) override {
    error_ = path_.string() + ": byte " + std::to_string(position) + ": " + ex.what();
    return false;
  }

  const std::string& error() const { return error_; }

 private:
  enum class Field { keypoints, labels };

  VideoRecord& current() { return videos.back(); }

  bool value(double v, bool missing) {
    if (depth_ != 4 || field_ != Field::keypoints) return fail("unexpected value");
    if (!missing && !std::isfinite(v)) return fail("non-finite coordinate");
    current().frames.push_back(v);
    ++row_values_;
    return true;
  }

  bool fail(const std::string& what) {
    std::string where = videos.empty() ? "" : " (video '" + videos.back().video_id + "')";
    error_ = path_.string() + where + ": " + what;
    return false;
  }

  fs::path path_;
  int depth_ = 0;
  Field field_ = Field::keypoints;
  bool saw_keypoints_ = false;
  bool saw_labels_ = false;
  std::size_t row_values_ = 0;
  std::string error_;
};

}  // namespace

std::vector<VideoRecord> read_calms21_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path.string() + ": cannot open split file");
  Calms21Reader reader(path);
  bool ok = nlohmann::json::sax_parse(in, &reader);
  if (!ok) throw IngestionError(reader.error().empty() ? path.string() + ": malformed JSON" : reader.error());
  for (auto& v : reader.videos) v.dims = kCalms21Dims;
  return std::move(reader.videos);
}

void write_calms21_json(const fs::path& path, std::span<const VideoRecord> videos) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path.string() + ": cannot open for writing");
  std::string buf = "{";
  for (std::size_t k = 0; k < videos.size(); ++k) {
    const auto& v = videos[k];
    if (v.dims != kCalms21Dims) throw UsageError("CalMS21 records have 28 coordinates per frame");
    if (k) buf += ",";
    buf += "\n" + nlohmann::json(v.video_id).dump() + ":{\"keypoints\":[";
    for (std::size_t t = 0; t < v.num_frames(); ++t) {
      buf += t ? ",[" : "[";
      for (std::size_t j = 0; j < v.dims; ++j) {
        if (j) buf += ',';
        const double x = v.at(t, j);
        buf += is_missing(x) ? "null" : text::format_double(x);
      }
      buf += ']';
    }
    buf += "],\"labels\":[";
    for (std::size_t t = 0; t < v.num_frames(); ++t) {
      if (t) buf += ',';
      buf += nlohmann::json(v.labels[t]).dump();
    }
    buf += "]}";
  }
  buf += "\n}\n";
  out << buf;
  if (!out) throw IngestionError(path.string() + ": write failed");
}

Calms21Splits load_calms21(const fs::path& root) {
  Calms21Splits splits;
  for (auto* m : {&splits.train, &splits.test}) {
    m->dataset_name = "calms21";
    m->kept_classes = calms21_behaviors();
  }
  splits.train.videos = read_calms21_json(root / "train.json");
  splits.test.videos = read_calms21_json(root / "test.json");
  return splits;
}

std::vector<ExpectedCount> read_expected_counts(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path.string() + ": cannot open expected-counts file");
  std::vector<ExpectedCount> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "video_id,class,count") ingest_fail(path, line_no, "expected header 'video_id,class,count'");
      continue;
    }
    if (line.empty()) continue;
    auto f = text::split(line, ',');
    if (f.size() != 3) ingest_fail(path, line_no, "expected 3 fields");
    auto count = text::parse_int(f[2]);
    if (!count || *count < 0) ingest_fail(path, line_no, "bad count '" + std::string(f[2]) + "'");
    rows.push_back({std::string(f[0]), std::string(f[1]), static_cast<std::size_t>(*count)});
  }
  return rows;
}

void write_expected_counts(const fs::path& path, std::span<const ExpectedCount> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path.string() + ": cannot open for writing");
  out << "video_id,class,count\n";
  for (const auto& r : rows) out << r.video_id << ',' << r.class_name << ',' << r.count << '\n';
}

ValidationReport validate_manifest(const DatasetManifest& manifest, std::span<const ExpectedCount> expected) {
  ValidationReport report;
  const auto totals = manifest.class_counts();
  std::map<std::string, std::map<std::string, std::size_t>> per_video;
  for (const auto& v : manifest.videos)
    for (const auto& l : v.labels) ++per_video[v.video_id][l];

  for (const auto& row : expected) {
    std::size_t actual = 0;
    if (row.video_id == "*") {
      auto it = totals.find(row.class_name);
      if (it != totals.end()) actual = it->second;
    } else {
      auto vit = per_video.find(row.video_id);
      if (vit != per_video.end()) {
        auto it = vit->second.find(row.class_name);
        if (it != vit->second.end()) actual = it->second;
      }
    }
    if (actual != row.count) report.mismatches.push_back({row.video_id, row.class_name, row.count, actual});
  }
  return report;
}

}  // namespace msgl
