// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "msgl/dataset.hpp"
#include "msgl/errors.hpp"
#include "msgl/synthetic.hpp"
#include "test_util.hpp"

using namespace msgl;
using msgl::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const fs::path kExpected = fs::path(MSGL_SOURCE_DIR) / "data" / "expected";

VideoRecord small_ratsi(const std::string& id, RngStream& rng) {
  return synthetic::labeled_video(id, kRatsiDims, {{"Solitary", 40}, {"Moving Away", 12}, {"Pinning", 8}}, rng, 0.1);
}

void expect_bit_equal(const VideoRecord& a, const VideoRecord& b) {
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.frames[i]) == std::bit_cast<std::uint64_t>(b.frames[i]) ||
                  (is_missing(a.frames[i]) && is_missing(b.frames[i])),
              true)
        << "index " << i;
  }
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.dims, b.dims);
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
}

std::string header() {
  std::string h = "frame";
  for (int j = 0; j < 12; ++j) h += ",c" + std::to_string(j);
  return h + ",label";
}

std::string row(int frame, const std::string& label, int fields = 12) {
  std::string r = std::to_string(frame);
  for (int j = 0; j < fields; ++j) r += ",1.5";
  return r + "," + label;
}

std::map<std::string, std::map<std::string, std::size_t>> per_video_counts(const std::vector<ExpectedCount>& rows) {
  std::map<std::string, std::map<std::string, std::size_t>> out;
  for (const auto& r : rows)
    if (r.video_id != "*") out[r.video_id][r.class_name] = r.count;
  return out;
}

}  // namespace

TEST(RatsiCsv, RoundTripIsBitExact) {
  TempDir dir("ratsi_rt");
  RngStream rng(1);
  VideoRecord v = small_ratsi("Observation01", rng);
  write_ratsi_csv(dir.path() / "Observation01.csv", v);
  expect_bit_equal(read_ratsi_csv(dir.path() / "Observation01.csv", "Observation01"), v);
}

TEST(RatsiCsv, RejectsWrongHeader) {
  TempDir dir("ratsi_hdr");
  write_lines(dir.path() / "a.csv", {"frame,x,label", row(0, "Solitary")});
  EXPECT_THROW(read_ratsi_csv(dir.path() / "a.csv", "a"), IngestionError);
}

TEST(RatsiCsv, RaggedRowNamesFileAndLine) {
  TempDir dir("ratsi_rag");
  write_lines(dir.path() / "a.csv", {header(), row(0, "Solitary"), row(1, "Solitary", 11)});
  try {
    read_ratsi_csv(dir.path() / "a.csv", "a");
    FAIL() << "expected an ingestion error";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("a.csv:3"), std::string::npos) << e.what();
  }
}

TEST(RatsiCsv, UnknownLabelNamesFileAndLine) {
  TempDir dir("ratsi_lbl");
  write_lines(dir.path() / "a.csv", {header(), row(0, "Solitary"), row(1, "Dancing")});
  try {
    read_ratsi_csv(dir.path() / "a.csv", "a");
    FAIL() << "expected an ingestion error";
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("a.csv:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("Dancing"), std::string::npos) << msg;
  }
}

TEST(RatsiCsv, EmptyFieldIsMissing) {
  TempDir dir("ratsi_miss");
  write_lines(dir.path() / "a.csv", {header(), "0,,1,2,3,4,5,6,7,8,9,10,11,Solitary"});
  VideoRecord v = read_ratsi_csv(dir.path() / "a.csv", "a");
  EXPECT_TRUE(is_missing(v.at(0, 0)));
  EXPECT_EQ(v.at(0, 1), 1.0);
}

TEST(RatsiLoad, MissingVideoFileIsAnError) {
  TempDir dir("ratsi_load");
  RngStream rng(2);
  write_ratsi_csv(dir.path() / "Observation01.csv", small_ratsi("Observation01", rng));
  EXPECT_THROW(load_ratsi(dir.path()), IngestionError);
}

TEST(RatsiLoad, KeepsDroppedLabelsOnFrames) {
  TempDir dir("ratsi_drop");
  RngStream rng(3);
  for (const auto& id : ratsi_video_ids()) write_ratsi_csv(dir.path() / (id + ".csv"), small_ratsi(id, rng));
  DatasetManifest m = load_ratsi(dir.path());
  ASSERT_EQ(m.videos.size(), 9u);
  EXPECT_EQ(m.dims(), 12u);
  EXPECT_EQ(m.kept_classes, (std::vector<std::string>{"Solitary", "Approaching", "Following", "Moving Away",
                                                      "Social Nose Contact"}));
  EXPECT_FALSE(m.is_kept("Pinning"));
  EXPECT_EQ(m.class_counts().at("Pinning"), 9u * 8u);
}

TEST(Calms21Json, RoundTripIsBitExact) {
  TempDir dir("calms_rt");
  RngStream rng(4);
  auto videos = synthetic::calms21_like(3, 50, "v", rng);
  videos[1].frames[5] = kMissing;
  write_calms21_json(dir.path() / "train.json", videos);
  auto back = read_calms21_json(dir.path() / "train.json");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].video_id, videos[i].video_id);
    expect_bit_equal(back[i], videos[i]);
  }
}

TEST(Calms21Json, FrameLabelCountMismatchIsAnError) {
  TempDir dir("calms_mm");
  std::string kp = "[";
  for (int j = 0; j < 28; ++j) kp += (j ? ",1" : "1");
  kp += "]";
  std::ofstream(dir.path() / "x.json") << R"({"v1": {"keypoints": [)" << kp << "," << kp
                                        << R"(], "labels": ["Other"]}})";
  EXPECT_THROW(read_calms21_json(dir.path() / "x.json"), IngestionError);
}

TEST(Calms21Json, WrongRowWidthIsAnError) {
  TempDir dir("calms_w");
  std::ofstream(dir.path() / "x.json") << R"({"v1": {"keypoints": [[1,2,3]], "labels": ["Other"]}})";
  EXPECT_THROW(read_calms21_json(dir.path() / "x.json"), IngestionError);
}

TEST(Calms21Load, ReadsBothSplits) {
  TempDir dir("calms_load");
  RngStream rng(5);
  write_calms21_json(dir.path() / "train.json", synthetic::calms21_like(4, 60, "tr", rng));
  write_calms21_json(dir.path() / "test.json", synthetic::calms21_like(2, 60, "te", rng));
  auto s = load_calms21(dir.path());
  EXPECT_EQ(s.train.videos.size(), 4u);
  EXPECT_EQ(s.test.videos.size(), 2u);
  EXPECT_EQ(s.test.total_frames(), 120u);
  EXPECT_EQ(s.train.dims(), 28u);
  EXPECT_TRUE(s.train.dropped_classes.empty());
}

TEST(ValidateManifest, MatchingTableHasNoMismatch) {
  RngStream rng(6);
  DatasetManifest m;
  m.videos.push_back(synthetic::labeled_video("A", 12, {{"Solitary", 30}, {"Following", 7}}, rng));
  std::vector<ExpectedCount> rows = {{"A", "Solitary", 30}, {"A", "Following", 7}, {"*", "Solitary", 30}};
  EXPECT_TRUE(validate_manifest(m, rows).ok());
}

TEST(ValidateManifest, OffByOneNamesClassAndVideo) {
  RngStream rng(7);
  DatasetManifest m;
  m.videos.push_back(synthetic::labeled_video("A", 12, {{"Solitary", 30}, {"Following", 7}}, rng));
  std::vector<ExpectedCount> rows = {{"A", "Solitary", 30}, {"A", "Following", 8}};
  auto r = validate_manifest(m, rows);
  ASSERT_EQ(r.mismatches.size(), 1u);
  EXPECT_EQ(r.mismatches[0].video_id, "A");
  EXPECT_EQ(r.mismatches[0].class_name, "Following");
  EXPECT_EQ(r.mismatches[0].expected, 8u);
  EXPECT_EQ(r.mismatches[0].actual, 7u);
}

TEST(ExpectedCounts, RoundTrip) {
  TempDir dir("counts");
  std::vector<ExpectedCount> rows = {{"A", "Solitary", 3}, {"*", "Moving Away", 11}};
  write_expected_counts(dir.path() / "c.csv", rows);
  auto back = read_expected_counts(dir.path() / "c.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].class_name, "Moving Away");
  EXPECT_EQ(back[1].count, 11u);
}

// The shipped tables reproduce the published frame totals.
TEST(PublishedTables, RatsiTotals) {
  const auto rows = read_expected_counts(kExpected / "ratsi_counts.csv");
  const auto per_video = per_video_counts(rows);
  ASSERT_EQ(per_video.size(), 9u);
  std::size_t obs1 = 0, total = 0, kept = 0;
  const auto& kept_names = ratsi_kept_behaviors();
  for (const auto& [id, counts] : per_video) {
    for (const auto& [cls, n] : counts) {
      total += n;
      if (id == "Observation01") obs1 += n;
      if (std::find(kept_names.begin(), kept_names.end(), cls) != kept_names.end()) kept += n;
    }
  }
  EXPECT_EQ(obs1, 21515u);
  EXPECT_EQ(total, 202550u);
  EXPECT_NEAR(static_cast<double>(kept) / total, 0.901, 0.005);
}

TEST(PublishedTables, Calms21Totals) {
  const auto rows = read_expected_counts(kExpected / "calms21_counts.csv");
  std::map<std::string, std::size_t> train, totals;
  for (const auto& r : rows) {
    totals[r.video_id] += r.count;
    if (r.video_id == "train") train[r.class_name] = r.count;
  }
  EXPECT_EQ(train["Attack"], 14039u);
  EXPECT_EQ(train["Investigation"], 146615u);
  EXPECT_EQ(train["Mount"], 28615u);
  EXPECT_EQ(train["Other"], 318469u);
  EXPECT_EQ(totals["train"], 507738u);
  EXPECT_EQ(totals["test"], 262107u);
  EXPECT_NEAR(100.0 * train["Attack"] / totals["train"], 2.76, 0.01);  // published figure is truncated
}

// A full-size stand-in with the published per-video counts loads and
// validates with zero mismatches.
TEST(PublishedTables, FullSizeRatsiStandInValidates) {
  TempDir dir("ratsi_full");
  const auto rows = read_expected_counts(kExpected / "ratsi_counts.csv");
  RngStream rng(8);
  for (const auto& [id, counts] : per_video_counts(rows)) {
    std::map<std::string, std::size_t> nonzero;
    for (const auto& [c, n] : counts)
      if (n > 0) nonzero[c] = n;
    write_ratsi_csv(dir.path() / (id + ".csv"), synthetic::labeled_video(id, kRatsiDims, nonzero, rng, 0.01));
  }
  DatasetManifest m = load_ratsi(dir.path());
  EXPECT_EQ(m.find("Observation01")->num_frames(), 21515u);
  EXPECT_EQ(m.total_frames(), 202550u);
  auto report = validate_manifest(m, rows);
  EXPECT_TRUE(report.ok()) << report.mismatches.size() << " mismatches";
}
