// SPDX-License-Identifier: Apache-2.0
// msgl_synth: writes synthetic datasets in the RatSI / CalMS21 on-disk formats.
#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "msgl/dataset.hpp"
#include "msgl/synthetic.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic pose datasets for smoke tests"};
  app.require_subcommand(1);
  std::string out;
  std::uint64_t seed = 1;

  auto* ratsi = app.add_subcommand("ratsi", "nine Observation CSVs");
  std::size_t frames = 600;
  std::string counts;
  ratsi->add_option("--out", out, "output directory")->required();
  ratsi->add_option("--frames", frames, "frames per video");
  ratsi->add_option("--counts", counts, "expected-counts CSV; reproduces its per-video label counts exactly");
  ratsi->add_option("--seed", seed, "random seed");

  auto* calms = app.add_subcommand("calms21", "train.json and test.json");
  std::size_t train_videos = 7, test_videos = 2, calms_frames = 400;
  calms->add_option("--out", out, "output directory")->required();
  calms->add_option("--train-videos", train_videos, "training videos");
  calms->add_option("--test-videos", test_videos, "test videos");
  calms->add_option("--frames", calms_frames, "frames per video");
  calms->add_option("--seed", seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out);
    msgl::RngStream rng(seed);
    if (*ratsi) {
      std::vector<msgl::VideoRecord> videos;
      if (counts.empty()) {
        videos = msgl::synthetic::ratsi_like(frames, rng);
      } else {
        std::map<std::string, std::map<std::string, std::size_t>> per_video;
        for (const auto& row : msgl::read_expected_counts(counts)) {
          if (row.video_id != "*" && row.count > 0) per_video[row.video_id][row.class_name] = row.count;
        }
        for (const auto& [id, c] : per_video) {
          videos.push_back(msgl::synthetic::labeled_video(id, msgl::kRatsiDims, c, rng, 0.01));
        }
      }
      for (const auto& v : videos) msgl::write_ratsi_csv(fs::path(out) / (v.video_id + ".csv"), v);
      std::cout << "wrote " << videos.size() << " videos to " << out << '\n';
    } else {
      auto train = msgl::synthetic::calms21_like(train_videos, calms_frames, "train_", rng);
      auto test = msgl::synthetic::calms21_like(test_videos, calms_frames, "test_", rng);
      msgl::write_calms21_json(fs::path(out) / "train.json", train);
      msgl::write_calms21_json(fs::path(out) / "test.json", test);
      std::cout << "wrote " << train.size() << " + " << test.size() << " videos to " << out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
