// SPDX-License-Identifier: Apache-2.0
#include "msgl/synthetic.hpp"

#include <cstdio>

#include "msgl/errors.hpp"

namespace msgl::synthetic {

namespace {

struct Run {
  std::string label;
  std::size_t length;
};

// Deterministic per-class offset in [-2, 2] for each coordinate.
std::vector<double> class_offset(const std::string& label, std::size_t dims) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : label) h = (h ^ ch) * 1099511628211ULL;
  RngStream rng(h);
  std::vector<double> off(dims);
  for (auto& v : off) v = rng.uniform(-2.0, 2.0);
  return off;
}

}  // namespace

VideoRecord labeled_video(const std::string& video_id, std::size_t dims,
                          const std::map<std::string, std::size_t>& counts, RngStream& rng, double missing_rate) {
  if (dims == 0) throw ConfigError("dims must be positive");
  std::vector<Run> runs;
  for (const auto& [label, count] : counts) {
    std::size_t left = count;
    while (left > 0) {
      const std::size_t len = std::min<std::size_t>(left, 5 + rng.below(56));
      runs.push_back({label, len});
      left -= len;
    }
  }
  rng.shuffle(runs);

  std::map<std::string, std::vector<double>> offsets;
  for (const auto& [label, count] : counts) offsets[label] = class_offset(label, dims);

  VideoRecord v;
  v.video_id = video_id;
  v.dims = dims;
  std::vector<double> walk(dims, 0.0);
  for (const auto& run : runs) {
    const auto& off = offsets[run.label];
    for (std::size_t t = 0; t < run.length; ++t) {
      v.labels.push_back(run.label);
      for (std::size_t j = 0; j < dims; ++j) {
        walk[j] = 0.95 * walk[j] + rng.normal(0.0, 0.1);
        double x = off[j] + walk[j] + rng.normal(0.0, 0.3);
        if (missing_rate > 0.0 && rng.bernoulli(missing_rate)) x = kMissing;
        v.frames.push_back(x);
      }
    }
  }
  return v;
}

std::vector<VideoRecord> ratsi_like(std::size_t frames, RngStream& rng, double missing_rate) {
  // Rough class shares in percent; every behavior appears at least once.
  static const std::map<std::string, double> shares = {
      {"Solitary", 59.11},       {"Approaching", 7.52},   {"Following", 9.32}, {"Moving Away", 4.40},
      {"Social Nose Contact", 9.76}, {"Allogrooming", 4.65}, {"Nape Attacking", 0.98}, {"Pinning", 0.60},
      {"Other", 3.63},           {"Uncertain", 0.08}};
  std::vector<VideoRecord> out;
  for (const auto& id : ratsi_video_ids()) {
    std::map<std::string, std::size_t> counts;
    std::size_t used = 0;
    for (const auto& [label, pct] : shares) {
      const auto c = std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(frames) * pct / 100.0));
      counts[label] = c;
      used += c;
    }
    if (used < frames) counts["Solitary"] += frames - used;
    out.push_back(labeled_video(id, kRatsiDims, counts, rng, missing_rate));
  }
  return out;
}

std::vector<VideoRecord> calms21_like(std::size_t videos, std::size_t frames, const std::string& id_prefix,
                                      RngStream& rng) {
  static const std::map<std::string, double> shares = {
      {"Attack", 0.05}, {"Investigation", 0.3}, {"Mount", 0.08}, {"Other", 0.57}};
  std::vector<VideoRecord> out;
  for (std::size_t k = 0; k < videos; ++k) {
    std::map<std::string, std::size_t> counts;
    std::size_t used = 0;
    for (const auto& [label, share] : shares) {
      const auto c = std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(frames) * share));
      counts[label] = c;
      used += c;
    }
    if (used < frames) counts["Other"] += frames - used;
    char id[64];
    std::snprintf(id, sizeof(id), "%s%03zu", id_prefix.c_str(), k);
    out.push_back(labeled_video(id, kCalms21Dims, counts, rng));
  }
  return out;
}

std::vector<VideoRecord> drift_windows(std::size_t n, std::size_t window, std::size_t dims, RngStream& rng) {
  std::vector<VideoRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool up = i % 2 == 0;
    const double slope = up ? 0.05 : -0.05;
    VideoRecord v;
    char id[32];
    std::snprintf(id, sizeof(id), "w%04zu", i);
    v.video_id = id;
    v.dims = dims;
    std::vector<double> start(dims);
    for (auto& s : start) s = rng.normal(0.0, 0.5);
    for (std::size_t t = 0; t < window; ++t) {
      v.labels.push_back(up ? "up" : "down");
      for (std::size_t j = 0; j < dims; ++j) {
        v.frames.push_back(start[j] + slope * static_cast<double>(t) + rng.normal(0.0, 0.1));
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace msgl::synthetic
