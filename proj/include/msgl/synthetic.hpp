// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "msgl/dataset.hpp"
#include "msgl/rng.hpp"

namespace msgl::synthetic {

/// Pose stream whose label sequence has exactly `counts[c]` frames of each
/// class, arranged in shuffled runs of 5..60 frames. Each class shifts the
/// coordinates by its own offset, on top of a smooth random walk, so the
/// labels are learnable. Coordinates go missing at `missing_rate`.
VideoRecord labeled_video(const std::string& video_id, std::size_t dims,
                          const std::map<std::string, std::size_t>& counts, RngStream& rng,
                          double missing_rate = 0.0);

/// Nine RatSI-format sessions, each with `frames` frames split over all ten
/// behaviors in roughly the published proportions.
std::vector<VideoRecord> ratsi_like(std::size_t frames, RngStream& rng, double missing_rate = 0.01);

/// CalMS21-format videos over the four behaviors.
std::vector<VideoRecord> calms21_like(std::size_t videos, std::size_t frames, const std::string& id_prefix,
                                      RngStream& rng);

/// Two-class windows of length `window`: each window is its own short video
/// whose coordinates drift linearly, upward for class "up" and downward for
/// "down", plus Gaussian noise. Classes alternate, so n/2 of each.
std::vector<VideoRecord> drift_windows(std::size_t n, std::size_t window, std::size_t dims, RngStream& rng);

}  // namespace msgl::synthetic
