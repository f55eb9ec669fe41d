// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "msgl/model.hpp"

namespace msgl {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Layout: "MSGLCKPT", u64 little-endian header length, JSON header
/// {schema_version, config, parameters: [{name, shape}]}, then every
/// parameter's values as little-endian float64 in header order.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace msgl
