// SPDX-License-Identifier: Apache-2.0
#include "msgl/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "msgl/errors.hpp"

namespace msgl {
namespace fs = std::filesystem;
namespace {

constexpr std::array<char, 8> kMagic = {'M', 'S', 'G', 'L', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Model& model) {
  nlohmann::json header;
  header["schema_version"] = kCheckpointSchemaVersion;
  header["config"] = model.config;
  header["parameters"] = nlohmann::json::array();
  for (const auto& e : model.params.entries()) {
    header["parameters"].push_back({{"name", e.name}, {"shape", e.tensor.shape()}});
  }
  const std::string text = header.dump();

  std::string buf(kMagic.begin(), kMagic.end());
  put_u64(buf, text.size());
  buf += text;
  for (const auto& e : model.params.entries()) {
    for (double v : e.tensor.data()) put_u64(buf, std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PersistenceError(path.string() + ": cannot open checkpoint for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw PersistenceError(path.string() + ": checkpoint write failed");
}

Model load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError(path.string() + ": cannot open checkpoint");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw PersistenceError(path.string() + ": not a checkpoint file");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - 16) throw PersistenceError(path.string() + ": truncated header");

  Model model;
  std::vector<std::pair<std::string, Shape>> layout;
  try {
    auto header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    if (header.at("schema_version").get<int>() != kCheckpointSchemaVersion) {
      throw PersistenceError(path.string() + ": unsupported checkpoint schema_version");
    }
    model.config = header.at("config").get<ModelConfig>();
    for (const auto& p : header.at("parameters")) {
      layout.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<Shape>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError(path.string() + ": corrupted checkpoint header (" + e.what() + ")");
  }
  try {
    model.config.validate();
  } catch (const ConfigError& e) {
    throw PersistenceError(path.string() + ": " + e.what());
  }

  // The declared layout must be exactly what this config builds.
  RngStream scratch(0);
  ModelParams reference = init_params(model.config, scratch);
  if (reference.size() != layout.size()) throw PersistenceError(path.string() + ": parameter list does not match config");
  std::size_t offset = 16 + header_len;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, shape] = layout[i];
    const auto& ref = reference.entries()[i];
    if (ref.name != name || ref.tensor.shape() != shape) {
      throw PersistenceError(path.string() + ": parameter '" + name + "' does not match config layout");
    }
    const std::size_t n = shape_numel(shape);
    if (bytes.size() < offset + 8 * n) throw PersistenceError(path.string() + ": truncated payload at '" + name + "'");
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) values[k] = std::bit_cast<double>(get_u64(bytes.data() + offset + 8 * k));
    offset += 8 * n;
    model.params.add(name, Tensor::from_data(shape, std::move(values), true));
  }
  if (offset != bytes.size()) throw PersistenceError(path.string() + ": trailing bytes after payload");
  return model;
}

}  // namespace msgl
