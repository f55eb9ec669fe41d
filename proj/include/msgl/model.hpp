// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "msgl/attention.hpp"
#include "msgl/rng.hpp"
#include "msgl/tensor.hpp"

namespace msgl {

struct ModelConfig {
  std::size_t window = 35;      // T
  std::size_t input_dim = 12;   // D
  std::size_t num_classes = 5;  // C
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t bam_hidden = 64;
  double dropout = 0.2;
  bool enable_bam = true;
  bool enable_msa = true;
  // Optional extra blocks; off by default (see README, "Parameter count").
  bool msa_ffn = false;
  bool final_norm = false;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

/// Ablation variants: base (no BAM, no MSA), msa, bam, full.
enum class Variant { base, msa, bam, full };

Variant parse_variant(std::string_view name);
std::string_view variant_name(Variant v);
ModelConfig with_variant(ModelConfig cfg, Variant v);

/// Every trainable tensor, in a fixed creation order, addressable by name.
class ModelParams {
 public:
  void add(std::string name, Tensor tensor);
  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);

  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Deep copy with fresh leaves (used for best-epoch snapshots).
  ModelParams clone() const;
  /// Overwrites values from a structurally identical set.
  void assign_values(const ModelParams& other);
  void zero_grad();
  /// Same names, shapes and bit-identical values.
  bool identical_to(const ModelParams& other) const;

 private:
  std::vector<NamedTensor> entries_;
};

ModelParams init_params(const ModelConfig& cfg, RngStream& rng);
std::size_t count_params(const ModelParams& params);

struct ForwardContext {
  bool training = false;
  RngStream* rng = nullptr;  // required when training (dropout)
};

/// Z0 = concat(g0, X W_e + b) + P, shape [(T+1) x d].
Tensor embed_sequence(const ModelParams& params, const ModelConfig& cfg, const Tensor& x);

/// Gate m = sigmoid(W2 relu(W1 vec(frame rows) + b1) + b2), shape [d].
Tensor bam_gate(const ModelParams& params, const ModelConfig& cfg, const Tensor& z0);
/// Z0 scaled channel-wise by the gate, on every row including the global token.
Tensor bam_modulate(const ModelParams& params, const ModelConfig& cfg, const Tensor& z0, Tensor* gate = nullptr);

struct MsaTrace {
  Tensor short_branch;   // [floor(T/2) x d]
  Tensor medium_branch;  // [T x d]
  Tensor local;          // [T x d]
  Tensor global;         // [(T+1) x d]
};

Tensor multi_scale_attention(const ModelParams& params, const ModelConfig& cfg, const Tensor& z,
                             const ForwardContext& ctx, MsaTrace* trace = nullptr);

Tensor encoder_layer(const ModelParams& params, const ModelConfig& cfg, const Tensor& u, std::size_t layer,
                     const ForwardContext& ctx);
Tensor encoder_forward(const ModelParams& params, const ModelConfig& cfg, const Tensor& u,
                       const ForwardContext& ctx);

/// Full pipeline for one standardized [T x D] window; returns C logits.
Tensor classify(const ModelParams& params, const ModelConfig& cfg, const Tensor& x, const ForwardContext& ctx);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

AttentionWeights attention_weights(const ModelParams& params, const std::string& prefix);

struct Model {
  ModelConfig config;
  ModelParams params;
};

}  // namespace msgl
