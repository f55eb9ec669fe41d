// SPDX-License-Identifier: Apache-2.0
#include "msgl/model.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>

#include "msgl/errors.hpp"
#include "msgl/ops.hpp"

namespace msgl {

void ModelConfig::validate() const {
  if (window < 2) throw ConfigError("window T must be at least 2");
  if (input_dim == 0 || num_classes == 0 || d_model == 0 || d_ff == 0 || heads == 0 || layers == 0 ||
      bam_hidden == 0) {
    throw ConfigError("model extents must be positive");
  }
  if (d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"window", c.window},         {"input_dim", c.input_dim}, {"num_classes", c.num_classes},
                     {"d_model", c.d_model},       {"d_ff", c.d_ff},           {"heads", c.heads},
                     {"layers", c.layers},         {"bam_hidden", c.bam_hidden}, {"dropout", c.dropout},
                     {"enable_bam", c.enable_bam}, {"enable_msa", c.enable_msa}, {"msa_ffn", c.msa_ffn},
                     {"final_norm", c.final_norm}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.window = j.value("window", d.window);
  c.input_dim = j.value("input_dim", d.input_dim);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.d_model = j.value("d_model", d.d_model);
  c.d_ff = j.value("d_ff", d.d_ff);
  c.heads = j.value("heads", d.heads);
  c.layers = j.value("layers", d.layers);
  c.bam_hidden = j.value("bam_hidden", d.bam_hidden);
  c.dropout = j.value("dropout", d.dropout);
  c.enable_bam = j.value("enable_bam", d.enable_bam);
  c.enable_msa = j.value("enable_msa", d.enable_msa);
  c.msa_ffn = j.value("msa_ffn", d.msa_ffn);
  c.final_norm = j.value("final_norm", d.final_norm);
}

Variant parse_variant(std::string_view name) {
  if (name == "base") return Variant::base;
  if (name == "msa") return Variant::msa;
  if (name == "bam") return Variant::bam;
  if (name == "full") return Variant::full;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected base, msa, bam or full)");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::base: return "base";
    case Variant::msa: return "msa";
    case Variant::bam: return "bam";
    case Variant::full: return "full";
  }
  return "full";
}

ModelConfig with_variant(ModelConfig cfg, Variant v) {
  cfg.enable_bam = v == Variant::bam || v == Variant::full;
  cfg.enable_msa = v == Variant::msa || v == Variant::full;
  return cfg;
}

void ModelParams::add(std::string name, Tensor tensor) {
  if (contains(name)) throw UsageError("duplicate parameter name '" + name + "'");
  entries_.push_back({std::move(name), std::move(tensor)});
}

bool ModelParams::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const NamedTensor& e) { return e.name == name; });
}

const Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw UsageError("no parameter named '" + std::string(name) + "'");
}

Tensor& ModelParams::get(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ModelParams&>(*this).get(name));
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  for (const auto& e : entries_) {
    Tensor t = e.tensor.detach();
    t.set_requires_grad(e.tensor.requires_grad());
    out.entries_.push_back({e.name, std::move(t)});
  }
  return out;
}

void ModelParams::assign_values(const ModelParams& other) {
  if (other.size() != size()) throw UsageError("parameter sets differ in size");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& src = other.entries_[i];
    auto& dst = entries_[i];
    if (src.name != dst.name || src.tensor.shape() != dst.tensor.shape()) {
      throw UsageError("parameter sets differ at '" + dst.name + "'");
    }
    auto values = dst.tensor.mutable_data();
    std::copy(src.tensor.data().begin(), src.tensor.data().end(), values.begin());
  }
}

void ModelParams::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

bool ModelParams::identical_to(const ModelParams& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.tensor.shape() != b.tensor.shape()) return false;
    auto x = a.tensor.data(), y = b.tensor.data();
    // Bitwise comparison so that -0.0 != 0.0 and identical NaN payloads match.
    if (!std::equal(x.begin(), x.end(), y.begin(),
                    [](double p, double q) { return std::bit_cast<std::uint64_t>(p) == std::bit_cast<std::uint64_t>(q); })) {
      return false;
    }
  }
  return true;
}

namespace {

Tensor xavier(std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return Tensor::from_data({fan_in, fan_out}, std::move(w), true);
}

Tensor small_normal(Shape shape, RngStream& rng) {
  std::vector<double> w(shape_numel(shape));
  for (double& v : w) v = rng.normal(0.0, 0.02);
  return Tensor::from_data(std::move(shape), std::move(w), true);
}

void add_linear(ModelParams& p, const std::string& prefix, std::size_t in, std::size_t out, RngStream& rng) {
  p.add(prefix + ".weight", xavier(in, out, rng));
  p.add(prefix + ".bias", Tensor::zeros({out}, true));
}

void add_norm(ModelParams& p, const std::string& prefix, std::size_t d) {
  p.add(prefix + ".gamma", Tensor::full({d}, 1.0, true));
  p.add(prefix + ".beta", Tensor::zeros({d}, true));
}

void add_attention(ModelParams& p, const std::string& prefix, std::size_t d, RngStream& rng) {
  for (const char* proj : {"q", "k", "v", "out"}) add_linear(p, prefix + "." + proj, d, d, rng);
}

void add_ffn(ModelParams& p, const std::string& prefix, std::size_t d, std::size_t d_ff, RngStream& rng) {
  add_linear(p, prefix + ".fc1", d, d_ff, rng);
  add_linear(p, prefix + ".fc2", d_ff, d, rng);
}

Tensor norm(const ModelParams& p, const std::string& prefix, const Tensor& x) {
  return layer_norm(x, p.get(prefix + ".gamma"), p.get(prefix + ".beta"));
}

Tensor dense(const ModelParams& p, const std::string& prefix, const Tensor& x) {
  return linear(x, p.get(prefix + ".weight"), p.get(prefix + ".bias"));
}

Tensor drop(const Tensor& x, const ModelConfig& cfg, const ForwardContext& ctx) {
  if (!ctx.training || cfg.dropout == 0.0) return x;
  if (!ctx.rng) throw UsageError("training-mode forward needs a random stream for dropout");
  return dropout(x, cfg.dropout, true, *ctx.rng);
}

Tensor feed_forward(const ModelParams& p, const ModelConfig& cfg, const std::string& prefix, const Tensor& x,
                    const ForwardContext& ctx) {
  Tensor hidden = drop(relu(dense(p, prefix + ".fc1", x)), cfg, ctx);
  return dense(p, prefix + ".fc2", hidden);
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, RngStream& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  ModelParams p;
  add_linear(p, "embed", cfg.input_dim, d, rng);
  p.add("global_token", small_normal({1, d}, rng));
  p.add("pos_encoding", small_normal({cfg.window + 1, d}, rng));
  if (cfg.enable_bam) {
    add_linear(p, "bam.fc1", cfg.window * d, cfg.bam_hidden, rng);
    add_linear(p, "bam.fc2", cfg.bam_hidden, d, rng);
  }
  if (cfg.enable_msa) {
    add_attention(p, "msa.short", d, rng);
    add_attention(p, "msa.medium", d, rng);
    add_attention(p, "msa.global", d, rng);
    add_norm(p, "msa.norm", d);
    if (cfg.msa_ffn) {
      add_ffn(p, "msa.ffn", d, cfg.d_ff, rng);
      add_norm(p, "msa.norm2", d);
    }
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string prefix = "encoder." + std::to_string(l);
    add_attention(p, prefix + ".attn", d, rng);
    add_norm(p, prefix + ".norm1", d);
    add_ffn(p, prefix + ".ffn", d, cfg.d_ff, rng);
    add_norm(p, prefix + ".norm2", d);
  }
  if (cfg.final_norm) add_norm(p, "encoder.norm", d);
  add_linear(p, "head", d, cfg.num_classes, rng);
  return p;
}

std::size_t count_params(const ModelParams& params) {
  std::size_t n = 0;
  for (const auto& e : params.entries()) n += e.tensor.numel();
  return n;
}

AttentionWeights attention_weights(const ModelParams& p, const std::string& prefix) {
  return {p.get(prefix + ".q.weight"), p.get(prefix + ".q.bias"),   p.get(prefix + ".k.weight"),
          p.get(prefix + ".k.bias"),   p.get(prefix + ".v.weight"), p.get(prefix + ".v.bias"),
          p.get(prefix + ".out.weight"), p.get(prefix + ".out.bias")};
}

Tensor embed_sequence(const ModelParams& p, const ModelConfig& cfg, const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) != cfg.window || x.dim(1) != cfg.input_dim) {
    throw DimensionError("expected a window of shape [" + std::to_string(cfg.window) + "x" +
                         std::to_string(cfg.input_dim) + "], got " + shape_to_string(x.shape()));
  }
  Tensor frames = dense(p, "embed", x);
  const Tensor parts[] = {p.get("global_token"), frames};
  return add(concat_rows(parts), p.get("pos_encoding"));
}

Tensor bam_gate(const ModelParams& p, const ModelConfig& cfg, const Tensor& z0) {
  const std::size_t t = cfg.window, d = cfg.d_model;
  Tensor flat = reshape(slice_rows(z0, 1, t + 1), {1, t * d});
  Tensor hidden = relu(dense(p, "bam.fc1", flat));
  return reshape(sigmoid(dense(p, "bam.fc2", hidden)), {d});
}

Tensor bam_modulate(const ModelParams& p, const ModelConfig& cfg, const Tensor& z0, Tensor* gate) {
  Tensor m = bam_gate(p, cfg, z0);
  if (gate) *gate = m;
  return mul_row(z0, m);
}

Tensor multi_scale_attention(const ModelParams& p, const ModelConfig& cfg, const Tensor& z,
                             const ForwardContext& ctx, MsaTrace* trace) {
  const std::size_t t = cfg.window, d = cfg.d_model;
  const std::size_t short_len = t / 2;
  Tensor frames = slice_rows(z, 1, t + 1);

  Tensor short_in = slice_rows(frames, 0, short_len);
  Tensor short_out = masked_multihead_attention(short_in, short_in, short_in, cfg.heads,
                                                AttentionMask::causal(short_len), attention_weights(p, "msa.short"));
  Tensor medium_out = masked_multihead_attention(frames, frames, frames, cfg.heads, AttentionMask::causal(t),
                                                 attention_weights(p, "msa.medium"));
  // Average where both local branches cover the frame, medium alone after.
  Tensor overlap = scale(add(short_out, slice_rows(medium_out, 0, short_len)), 0.5);
  const Tensor local_parts[] = {overlap, slice_rows(medium_out, short_len, t)};
  Tensor local = concat_rows(local_parts);
  const Tensor padded_parts[] = {Tensor::zeros({1, d}), local};
  Tensor local_padded = concat_rows(padded_parts);

  Tensor global = masked_multihead_attention(z, z, z, cfg.heads, AttentionMask::none(t + 1),
                                             attention_weights(p, "msa.global"));
  if (trace) *trace = {short_out, medium_out, local, global};

  Tensor u = norm(p, "msa.norm", add(z, drop(add(local_padded, global), cfg, ctx)));
  if (cfg.msa_ffn) u = norm(p, "msa.norm2", add(u, feed_forward(p, cfg, "msa.ffn", u, ctx)));
  return u;
}

Tensor encoder_layer(const ModelParams& p, const ModelConfig& cfg, const Tensor& u, std::size_t layer,
                     const ForwardContext& ctx) {
  const std::string prefix = "encoder." + std::to_string(layer);
  Tensor attn = masked_multihead_attention(u, u, u, cfg.heads, AttentionMask::none(u.dim(0)),
                                           attention_weights(p, prefix + ".attn"));
  Tensor u1 = norm(p, prefix + ".norm1", add(u, attn));
  return norm(p, prefix + ".norm2", add(u1, feed_forward(p, cfg, prefix + ".ffn", u1, ctx)));
}

Tensor encoder_forward(const ModelParams& p, const ModelConfig& cfg, const Tensor& u, const ForwardContext& ctx) {
  Tensor v = u;
  for (std::size_t l = 0; l < cfg.layers; ++l) v = encoder_layer(p, cfg, v, l, ctx);
  if (cfg.final_norm) v = norm(p, "encoder.norm", v);
  return v;
}

Tensor classify(const ModelParams& p, const ModelConfig& cfg, const Tensor& x, const ForwardContext& ctx) {
  Tensor z = embed_sequence(p, cfg, x);
  if (cfg.enable_bam) z = bam_modulate(p, cfg, z);
  if (cfg.enable_msa) z = multi_scale_attention(p, cfg, z, ctx);
  Tensor v = encoder_forward(p, cfg, z, ctx);
  Tensor token = drop(slice_rows(v, 0, 1), cfg, ctx);
  return reshape(dense(p, "head", token), {cfg.num_classes});
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw UsageError("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace msgl
