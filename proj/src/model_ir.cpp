#include "qvit/model_ir.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qvit/error.hpp"

namespace qvit {

namespace {

void require_positive(std::int64_t value, const char* field) {
  if (value <= 0) {
    throw ConfigError(std::string("model field '") + field + "' must be positive, got " +
                      std::to_string(value));
  }
}

HostOp host(HostOpKind kind, std::string name, std::int64_t rows, std::int64_t cols,
            double factor = 1.0) {
  return HostOp{kind, std::move(name), rows, cols, factor};
}

MatMulLayer fc(std::string name, std::int64_t out, std::int64_t in, std::int64_t tokens,
               std::int64_t heads, bool quantized) {
  return MatMulLayer{std::move(name), out, in, tokens, LayerKind::FC, heads, quantized, quantized};
}

}  // namespace

void ViTConfig::validate() const {
  require_positive(image_height, "image_height");
  require_positive(image_width, "image_width");
  require_positive(in_channels, "in_channels");
  require_positive(patch_size, "patch_size");
  require_positive(embed_dim, "embed_dim");
  require_positive(depth, "depth");
  require_positive(num_heads, "num_heads");
  require_positive(mlp_ratio, "mlp_ratio");
  require_positive(num_classes, "num_classes");
  if (image_height % patch_size != 0 || image_width % patch_size != 0) {
    throw ConfigError("image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                      " is not divisible by patch size " + std::to_string(patch_size));
  }
  if (embed_dim % num_heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
}

std::int64_t ViTConfig::num_patches() const {
  return (image_height / patch_size) * (image_width / patch_size);
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::FC: return "fc";
    case LayerKind::AttentionScore: return "attention_score";
    case LayerKind::AttentionContext: return "attention_context";
  }
  return "?";
}

const char* to_string(HostOpKind kind) {
  switch (kind) {
    case HostOpKind::LayerNorm: return "layer_norm";
    case HostOpKind::Softmax: return "softmax";
    case HostOpKind::Scale: return "scale";
    case HostOpKind::GELU: return "gelu";
    case HostOpKind::SkipAdd: return "skip_add";
    case HostOpKind::Concat: return "concat";
    case HostOpKind::PositionalAdd: return "positional_add";
  }
  return "?";
}

std::int64_t MatMulLayer::group_in_channels() const {
  return (in_channels + head_count - 1) / head_count;
}

std::int64_t MatMulLayer::weight_rows() const {
  return is_attention() ? head_count * out_channels : out_channels;
}

std::vector<MatMulLayer> LayerSchedule::matmul_layers() const {
  std::vector<MatMulLayer> out;
  for (const auto& e : entries) {
    if (const auto* layer = std::get_if<MatMulLayer>(&e)) out.push_back(*layer);
  }
  return out;
}

std::int64_t LayerSchedule::max_tokens() const {
  std::int64_t f = 0;
  for (const auto& e : entries) {
    if (const auto* layer = std::get_if<MatMulLayer>(&e)) f = std::max(f, layer->tokens);
  }
  return f;
}

MatMulLayer convert_patch_embed(const ViTConfig& config) {
  require_positive(config.patch_size, "patch_size");
  if (config.image_height % config.patch_size != 0 || config.image_width % config.patch_size != 0) {
    throw ConfigError("image " + std::to_string(config.image_height) + "x" +
                      std::to_string(config.image_width) + " is not divisible by patch size " +
                      std::to_string(config.patch_size));
  }
  const std::int64_t p2 = config.patch_size * config.patch_size;
  return fc("patch_embed", config.embed_dim, config.in_channels * p2, config.num_patches(),
            config.num_heads, false);
}

LayerSchedule expand_model(const ViTConfig& config) {
  config.validate();

  const std::int64_t m = config.embed_dim;
  const std::int64_t heads = config.num_heads;
  const std::int64_t mh = config.head_dim();
  const std::int64_t f = config.num_tokens();
  const std::int64_t hidden = config.hidden_dim();

  LayerSchedule s;
  s.model_name = config.name;
  s.num_heads = heads;
  auto& e = s.entries;

  e.emplace_back(convert_patch_embed(config));
  e.emplace_back(host(HostOpKind::Concat, "cls_concat", f, m));
  e.emplace_back(host(HostOpKind::PositionalAdd, "pos_embed", f, m));

  for (std::int64_t l = 0; l < config.depth; ++l) {
    const std::string p = "enc" + std::to_string(l) + ".";
    e.emplace_back(host(HostOpKind::LayerNorm, p + "ln1", f, m));
    e.emplace_back(fc(p + "q", m, m, f, heads, true));
    e.emplace_back(fc(p + "k", m, m, f, heads, true));
    e.emplace_back(fc(p + "v", m, m, f, heads, true));
    // Q_h K_h^T: each head maps its M_h-wide slice to F scores per token.
    e.emplace_back(MatMulLayer{p + "attn_score", f, heads * mh, f, LayerKind::AttentionScore,
                               heads, true, true});
    e.emplace_back(host(HostOpKind::Scale, p + "attn_scale", f, heads * f,
                        1.0 / std::sqrt(static_cast<double>(mh))));
    e.emplace_back(host(HostOpKind::Softmax, p + "attn_softmax", f, heads * f));
    // A_h V_h: each head contracts over F keys to M_h outputs.
    e.emplace_back(MatMulLayer{p + "attn_context", mh, heads * f, f, LayerKind::AttentionContext,
                               heads, true, true});
    e.emplace_back(host(HostOpKind::Concat, p + "head_concat", f, m));
    e.emplace_back(fc(p + "proj", m, m, f, heads, true));
    e.emplace_back(host(HostOpKind::SkipAdd, p + "skip1", f, m));
    e.emplace_back(host(HostOpKind::LayerNorm, p + "ln2", f, m));
    e.emplace_back(fc(p + "mlp1", hidden, m, f, heads, true));
    e.emplace_back(host(HostOpKind::GELU, p + "gelu", f, hidden));
    e.emplace_back(fc(p + "mlp2", m, hidden, f, heads, true));
    e.emplace_back(host(HostOpKind::SkipAdd, p + "skip2", f, m));
  }

  e.emplace_back(host(HostOpKind::LayerNorm, "final_ln", 1, m));
  e.emplace_back(fc("head", config.num_classes, m, 1, heads, false));
  return s;
}

double count_operations(const MatMulLayer& layer) {
  return 2.0 * static_cast<double>(layer.out_channels) * static_cast<double>(layer.in_channels) *
         static_cast<double>(layer.tokens);
}

double count_operations(const LayerSchedule& schedule) {
  double ops = 0.0;
  for (const auto& e : schedule.entries) {
    if (const auto* layer = std::get_if<MatMulLayer>(&e)) ops += count_operations(*layer);
  }
  return ops;
}

}  // namespace qvit
