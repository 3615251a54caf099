#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace qvit {

// Structural description of a Vision Transformer.
struct ViTConfig {
  std::string name = "custom";
  std::int64_t image_height = 224;
  std::int64_t image_width = 224;
  std::int64_t in_channels = 3;
  std::int64_t patch_size = 16;
  std::int64_t embed_dim = 768;
  std::int64_t depth = 12;
  std::int64_t num_heads = 12;
  std::int64_t mlp_ratio = 4;
  std::int64_t num_classes = 1000;

  // Throws ConfigError when a field is non-positive or a divisibility rule
  // is broken.
  void validate() const;

  std::int64_t num_patches() const;
  // Patches plus the CLS token.
  std::int64_t num_tokens() const { return num_patches() + 1; }
  std::int64_t head_dim() const { return embed_dim / num_heads; }
  std::int64_t hidden_dim() const { return embed_dim * mlp_ratio; }
};

enum class LayerKind { FC, AttentionScore, AttentionContext };

const char* to_string(LayerKind kind);

// One matrix multiplication executed by the accelerator compute engine.
//
// For FC layers `in_channels` is split into `head_count` groups whose partial
// sums are added together. For the attention kinds every head owns its own
// group: `out_channels` is the per-head output width and `in_channels` is
// head_count times the per-head contraction width.
struct MatMulLayer {
  std::string name;
  std::int64_t out_channels = 1;  // M
  std::int64_t in_channels = 1;   // N
  std::int64_t tokens = 1;        // F
  LayerKind kind = LayerKind::FC;
  std::int64_t head_count = 1;
  bool quantized_inputs = false;   // alpha
  bool quantized_outputs = false;  // beta

  bool is_attention() const { return kind != LayerKind::FC; }
  // Input channels per head group, after zero padding N up to a multiple of
  // head_count.
  std::int64_t group_in_channels() const;
  std::int64_t padded_in_channels() const { return group_in_channels() * head_count; }
  // Rows of the engine weight operand: M for FC, head_count * M otherwise.
  std::int64_t weight_rows() const;
  // Columns of the engine output: M for FC, head_count * M otherwise.
  std::int64_t output_cols() const { return weight_rows(); }
};

enum class HostOpKind { LayerNorm, Softmax, Scale, GELU, SkipAdd, Concat, PositionalAdd };

const char* to_string(HostOpKind kind);

// Work left on the host CPU; costs zero accelerator cycles.
struct HostOp {
  HostOpKind kind = HostOpKind::LayerNorm;
  std::string name;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  double factor = 1.0;  // multiplier for Scale, unused otherwise
};

using ScheduleEntry = std::variant<MatMulLayer, HostOp>;

struct LayerSchedule {
  std::string model_name;
  std::int64_t num_heads = 1;
  std::vector<ScheduleEntry> entries;

  std::vector<MatMulLayer> matmul_layers() const;
  std::int64_t max_tokens() const;
};

// Patch-embedding convolution rewritten as an FC layer (kernel == stride == P).
MatMulLayer convert_patch_embed(const ViTConfig& config);

LayerSchedule expand_model(const ViTConfig& config);

// 2 * M * N * F summed over matmul layers; host ops are excluded.
double count_operations(const LayerSchedule& schedule);
double count_operations(const MatMulLayer& layer);

}  // namespace qvit
