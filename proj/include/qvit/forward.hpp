#pragma once

// End-to-end functional model of a small ViT: every matmul runs through the
// compute engine, everything else runs on the host in double precision.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qvit/model_ir.hpp"
#include "qvit/perf_model.hpp"

namespace qvit {

// y = x W^T + b, with W stored out x in.
struct LinearWeights {
  Eigen::MatrixXd w;
  Eigen::RowVectorXd b;
};

struct EncoderWeights {
  Eigen::RowVectorXd ln1_gamma, ln1_beta;
  LinearWeights q, k, v, proj;
  Eigen::RowVectorXd ln2_gamma, ln2_beta;
  LinearWeights mlp1, mlp2;
};

struct ModelWeights {
  LinearWeights patch;         // M x (C * P * P), patch pixels in (c, y, x) order
  Eigen::RowVectorXd cls;      // 1 x M
  Eigen::MatrixXd pos;         // F x M
  std::vector<EncoderWeights> encoders;
  Eigen::RowVectorXd norm_gamma, norm_beta;
  LinearWeights head;          // classes x M
};

// Deterministic Gaussian weights (std = 1/sqrt(fan_in)) for `config`.
ModelWeights synthesize_weights(const ViTConfig& config, std::uint64_t seed);

// Image planes stacked by channel: rows = C * H, cols = W.
Eigen::MatrixXd synthesize_image(const ViTConfig& config, std::uint64_t seed);

// (F - 1) x (C * P * P) patch rows, patches in raster order.
Eigen::MatrixXd patchify(const ViTConfig& config, const Eigen::MatrixXd& image);

// Binary: sign(w) * mean|w|. Identity: 16-bit weight codes, the closest the
// add/sub engine gets to the real weights.
enum class WeightMode { Binary, Identity };

// Cap on the model size the functional simulator accepts.
struct ForwardLimits {
  std::int64_t max_embed_dim = 64;
  std::int64_t max_depth = 2;
  std::int64_t max_tokens = 65;
  std::int64_t max_classes = 1000;
};

struct ForwardOptions {
  int activation_bits = 8;
  WeightMode weights = WeightMode::Binary;
  // Engine tiling; tiles wider than a layer are clamped to it. Defaults to
  // 8x8 tiles with P_h from the head count.
  std::optional<AcceleratorParams> params;
  ForwardLimits limits;
};

// Class scores for one image. Throws ConfigError past the desk-scale limits
// and ShapeError on mismatched weights or image.
Eigen::VectorXd run_encoder_forward(const ViTConfig& config, const ModelWeights& weights,
                                    const Eigen::MatrixXd& image, const ForwardOptions& options);

}  // namespace qvit
