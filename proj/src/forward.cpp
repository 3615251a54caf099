#include "qvit/forward.hpp"

#include <cmath>
#include <random>

#include "qvit/dse.hpp"
#include "qvit/engine_sim.hpp"
#include "qvit/error.hpp"
#include "qvit/quant.hpp"

namespace qvit {

namespace {

using Rng = std::mt19937_64;

Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std) {
  std::normal_distribution<double> d(0.0, std);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = d(rng);
  return m;
}

LinearWeights linear(Rng& rng, std::int64_t out, std::int64_t in) {
  LinearWeights l;
  l.w = gaussian(rng, out, in, 1.0 / std::sqrt(static_cast<double>(in)));
  l.b = gaussian(rng, 1, out, 0.02);
  return l;
}

Eigen::RowVectorXd near_one(Rng& rng, std::int64_t n) {
  return Eigen::RowVectorXd::Ones(n) + gaussian(rng, 1, n, 0.05);
}

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& gamma,
                           const Eigen::RowVectorXd& beta) {
  constexpr double kEps = 1e-6;
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    y.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + kEps)).matrix();
  }
  return (y.array().rowwise() * gamma.array()).rowwise() + beta.array();
}

Eigen::MatrixXd gelu(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
}

// Row-wise softmax inside each head's block of `width` columns.
Eigen::MatrixXd softmax_blocks(const Eigen::MatrixXd& x, Eigen::Index heads, Eigen::Index width) {
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index h = 0; h < heads; ++h) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto block = x.block(r, h * width, 1, width).array();
      const Eigen::ArrayXXd e = (block - block.maxCoeff()).exp();
      y.block(r, h * width, 1, width) = (e / e.sum()).matrix();
    }
  }
  return y;
}

// Clamps tiles to the layer so narrow layers stay legal for the engine.
AcceleratorParams clamp_to(const AcceleratorParams& p, const MatMulLayer& layer) {
  AcceleratorParams c = p;
  const std::int64_t group = layer.group_in_channels();
  c.tile_m = std::min(c.tile_m, layer.out_channels);
  c.tile_m_q = std::min(c.tile_m_q, layer.out_channels);
  c.tile_n = std::min(c.tile_n, group);
  c.tile_n_q = std::min(c.tile_n_q, group);
  c.head_parallel = std::min(c.head_parallel, layer.head_count);
  return c;
}

class Runner {
 public:
  Runner(const ForwardOptions& opt, const AcceleratorParams& params)
      : opt_(opt), params_(params) {}

  // Unquantized layer: double operands straight through the engine.
  Eigen::MatrixXd full_precision(const MatMulLayer& layer, const Eigen::MatrixXd& x,
                                 const LinearWeights& w) const {
    const EngineTiling tiling = engine_tiling(layer, clamp_to(params_, layer));
    const std::int64_t width = layer.padded_in_channels();
    RowMatrix<double> in = RowMatrix<double>::Zero(x.rows(), width);
    in.leftCols(x.cols()) = x;
    RowMatrix<double> wt = RowMatrix<double>::Zero(w.w.rows(), width);
    wt.leftCols(w.w.cols()) = w.w;
    Eigen::MatrixXd y = run_compute_engine(layer, tiling, in, wt);
    return y.rowwise() + w.b;
  }

  Eigen::MatrixXd quantized_fc(const MatMulLayer& layer, const Eigen::MatrixXd& x,
                               const LinearWeights& w) const {
    const QuantizedTensor xq = quantize_activations(x, opt_.activation_bits);
    const AcceleratorParams p = clamp_to(params_, layer);
    EngineResult r;
    if (opt_.weights == WeightMode::Binary) {
      r = simulate_matmul_engine(layer, p, xq, binarize_weights(w.w));
    } else {
      r = simulate_matmul_engine(layer, p, xq, quantize_activations(w.w, 16));
    }
    return r.dequantize().rowwise() + w.b;
  }

  // Both operands are activations, quantized at b^q.
  Eigen::MatrixXd attention(const MatMulLayer& layer, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& w) const {
    const EngineResult r = simulate_matmul_engine(layer, clamp_to(params_, layer),
                                                  quantize_activations(x, opt_.activation_bits),
                                                  quantize_activations(w, opt_.activation_bits));
    return r.dequantize();
  }

 private:
  const ForwardOptions& opt_;
  AcceleratorParams params_;
};

AcceleratorParams default_forward_params(const ViTConfig& config, int bits) {
  AcceleratorParams p;
  p.pack = pack_factor(64, 16);
  p.pack_q = pack_factor(64, bits);
  p.tile_m = p.tile_m_q = 8;
  p.tile_n = p.tile_n_q = 8;
  p.head_parallel = default_head_parallel(config.num_heads);
  p.activation_bits = bits;
  return p;
}

void require_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + " is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

}  // namespace

ModelWeights synthesize_weights(const ViTConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::int64_t m = config.embed_dim;
  const std::int64_t patch_in = config.in_channels * config.patch_size * config.patch_size;

  ModelWeights w;
  w.patch = linear(rng, m, patch_in);
  w.cls = gaussian(rng, 1, m, 0.02);
  w.pos = gaussian(rng, config.num_tokens(), m, 0.02);
  for (std::int64_t l = 0; l < config.depth; ++l) {
    EncoderWeights e;
    e.ln1_gamma = near_one(rng, m);
    e.ln1_beta = gaussian(rng, 1, m, 0.02);
    e.q = linear(rng, m, m);
    e.k = linear(rng, m, m);
    e.v = linear(rng, m, m);
    e.proj = linear(rng, m, m);
    e.ln2_gamma = near_one(rng, m);
    e.ln2_beta = gaussian(rng, 1, m, 0.02);
    e.mlp1 = linear(rng, config.hidden_dim(), m);
    e.mlp2 = linear(rng, m, config.hidden_dim());
    w.encoders.push_back(std::move(e));
  }
  w.norm_gamma = near_one(rng, m);
  w.norm_beta = gaussian(rng, 1, m, 0.02);
  w.head = linear(rng, config.num_classes, m);
  return w;
}

Eigen::MatrixXd synthesize_image(const ViTConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::MatrixXd img(config.in_channels * config.image_height, config.image_width);
  for (Eigen::Index i = 0; i < img.rows(); ++i)
    for (Eigen::Index j = 0; j < img.cols(); ++j) img(i, j) = d(rng);
  return img;
}

Eigen::MatrixXd patchify(const ViTConfig& config, const Eigen::MatrixXd& image) {
  const std::int64_t p = config.patch_size;
  const std::int64_t h = config.image_height;
  require_shape(image, config.in_channels * h, config.image_width, "image");
  const std::int64_t across = config.image_width / p;
  Eigen::MatrixXd out(config.num_patches(), config.in_channels * p * p);
  for (std::int64_t k = 0; k < out.rows(); ++k) {
    const std::int64_t y0 = (k / across) * p;
    const std::int64_t x0 = (k % across) * p;
    for (std::int64_t c = 0; c < config.in_channels; ++c)
      for (std::int64_t dy = 0; dy < p; ++dy)
        for (std::int64_t dx = 0; dx < p; ++dx) out(k, (c * p + dy) * p + dx) = image(c * h + y0 + dy, x0 + dx);
  }
  return out;
}

Eigen::VectorXd run_encoder_forward(const ViTConfig& config, const ModelWeights& weights,
                                    const Eigen::MatrixXd& image, const ForwardOptions& options) {
  config.validate();
  const ForwardLimits& lim = options.limits;
  if (config.embed_dim > lim.max_embed_dim || config.depth > lim.max_depth ||
      config.num_tokens() > lim.max_tokens || config.num_classes > lim.max_classes) {
    throw ConfigError("model too large for the functional simulator (limits: embed_dim " +
                      std::to_string(lim.max_embed_dim) + ", depth " + std::to_string(lim.max_depth) +
                      ", tokens " + std::to_string(lim.max_tokens) + ", classes " +
                      std::to_string(lim.max_classes) + ")");
  }
  if (options.activation_bits < 1 || options.activation_bits > 16) {
    throw ConfigError("activation_bits must lie in [1, 16]");
  }
  if (static_cast<std::int64_t>(weights.encoders.size()) != config.depth) {
    throw ShapeError("weights hold " + std::to_string(weights.encoders.size()) + " encoders, model has " +
                     std::to_string(config.depth));
  }

  const LayerSchedule schedule = expand_model(config);
  const std::vector<MatMulLayer> layers = schedule.matmul_layers();
  const AcceleratorParams params =
      options.params ? *options.params : default_forward_params(config, options.activation_bits);
  const Runner run(options, params);

  const Eigen::Index m = config.embed_dim;
  const Eigen::Index f = config.num_tokens();
  const Eigen::Index heads = config.num_heads;
  const Eigen::Index mh = config.head_dim();
  require_shape(weights.pos, f, m, "positional embedding");

  std::size_t next = 0;
  auto layer = [&]() -> const MatMulLayer& { return layers.at(next++); };

  Eigen::MatrixXd x(f, m);
  x.row(0) = weights.cls;
  x.bottomRows(f - 1) = run.full_precision(layer(), patchify(config, image), weights.patch);
  x += weights.pos;

  const double scale = 1.0 / std::sqrt(static_cast<double>(mh));
  for (const EncoderWeights& e : weights.encoders) {
    const Eigen::MatrixXd a = layer_norm(x, e.ln1_gamma, e.ln1_beta);
    const Eigen::MatrixXd q = run.quantized_fc(layer(), a, e.q);
    const Eigen::MatrixXd k = run.quantized_fc(layer(), a, e.k);
    const Eigen::MatrixXd v = run.quantized_fc(layer(), a, e.v);

    // Engine layouts: K as (heads*F) x M_h, V as (heads*M_h) x F.
    Eigen::MatrixXd k_rows(heads * f, mh);
    Eigen::MatrixXd v_rows(heads * mh, f);
    for (Eigen::Index h = 0; h < heads; ++h) {
      k_rows.middleRows(h * f, f) = k.middleCols(h * mh, mh);
      v_rows.middleRows(h * mh, mh) = v.middleCols(h * mh, mh).transpose();
    }
    const Eigen::MatrixXd scores = run.attention(layer(), q, k_rows) * scale;
    const Eigen::MatrixXd probs = softmax_blocks(scores, heads, f);
    const Eigen::MatrixXd ctx = run.attention(layer(), probs, v_rows);

    x += run.quantized_fc(layer(), ctx, e.proj);
    const Eigen::MatrixXd b = layer_norm(x, e.ln2_gamma, e.ln2_beta);
    const Eigen::MatrixXd hidden = gelu(run.quantized_fc(layer(), b, e.mlp1));
    x += run.quantized_fc(layer(), hidden, e.mlp2);
  }

  const Eigen::MatrixXd cls = layer_norm(x.topRows(1), weights.norm_gamma, weights.norm_beta);
  const Eigen::MatrixXd logits = run.full_precision(layer(), cls, weights.head);
  return logits.row(0).transpose();
}

}  // namespace qvit
