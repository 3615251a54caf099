#pragma once

// Plain dense ViT forward in double precision: no tiling, no quantization,
// no engine layouts. Serves as the oracle for the functional simulator.

#include <cmath>

#include <Eigen/Dense>

#include "qvit/forward.hpp"

namespace ref {

inline Eigen::MatrixXd norm(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& g, const Eigen::RowVectorXd& b) {
  Eigen::MatrixXd y = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).sum() / static_cast<double>(x.cols());
    double var = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= static_cast<double>(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) y(r, c) = (x(r, c) - mu) / std::sqrt(var + 1e-6) * g(c) + b(c);
  }
  return y;
}

inline Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const qvit::LinearWeights& w) {
  Eigen::MatrixXd y = x * w.w.transpose();
  y.rowwise() += w.b;
  return y;
}

inline Eigen::VectorXd forward(const qvit::ViTConfig& cfg, const qvit::ModelWeights& w, const Eigen::MatrixXd& image) {
  const int p = static_cast<int>(cfg.patch_size);
  const int gw = static_cast<int>(cfg.image_width / p);
  const int gh = static_cast<int>(cfg.image_height / p);
  const int m = static_cast<int>(cfg.embed_dim);
  const int heads = static_cast<int>(cfg.num_heads);
  const int dh = m / heads;
  const int tokens = gh * gw + 1;

  // Convolution with kernel = stride = P, written directly.
  Eigen::MatrixXd x(tokens, m);
  x.row(0) = w.cls;
  for (int py = 0; py < gh; ++py)
    for (int px = 0; px < gw; ++px) {
      Eigen::RowVectorXd acc = w.patch.b;
      for (int o = 0; o < m; ++o) {
        double s = 0;
        for (int c = 0; c < cfg.in_channels; ++c)
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx) {
              s += w.patch.w(o, (c * p + dy) * p + dx) * image(c * cfg.image_height + py * p + dy, px * p + dx);
            }
        acc(o) += s;
      }
      x.row(1 + py * gw + px) = acc;
    }
  x += w.pos;

  for (const auto& e : w.encoders) {
    const Eigen::MatrixXd a = norm(x, e.ln1_gamma, e.ln1_beta);
    const Eigen::MatrixXd q = affine(a, e.q), k = affine(a, e.k), v = affine(a, e.v);
    Eigen::MatrixXd ctx(tokens, m);
    for (int h = 0; h < heads; ++h) {
      const Eigen::MatrixXd qh = q.middleCols(h * dh, dh), kh = k.middleCols(h * dh, dh), vh = v.middleCols(h * dh, dh);
      Eigen::MatrixXd s = qh * kh.transpose() / std::sqrt(static_cast<double>(dh));
      for (int r = 0; r < tokens; ++r) {
        const double mx = s.row(r).maxCoeff();
        double z = 0;
        for (int c = 0; c < tokens; ++c) z += (s(r, c) = std::exp(s(r, c) - mx));
        s.row(r) /= z;
      }
      ctx.middleCols(h * dh, dh) = s * vh;
    }
    x += affine(ctx, e.proj);
    Eigen::MatrixXd hid = affine(norm(x, e.ln2_gamma, e.ln2_beta), e.mlp1);
    for (Eigen::Index i = 0; i < hid.size(); ++i) {
      const double t = hid.data()[i];
      hid.data()[i] = 0.5 * t * (1.0 + std::erf(t / std::sqrt(2.0)));
    }
    x += affine(hid, e.mlp2);
  }
  const Eigen::MatrixXd cls = norm(x.topRows(1), w.norm_gamma, w.norm_beta);
  return affine(cls, w.head).row(0).transpose();
}

// Two encoders, 32-wide embedding, 2 heads, 4x4 patches of a 16x16 image.
inline qvit::ViTConfig toy_config() {
  qvit::ViTConfig c;
  c.name = "toy";
  c.image_height = 16;
  c.image_width = 16;
  c.in_channels = 3;
  c.patch_size = 4;
  c.embed_dim = 32;
  c.depth = 2;
  c.num_heads = 2;
  c.mlp_ratio = 4;
  c.num_classes = 10;
  return c;
}

}  // namespace ref
