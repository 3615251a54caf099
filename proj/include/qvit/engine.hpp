#pragma once

// Functional model of the tiled compute engine.
//
// The engine walks output-channel tiles (L1), then head rounds of P_h heads,
// then input-channel tiles, and finally the pipelined token / output /
// head / input loops that the hardware unrolls into T_m * P_h * T_n MACs.
// Operand layout (row-major):
//
//   inputs  : F x (head_count * group_in)   head groups are column blocks
//   weights : FC        M x (head_count * group_in)
//             attention (head_count * M) x group_in, head h owns rows [h*M, (h+1)*M)
//   result  : F x M for FC, F x (head_count * M) for attention
//
// For FC layers the per-group partial sums are added together; attention
// heads are kept apart. Signed 8-bit weight operands are treated as binary
// signs and folded in with add/subtract only.

#include <cstdint>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "qvit/error.hpp"
#include "qvit/model_ir.hpp"

namespace qvit {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using SignMatrix = RowMatrix<std::int8_t>;
using CodeMatrix = RowMatrix<std::int64_t>;

struct EngineTiling {
  std::int64_t tile_m = 1;
  std::int64_t tile_n = 1;
  std::int64_t head_parallel = 1;
};

namespace detail {

template <typename Acc, typename W>
inline void mac(Acc& acc, W w, Acc x) {
  if constexpr (std::is_same_v<W, std::int8_t>) {
    if (w > 0) {
      acc += x;
    } else {
      acc -= x;
    }
  } else {
    acc += static_cast<Acc>(w) * x;
  }
}

}  // namespace detail

template <typename InDerived, typename WDerived>
RowMatrix<typename InDerived::Scalar> run_compute_engine(const MatMulLayer& layer,
                                                         const EngineTiling& tiling,
                                                         const Eigen::MatrixBase<InDerived>& inputs,
                                                         const Eigen::MatrixBase<WDerived>& weights) {
  using Acc = typename InDerived::Scalar;
  using W = typename WDerived::Scalar;

  const std::int64_t heads = layer.head_count;
  const std::int64_t f = layer.tokens;
  const std::int64_t m = layer.out_channels;
  const std::int64_t group_in = layer.group_in_channels();
  const bool attention = layer.is_attention();

  if (inputs.rows() != f || inputs.cols() != heads * group_in) {
    throw ShapeError("engine inputs are " + std::to_string(inputs.rows()) + "x" +
                     std::to_string(inputs.cols()) + ", layer '" + layer.name + "' expects " +
                     std::to_string(f) + "x" + std::to_string(heads * group_in));
  }
  const std::int64_t w_rows = attention ? heads * m : m;
  const std::int64_t w_cols = attention ? group_in : heads * group_in;
  if (weights.rows() != w_rows || weights.cols() != w_cols) {
    throw ShapeError("engine weights are " + std::to_string(weights.rows()) + "x" +
                     std::to_string(weights.cols()) + ", layer '" + layer.name + "' expects " +
                     std::to_string(w_rows) + "x" + std::to_string(w_cols));
  }
  if (tiling.tile_m < 1 || tiling.tile_n < 1 || tiling.head_parallel < 1) {
    throw ShapeError("tile sizes must be positive");
  }
  if (tiling.tile_m > m || tiling.tile_n > group_in || tiling.head_parallel > heads) {
    throw ShapeError("tile " + std::to_string(tiling.tile_m) + "x" + std::to_string(tiling.tile_n) +
                     "x" + std::to_string(tiling.head_parallel) + " exceeds layer '" + layer.name +
                     "' dims " + std::to_string(m) + "x" + std::to_string(group_in) + "x" +
                     std::to_string(heads));
  }

  const std::int64_t tm = tiling.tile_m;
  const std::int64_t tn = tiling.tile_n;
  const std::int64_t ph = tiling.head_parallel;

  auto weight = [&](std::int64_t h, std::int64_t o, std::int64_t i) -> W {
    return attention ? weights(h * m + o, i) : weights(o, h * group_in + i);
  };

  RowMatrix<Acc> result = RowMatrix<Acc>::Zero(f, attention ? heads * m : m);
  // Per-head accumulators for one output tile: [head][token][output].
  std::vector<Acc> acc(static_cast<std::size_t>(heads * f * tm));

  for (std::int64_t m0 = 0; m0 < m; m0 += tm) {  // L1: output tiles
    const std::int64_t m_len = std::min(tm, m - m0);
    std::fill(acc.begin(), acc.end(), Acc{0});
    for (std::int64_t h0 = 0; h0 < heads; h0 += ph) {  // head rounds
      const std::int64_t h_end = std::min(heads, h0 + ph);
      for (std::int64_t n0 = 0; n0 < group_in; n0 += tn) {  // input tiles
        const std::int64_t n_len = std::min(tn, group_in - n0);
        for (std::int64_t t = 0; t < f; ++t) {          // pipelined, II = 1
          for (std::int64_t o = 0; o < m_len; ++o) {    // L2: unrolled T_m
            for (std::int64_t h = h0; h < h_end; ++h) {  // L3: unrolled P_h
              Acc& a = acc[static_cast<std::size_t>((h * f + t) * tm + o)];
              for (std::int64_t i = 0; i < n_len; ++i) {  // L4: unrolled T_n
                detail::mac(a, weight(h, m0 + o, n0 + i), inputs(t, h * group_in + n0 + i));
              }
            }
          }
        }
      }
    }
    // Control signal: keep heads apart for attention, reduce groups for FC.
    for (std::int64_t t = 0; t < f; ++t) {
      for (std::int64_t o = 0; o < m_len; ++o) {
        if (attention) {
          for (std::int64_t h = 0; h < heads; ++h) {
            result(t, h * m + m0 + o) = acc[static_cast<std::size_t>((h * f + t) * tm + o)];
          }
        } else {
          Acc sum{0};
          for (std::int64_t h = 0; h < heads; ++h) sum += acc[static_cast<std::size_t>((h * f + t) * tm + o)];
          result(t, m0 + o) = sum;
        }
      }
    }
  }
  return result;
}

}  // namespace qvit
