#pragma once

// Reference results computed without tiling, packing, or head rounds.

#include "qvit/engine.hpp"
#include "qvit/model_ir.hpp"

namespace qvit::oracle {

// Plain triple loop over the engine operand layout (see engine.hpp).
template <typename WeightScalar>
CodeMatrix naive_matmul(const MatMulLayer& layer, const CodeMatrix& inputs,
                        const RowMatrix<WeightScalar>& weights) {
  const Eigen::Index f = layer.tokens;
  const Eigen::Index m = layer.out_channels;
  const Eigen::Index heads = layer.head_count;
  if (layer.is_attention()) {
    const Eigen::Index group = layer.group_in_channels();
    CodeMatrix out = CodeMatrix::Zero(f, heads * m);
    for (Eigen::Index h = 0; h < heads; ++h)
      for (Eigen::Index t = 0; t < f; ++t)
        for (Eigen::Index o = 0; o < m; ++o) {
          std::int64_t s = 0;
          for (Eigen::Index i = 0; i < group; ++i)
            s += static_cast<std::int64_t>(weights(h * m + o, i)) * inputs(t, h * group + i);
          out(t, h * m + o) = s;
        }
    return out;
  }
  CodeMatrix out = CodeMatrix::Zero(f, m);
  const Eigen::Index n = std::min<Eigen::Index>(inputs.cols(), weights.cols());
  for (Eigen::Index t = 0; t < f; ++t)
    for (Eigen::Index o = 0; o < m; ++o) {
      std::int64_t s = 0;
      for (Eigen::Index i = 0; i < n; ++i) s += static_cast<std::int64_t>(weights(o, i)) * inputs(t, i);
      out(t, o) = s;
    }
  return out;
}

}  // namespace qvit::oracle
