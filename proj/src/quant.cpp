#include "qvit/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qvit/error.hpp"

namespace qvit {

Eigen::MatrixXd BinarizedWeights::reconstruct() const {
  return signs.cast<double>() * scale;
}

BinarizedWeights binarize_weights(const Eigen::Ref<const Eigen::MatrixXd>& weights) {
  if (weights.size() == 0) throw ShapeError("cannot binarize an empty weight matrix");
  BinarizedWeights b;
  b.scale = weights.cwiseAbs().sum() / static_cast<double>(weights.size());
  b.signs = (weights.array() > 0.0).select(SignMatrix::Constant(weights.rows(), weights.cols(), 1),
                                          SignMatrix::Constant(weights.rows(), weights.cols(), -1));
  return b;
}

Eigen::MatrixXd QuantizedTensor::dequantize() const { return codes.cast<double>() * scale; }

QuantizedTensor quantize_activations(const Eigen::Ref<const Eigen::MatrixXd>& x, int bits) {
  if (bits < 1 || bits > 32) throw ConfigError("unsupported activation precision " + std::to_string(bits));
  QuantizedTensor q;
  q.bits = bits;
  q.codes = CodeMatrix::Zero(x.rows(), x.cols());
  const double max_abs = x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
  if (max_abs == 0.0) return q;

  const std::int64_t levels = std::max<std::int64_t>(1, q.max_code());
  q.scale = max_abs / static_cast<double>(levels);
  const auto lo = static_cast<double>(q.min_code());
  const auto hi = static_cast<double>(q.max_code());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      // std::round rounds half away from zero.
      const double v = std::round(x(r, c) / q.scale);
      q.codes(r, c) = static_cast<std::int64_t>(std::clamp(v, lo, hi));
    }
  }
  return q;
}

std::vector<std::uint64_t> pack_codes(std::span<const std::int64_t> codes, int bits,
                                      std::int64_t per_word) {
  if (bits < 1 || per_word < 1 || per_word * bits > 64) {
    throw ShapeError("cannot pack " + std::to_string(per_word) + " x " + std::to_string(bits) +
                     "-bit values into a 64-bit word");
  }
  const std::uint64_t mask = bits == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << bits) - 1);
  std::vector<std::uint64_t> words((codes.size() + per_word - 1) / per_word, 0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto lane = static_cast<int>(i % per_word);
    words[i / per_word] |= (static_cast<std::uint64_t>(codes[i]) & mask) << (lane * bits);
  }
  return words;
}

std::vector<std::int64_t> unpack_codes(std::span<const std::uint64_t> words, int bits,
                                       std::int64_t per_word, std::size_t count) {
  if (bits < 1 || per_word < 1 || per_word * bits > 64) {
    throw ShapeError("cannot unpack " + std::to_string(per_word) + " x " + std::to_string(bits) +
                     "-bit values from a 64-bit word");
  }
  if (words.size() * per_word < count) throw ShapeError("packed buffer too short");
  const std::uint64_t mask = bits == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << bits) - 1);
  std::vector<std::int64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto lane = static_cast<int>(i % per_word);
    std::uint64_t v = (words[i / per_word] >> (lane * bits)) & mask;
    if (bits < 64 && (v >> (bits - 1)) & 1U) v |= ~mask;  // sign extend
    out[i] = static_cast<std::int64_t>(v);
  }
  return out;
}

}  // namespace qvit
