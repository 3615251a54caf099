#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qvit/engine.hpp"

namespace qvit {

// Binary weights: every element is +scale or -scale.
struct BinarizedWeights {
  SignMatrix signs;  // +1 / -1
  double scale = 0;  // mean absolute value of the real weights

  Eigen::MatrixXd reconstruct() const;
};

// w_b = (|W|_1 / n) * sign(w), with sign(0) = -1.
BinarizedWeights binarize_weights(const Eigen::Ref<const Eigen::MatrixXd>& weights);

// Symmetric uniform quantization with one scale per tensor.
struct QuantizedTensor {
  CodeMatrix codes;
  double scale = 0;
  int bits = 16;

  std::int64_t max_code() const { return (std::int64_t{1} << (bits - 1)) - 1; }
  std::int64_t min_code() const { return -(std::int64_t{1} << (bits - 1)); }
  Eigen::MatrixXd dequantize() const;
};

// scale = max|x| / (2^(bits-1) - 1), round half away from zero, saturate.
// With bits == 1 the denominator is taken as 1 and codes clamp to [-1, 0].
QuantizedTensor quantize_activations(const Eigen::Ref<const Eigen::MatrixXd>& x, int bits);

// Packs `bits`-wide two's complement codes, `per_word` to a 64-bit word.
std::vector<std::uint64_t> pack_codes(std::span<const std::int64_t> codes, int bits,
                                      std::int64_t per_word);
std::vector<std::int64_t> unpack_codes(std::span<const std::uint64_t> words, int bits,
                                       std::int64_t per_word, std::size_t count);

}  // namespace qvit
