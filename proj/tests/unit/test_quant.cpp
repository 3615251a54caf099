#include "doctest.h"

#include <cmath>
#include <random>

#include "qvit/error.hpp"
#include "qvit/quant.hpp"

using namespace qvit;

TEST_CASE("binarize two values") {
  Eigen::MatrixXd w(1, 2);
  w << 0.5, -1.5;
  const BinarizedWeights b = binarize_weights(w);
  CHECK(b.scale == 1.0);
  CHECK(b.signs(0, 0) == 1);
  CHECK(b.signs(0, 1) == -1);
  CHECK(b.reconstruct()(0, 1) == -1.0);
}

TEST_CASE("binarize zeros") {
  const BinarizedWeights b = binarize_weights(Eigen::MatrixXd::Zero(3, 4));
  CHECK(b.scale == 0.0);
  CHECK((b.signs.array() == -1).all());
  CHECK_THROWS_AS(binarize_weights(Eigen::MatrixXd(0, 3)), ShapeError);
}

TEST_CASE("binarize scaling") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 50; ++i) {
    Eigen::MatrixXd w(7, 5);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = nd(rng);
    const double c = std::exp(nd(rng));
    const BinarizedWeights a = binarize_weights(w);
    const BinarizedWeights b = binarize_weights(c * w);
    CHECK(a.signs == b.signs);
    CHECK(b.scale == doctest::Approx(c * a.scale));
  }
}

TEST_CASE("quantize three values") {
  Eigen::MatrixXd x(1, 3);
  x << -1, 0, 1;
  const QuantizedTensor q = quantize_activations(x, 8);
  CHECK(q.codes(0, 0) == -127);
  CHECK(q.codes(0, 1) == 0);
  CHECK(q.codes(0, 2) == 127);
  CHECK(q.scale == doctest::Approx(1.0 / 127));
}

TEST_CASE("quantize rounds half away from zero") {
  Eigen::MatrixXd x(1, 3);
  x << 2.5, -2.5, 127;
  const QuantizedTensor q = quantize_activations(x, 8);
  CHECK(q.scale == 1.0);
  CHECK(q.codes(0, 0) == 3);
  CHECK(q.codes(0, 1) == -3);
}

TEST_CASE("quantize zeros") {
  for (int b : {1, 4, 8, 16}) {
    const QuantizedTensor q = quantize_activations(Eigen::MatrixXd::Zero(1, 1), b);
    CHECK(q.codes(0, 0) == 0);
    CHECK(q.scale == 0.0);
  }
}

TEST_CASE("quantize round trip") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0, 3);
  for (int bits = 2; bits <= 16; ++bits) {
    Eigen::MatrixXd x(9, 6);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = nd(rng);
    const QuantizedTensor q = quantize_activations(x, bits);
    const double err = (q.dequantize() - x).cwiseAbs().maxCoeff();
    CHECK(err <= q.scale / 2 * (1 + 1e-12));
    CHECK((q.codes.array() <= q.max_code()).all());
    CHECK((q.codes.array() >= q.min_code()).all());
    if (bits == 16) CHECK(err <= x.cwiseAbs().maxCoeff() / 32767.0);
  }
}

TEST_CASE("pack and unpack") {
  std::mt19937_64 rng(13);
  for (int bits = 1; bits <= 16; ++bits) {
    const std::int64_t per_word = 64 / bits;
    const std::int64_t lo = -(std::int64_t{1} << (bits - 1));
    const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
    std::uniform_int_distribution<std::int64_t> d(lo, hi);
    std::vector<std::int64_t> codes(37);
    for (auto& c : codes) c = d(rng);
    const auto words = pack_codes(codes, bits, per_word);
    CHECK(words.size() == static_cast<std::size_t>((37 + per_word - 1) / per_word));
    CHECK(unpack_codes(words, bits, per_word, codes.size()) == codes);
  }
  const std::vector<std::int64_t> six(10, -1);
  const auto w = pack_codes(six, 6, 10);
  CHECK(w.size() == 1);
  CHECK(w[0] == (std::uint64_t{1} << 60) - 1);  // top 4 bits unused
  CHECK_THROWS_AS(pack_codes(six, 6, 11), ShapeError);
}
