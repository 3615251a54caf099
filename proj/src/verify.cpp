#include "qvit/verify.hpp"

#include <numeric>
#include <random>
#include <sstream>

#include "qvit/oracle.hpp"

namespace qvit {

namespace {

using Rng = std::mt19937_64;

std::int64_t draw(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

bool coin(Rng& rng) { return draw(rng, 0, 1) == 1; }

std::int64_t random_divisor(Rng& rng, std::int64_t n) {
  std::vector<std::int64_t> divs;
  for (std::int64_t d = 1; d <= n; ++d) {
    if (n % d == 0) divs.push_back(d);
  }
  return divs[static_cast<std::size_t>(draw(rng, 0, static_cast<std::int64_t>(divs.size()) - 1))];
}

LayerKind random_kind(Rng& rng) {
  switch (draw(rng, 0, 2)) {
    case 0: return LayerKind::FC;
    case 1: return LayerKind::AttentionScore;
    default: return LayerKind::AttentionContext;
  }
}

std::string describe(const MatMulLayer& l, const AcceleratorParams& p) {
  std::ostringstream os;
  os << "layer{kind=" << to_string(l.kind) << " M=" << l.out_channels << " N=" << l.in_channels
     << " F=" << l.tokens << " heads=" << l.head_count << " alpha=" << l.quantized_inputs
     << " beta=" << l.quantized_outputs << "} params{Tm=" << p.tile_m << " Tn=" << p.tile_n
     << " Tmq=" << p.tile_m_q << " Tnq=" << p.tile_n_q << " G=" << p.pack << " Gq=" << p.pack_q
     << " Ph=" << p.head_parallel << " bits=" << p.activation_bits << "}";
  return os.str();
}

}  // namespace

VerifyOutcome run_cycle_equivalence(std::uint64_t seed, std::int64_t cases,
                                    const CycleCheckOptions& options) {
  VerifyOutcome out;
  out.suite = "cycle/formula equivalence";
  Rng rng(seed);
  const std::int64_t dim = options.max_dim;
  CycleSimOptions sim_opt;
  sim_opt.inject_off_by_one = options.inject_off_by_one;

  for (std::int64_t i = 0; i < cases; ++i) {
    MatMulLayer layer;
    layer.name = "case" + std::to_string(i);
    layer.kind = random_kind(rng);
    layer.head_count = draw(rng, 1, 16);
    layer.out_channels = draw(rng, 1, dim);
    layer.in_channels = draw(rng, 1, dim);
    layer.tokens = draw(rng, 1, dim);
    layer.quantized_inputs = coin(rng);
    layer.quantized_outputs = coin(rng);

    FpgaSpec spec;
    spec.ports_in = static_cast<int>(draw(rng, 1, 4));
    spec.ports_wgt = static_cast<int>(draw(rng, 1, 4));
    spec.ports_out = static_cast<int>(draw(rng, 1, 4));

    AcceleratorParams p;
    p.activation_bits = static_cast<int>(draw(rng, 1, 16));
    p.pack = draw(rng, 1, 4);
    p.pack_q = pack_factor(64, p.activation_bits);
    const std::int64_t step = std::lcm(p.pack, p.pack_q);
    p.tile_m = step * draw(rng, 1, std::max<std::int64_t>(1, dim / step));
    p.tile_m_q = step * draw(rng, 1, std::max<std::int64_t>(1, dim / step));
    p.tile_n = draw(rng, 1, 64);
    p.tile_n_q = draw(rng, 1, 128);
    p.head_parallel = random_divisor(rng, layer.head_count);

    const std::int64_t expected = layer_cycles(layer, p, spec).total;
    const std::int64_t actual = simulate_cycles(layer, p, spec, sim_opt).total_cycles;
    ++out.cases;
    if (expected != actual) {
      std::ostringstream os;
      os << describe(layer, p) << " ports{in=" << spec.ports_in << " wgt=" << spec.ports_wgt
         << " out=" << spec.ports_out << "}: expected " << expected << " cycles, simulated " << actual;
      out.passed = false;
      out.counterexample = os.str();
      return out;
    }
  }
  return out;
}

VerifyOutcome run_engine_equivalence(std::uint64_t seed, std::int64_t cases,
                                     const EngineCheckOptions& options) {
  struct Packing {
    std::int64_t pack;
    int bits;
  };
  // (G, b^q) settings; G^q follows from a 64-bit port.
  const Packing settings[] = {{4, 8}, {4, 6}, {2, 4}, {1, 3}};

  VerifyOutcome out;
  out.suite = "engine/oracle equivalence";
  Rng rng(seed);
  const std::int64_t dim = options.max_dim;

  for (std::int64_t i = 0; i < cases; ++i) {
    const Packing& pk = settings[static_cast<std::size_t>(i % 4)];
    MatMulLayer layer;
    layer.name = "case" + std::to_string(i);
    layer.kind = random_kind(rng);
    layer.head_count = draw(rng, 1, 4);
    layer.out_channels = draw(rng, 1, dim);
    layer.tokens = draw(rng, 1, std::min<std::int64_t>(dim, 16));
    const std::int64_t max_group = std::max<std::int64_t>(1, dim / layer.head_count);
    layer.in_channels = layer.is_attention() ? layer.head_count * draw(rng, 1, max_group)
                                             : draw(rng, 1, layer.head_count * max_group);
    layer.quantized_inputs = i % 2 == 0;
    layer.quantized_outputs = (i / 2) % 2 == 0;

    AcceleratorParams p;
    p.pack = pk.pack;
    p.activation_bits = pk.bits;
    p.pack_q = pack_factor(64, pk.bits);
    p.head_parallel = random_divisor(rng, layer.head_count);
    p.tile_m = p.tile_m_q = draw(rng, 1, layer.out_channels);
    const std::int64_t group = layer.group_in_channels();
    p.tile_n = draw(rng, 1, group);
    p.tile_n_q = draw(rng, 1, group);

    const int in_bits = layer.quantized_inputs ? pk.bits : 16;
    QuantizedTensor x;
    x.bits = in_bits;
    x.scale = 1.0;
    x.codes = CodeMatrix(layer.tokens, layer.in_channels);
    for (Eigen::Index r = 0; r < x.codes.rows(); ++r)
      for (Eigen::Index c = 0; c < x.codes.cols(); ++c) x.codes(r, c) = draw(rng, x.min_code(), x.max_code());

    const std::int64_t w_rows = layer.weight_rows();
    const std::int64_t w_cols = layer.is_attention() ? group : layer.in_channels;
    CodeMatrix expected;
    EngineResult actual;
    // Attention multiplies two activation tensors; FC uses binary weights.
    if (layer.is_attention() && coin(rng)) {
      QuantizedTensor w;
      w.bits = in_bits;
      w.scale = 1.0;
      w.codes = CodeMatrix(w_rows, w_cols);
      for (Eigen::Index r = 0; r < w_rows; ++r)
        for (Eigen::Index c = 0; c < w_cols; ++c) w.codes(r, c) = draw(rng, w.min_code(), w.max_code());
      expected = oracle::naive_matmul(layer, x.codes, w.codes);
      actual = simulate_matmul_engine(layer, p, x, w);
    } else {
      BinarizedWeights w;
      w.scale = 1.0;
      w.signs = SignMatrix(w_rows, w_cols);
      for (Eigen::Index r = 0; r < w_rows; ++r)
        for (Eigen::Index c = 0; c < w_cols; ++c) w.signs(r, c) = coin(rng) ? 1 : -1;
      expected = oracle::naive_matmul(layer, x.codes, w.signs);
      actual = simulate_matmul_engine(layer, p, x, w);
    }
    ++out.cases;
    if (expected != actual.acc) {
      Eigen::Index r = 0;
      Eigen::Index c = 0;
      (expected - actual.acc).cwiseAbs().maxCoeff(&r, &c);
      std::ostringstream os;
      os << describe(layer, p) << ": output(" << r << "," << c << ") expected " << expected(r, c)
         << ", engine " << actual.acc(r, c);
      out.passed = false;
      out.counterexample = os.str();
      return out;
    }
  }
  return out;
}

}  // namespace qvit
