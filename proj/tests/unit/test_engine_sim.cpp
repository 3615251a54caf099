#include "doctest.h"

#include <random>

#include "qvit/engine_sim.hpp"
#include "qvit/error.hpp"
#include "qvit/verify.hpp"

using namespace qvit;

namespace {

using Rng = std::mt19937_64;

QuantizedTensor random_codes(Rng& rng, std::int64_t rows, std::int64_t cols, int bits) {
  QuantizedTensor q;
  q.bits = bits;
  q.scale = 0.25;
  q.codes.resize(rows, cols);
  std::uniform_int_distribution<std::int64_t> d(q.min_code(), q.max_code());
  for (Eigen::Index i = 0; i < q.codes.size(); ++i) q.codes.data()[i] = d(rng);
  return q;
}

BinarizedWeights random_signs(Rng& rng, std::int64_t rows, std::int64_t cols) {
  BinarizedWeights w;
  w.scale = 0.5;
  w.signs.resize(rows, cols);
  std::bernoulli_distribution coin;
  for (Eigen::Index i = 0; i < w.signs.size(); ++i) w.signs.data()[i] = coin(rng) ? 1 : -1;
  return w;
}

MatMulLayer toy_fc() {
  MatMulLayer l;
  l.name = "toy";
  l.out_channels = 8;
  l.in_channels = 8;
  l.tokens = 4;
  return l;
}

AcceleratorParams toy_params() {
  AcceleratorParams p;
  p.tile_m = p.tile_n = p.tile_m_q = p.tile_n_q = 4;
  p.pack = p.pack_q = 4;
  return p;
}

FpgaSpec single_port() {
  FpgaSpec s;
  s.ports_in = s.ports_wgt = s.ports_out = 1;
  return s;
}

}  // namespace

TEST_CASE("FC engine equals a dense product, group sums included") {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    MatMulLayer l;
    l.head_count = std::uniform_int_distribution<std::int64_t>(1, 4)(rng);
    l.out_channels = std::uniform_int_distribution<std::int64_t>(1, 64)(rng);
    l.in_channels = std::uniform_int_distribution<std::int64_t>(1, 64)(rng);
    l.tokens = std::uniform_int_distribution<std::int64_t>(1, 16)(rng);
    l.quantized_inputs = true;
    AcceleratorParams p;
    p.activation_bits = 6;
    p.pack = 4;
    p.pack_q = 10;
    p.head_parallel = 1;
    p.tile_m = std::uniform_int_distribution<std::int64_t>(1, l.out_channels)(rng);
    p.tile_n_q = std::uniform_int_distribution<std::int64_t>(1, l.group_in_channels())(rng);
    const QuantizedTensor x = random_codes(rng, l.tokens, l.in_channels, 6);
    const BinarizedWeights w = random_signs(rng, l.out_channels, l.in_channels);

    const EngineResult r = simulate_matmul_engine(l, p, x, w);
    const CodeMatrix expect = x.codes * w.signs.cast<std::int64_t>().transpose();
    CHECK(r.acc == expect);
    CHECK(r.scale == 0.25 * 0.5);
  }
}

TEST_CASE("attention heads stay separate") {
  Rng rng(22);
  MatMulLayer l;
  l.kind = LayerKind::AttentionScore;
  l.head_count = 2;
  l.out_channels = 5;  // tokens on the key side
  l.in_channels = 2 * 3;
  l.tokens = 5;
  l.quantized_inputs = l.quantized_outputs = true;
  AcceleratorParams p;
  p.activation_bits = 8;
  p.pack = 4;
  p.pack_q = 8;
  p.tile_m_q = 2;
  p.tile_n_q = 2;
  p.head_parallel = 1;
  const QuantizedTensor q = random_codes(rng, 5, 6, 8);
  const QuantizedTensor k = random_codes(rng, 10, 3, 8);
  const EngineResult r = simulate_matmul_engine(l, p, q, k);
  for (int h = 0; h < 2; ++h) {
    const CodeMatrix qh = q.codes.middleCols(h * 3, 3);
    const CodeMatrix kh = k.codes.middleRows(h * 5, 5);
    const CodeMatrix expect = qh * kh.transpose();
    CHECK(CodeMatrix(r.acc.middleCols(h * 5, 5)) == expect);
  }
}

TEST_CASE("permutation weights copy input codes") {
  Rng rng(23);
  MatMulLayer l;
  l.out_channels = l.in_channels = 6;
  l.tokens = 3;
  l.quantized_inputs = true;
  AcceleratorParams p;
  p.activation_bits = 8;
  p.pack = 2;
  p.pack_q = 8;
  p.tile_m = 2;
  p.tile_n_q = 4;
  const QuantizedTensor x = random_codes(rng, 3, 6, 8);
  const int perm[] = {3, 0, 5, 1, 4, 2};
  QuantizedTensor w;
  w.bits = 2;
  w.scale = 1;
  w.codes = CodeMatrix::Zero(6, 6);
  for (int o = 0; o < 6; ++o) w.codes(o, perm[o]) = 1;
  const EngineResult r = simulate_matmul_engine(l, p, x, w);
  for (int o = 0; o < 6; ++o) CHECK(r.acc.col(o) == x.codes.col(perm[o]));
}

TEST_CASE("packing does not change results") {
  Rng rng(24);
  MatMulLayer l;
  l.head_count = 3;
  l.out_channels = 12;
  l.in_channels = 30;
  l.tokens = 7;
  l.quantized_inputs = true;
  l.quantized_outputs = true;
  const QuantizedTensor x = random_codes(rng, 7, 30, 4);
  const BinarizedWeights w = random_signs(rng, 12, 30);
  std::optional<CodeMatrix> first;
  for (std::int64_t gq : {1, 2, 5, 16}) {
    AcceleratorParams p;
    p.activation_bits = 4;
    p.pack = 1;
    p.pack_q = gq;
    p.tile_m_q = 4;
    p.tile_n_q = 3;
    p.head_parallel = 3;
    const EngineResult r = simulate_matmul_engine(l, p, x, w);
    if (!first) first = r.acc;
    CHECK(r.acc == *first);
  }
}

TEST_CASE("engine shape errors") {
  Rng rng(25);
  MatMulLayer l = toy_fc();
  AcceleratorParams p = toy_params();
  const BinarizedWeights w = random_signs(rng, 8, 8);
  CHECK_THROWS_AS(simulate_matmul_engine(l, p, random_codes(rng, 3, 8, 16), w), ShapeError);
  CHECK_THROWS_AS(simulate_matmul_engine(l, p, random_codes(rng, 4, 8, 16), random_signs(rng, 7, 8)),
                  ShapeError);
  p.tile_m = 16;
  CHECK_THROWS_AS(simulate_matmul_engine(l, p, random_codes(rng, 4, 8, 16), w), ShapeError);
}

TEST_CASE("engine equivalence suite") {
  const VerifyOutcome v = run_engine_equivalence(1, 200);
  CHECK(v.passed);
  CHECK(v.cases == 200);
}

TEST_CASE("cycle simulator on the toy layers") {
  CHECK(simulate_cycles(toy_fc(), toy_params(), single_port()).total_cycles == 28);

  MatMulLayer q = toy_fc();
  q.quantized_inputs = q.quantized_outputs = true;
  AcceleratorParams p = toy_params();
  p.tile_n_q = p.tile_m_q = 8;
  p.pack_q = 8;
  p.activation_bits = 8;
  CHECK(simulate_cycles(q, p, single_port()).total_cycles == 12);
}

TEST_CASE("cycle simulator matches the formula on small dims") {
  const VerifyOutcome v = run_cycle_equivalence(2, 1000, CycleCheckOptions{32, false});
  CHECK(v.passed);
  CHECK(v.cases == 1000);
  INFO(v.counterexample);

  const VerifyOutcome bad = run_cycle_equivalence(2, 1000, CycleCheckOptions{32, true});
  CHECK_FALSE(bad.passed);
  CHECK_FALSE(bad.counterexample.empty());
}

TEST_CASE("bottleneck dominance") {
  FpgaSpec spec;
  spec.ports_in = spec.ports_wgt = spec.ports_out = 4;

  // Compute bound: long token stream, narrow tiles.
  MatMulLayer c;
  c.out_channels = 16;
  c.in_channels = 16;
  c.tokens = 512;
  AcceleratorParams p = toy_params();
  const LayerCost lc = layer_cycles(c, p, spec);
  REQUIRE(lc.cmpt > 2 * std::max(lc.in, lc.wgt));
  const std::int64_t tiles = 4;
  const std::int64_t steps = 4;
  const std::int64_t sim = simulate_cycles(c, p, spec).total_cycles;
  CHECK(sim >= tiles * steps * lc.cmpt);
  CHECK(sim <= tiles * (steps + 1) * lc.cmpt + lc.out);

  // Transfer bound: many heads in parallel, one port.
  spec.ports_in = spec.ports_wgt = spec.ports_out = 1;
  MatMulLayer t;
  t.head_count = 8;
  t.out_channels = 16;
  t.in_channels = 8 * 16;
  t.tokens = 16;
  p.head_parallel = 8;
  const LayerCost lt = layer_cycles(t, p, spec);
  REQUIRE(std::max(lt.in, lt.wgt) > 2 * lt.cmpt);
  const std::int64_t sim_t = simulate_cycles(t, p, spec).total_cycles;
  CHECK(sim_t >= tiles * steps * std::max(lt.in, lt.wgt));
  CHECK(sim_t == lt.total);
}

TEST_CASE("trace hazards") {
  Rng rng(26);
  CycleSimOptions opt;
  opt.record_trace = true;
  for (int i = 0; i < 50; ++i) {
    MatMulLayer l;
    l.head_count = std::uniform_int_distribution<std::int64_t>(1, 4)(rng);
    l.out_channels = std::uniform_int_distribution<std::int64_t>(1, 40)(rng);
    l.in_channels = std::uniform_int_distribution<std::int64_t>(1, 40)(rng);
    l.tokens = std::uniform_int_distribution<std::int64_t>(1, 40)(rng);
    AcceleratorParams p = toy_params();
    p.tile_n = std::uniform_int_distribution<std::int64_t>(1, 8)(rng);
    const CycleSimResult r = simulate_cycles(l, p, single_port(), opt);
    CHECK_FALSE(r.trace.events.empty());
    CHECK_FALSE(find_trace_hazard(r.trace).has_value());
  }

  CycleSimResult r = simulate_cycles(toy_fc(), toy_params(), single_port(), opt);
  for (auto& e : r.trace.events) {
    if (e.kind == TileEventKind::Compute && !e.bubble) {
      e.start -= 1;  // fire before the operands land
      break;
    }
  }
  CHECK(find_trace_hazard(r.trace).has_value());
}
