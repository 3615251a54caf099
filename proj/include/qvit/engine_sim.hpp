#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qvit/engine.hpp"
#include "qvit/model_ir.hpp"
#include "qvit/perf_model.hpp"
#include "qvit/quant.hpp"

namespace qvit {

// Integer accumulators of one engine pass; value = acc * scale.
struct EngineResult {
  CodeMatrix acc;
  double scale = 0;

  Eigen::MatrixXd dequantize() const { return acc.cast<double>() * scale; }
};

// Tile sizes the engine uses for `layer`, picked by its alpha/beta flags.
EngineTiling engine_tiling(const MatMulLayer& layer, const AcceleratorParams& params);

// Runs the quantized compute engine. Inputs cross the memory port packed
// (G or G^q values per word) and are unpacked on chip. FC inputs narrower
// than head_count * group width are zero padded.
EngineResult simulate_matmul_engine(const MatMulLayer& layer, const AcceleratorParams& params,
                                    const QuantizedTensor& inputs, const BinarizedWeights& weights,
                                    int port_bits = 64);
// Same engine with multi-bit weight codes (attention K/V operands).
EngineResult simulate_matmul_engine(const MatMulLayer& layer, const AcceleratorParams& params,
                                    const QuantizedTensor& inputs, const QuantizedTensor& weights,
                                    int port_bits = 64);

enum class TileEventKind { LoadInput, LoadWeight, Compute, Store };

const char* to_string(TileEventKind kind);

struct TileEvent {
  TileEventKind kind;
  std::int64_t out_tile = 0;
  std::int64_t step = 0;  // input tile index; unused for Store
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool bubble = false;  // stage fired on an empty ping-pong buffer
};

struct TileTrace {
  std::vector<TileEvent> events;
  bool truncated = false;
};

struct CycleSimOptions {
  bool record_trace = false;
  std::size_t max_trace_events = 1u << 20;
  // Mutation hook for the verifier's sensitivity check: one extra cycle per
  // pipeline drain.
  bool inject_off_by_one = false;
};

struct CycleSimResult {
  std::int64_t total_cycles = 0;
  TileTrace trace;
};

// Event-level replay of the double-buffered tile pipeline. Transfer times
// come from a round-robin port model over packed words, compute time from
// the head rounds; loads for step k+1 run beside compute for step k and the
// store of tile t beside the work of tile t+1.
CycleSimResult simulate_cycles(const MatMulLayer& layer, const AcceleratorParams& params,
                               const FpgaSpec& spec, const CycleSimOptions& options = {});

// First read-before-write or buffer-reuse violation in a trace, if any.
std::optional<std::string> find_trace_hazard(const TileTrace& trace);

}  // namespace qvit
