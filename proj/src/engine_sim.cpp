#include "qvit/engine_sim.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace qvit {

namespace {

// Moves the input codes through the memory port the way the load stage does:
// each (token, head group, input tile) row is packed into port words and
// unpacked again on chip.
CodeMatrix transfer_inputs(const MatMulLayer& layer, const EngineTiling& tiling,
                           const QuantizedTensor& in, std::int64_t per_word, int port_bits) {
  const std::int64_t heads = layer.head_count;
  const std::int64_t group = layer.group_in_channels();
  const std::int64_t width = heads * group;
  if (in.codes.rows() != layer.tokens || in.codes.cols() > width ||
      (layer.is_attention() && in.codes.cols() != width)) {
    throw ShapeError("engine inputs are " + std::to_string(in.codes.rows()) + "x" +
                     std::to_string(in.codes.cols()) + ", layer '" + layer.name + "' expects " +
                     std::to_string(layer.tokens) + "x" + std::to_string(layer.in_channels));
  }
  if (per_word * in.bits > port_bits) {
    throw ShapeError(std::to_string(per_word) + " x " + std::to_string(in.bits) +
                     "-bit values do not fit a " + std::to_string(port_bits) + "-bit port");
  }
  CodeMatrix padded = CodeMatrix::Zero(layer.tokens, width);
  padded.leftCols(in.codes.cols()) = in.codes;

  CodeMatrix on_chip(layer.tokens, width);
  std::vector<std::int64_t> row;
  for (std::int64_t t = 0; t < layer.tokens; ++t) {
    for (std::int64_t h = 0; h < heads; ++h) {
      for (std::int64_t n0 = 0; n0 < group; n0 += tiling.tile_n) {
        const std::int64_t len = std::min(tiling.tile_n, group - n0);
        row.assign(padded.row(t).data() + h * group + n0, padded.row(t).data() + h * group + n0 + len);
        const auto words = pack_codes(row, in.bits, per_word);
        const auto back = unpack_codes(words, in.bits, per_word, row.size());
        std::copy(back.begin(), back.end(), on_chip.row(t).data() + h * group + n0);
      }
    }
  }
  return on_chip;
}

template <typename WeightMatrix>
WeightMatrix pad_weights(const MatMulLayer& layer, const WeightMatrix& w, typename WeightMatrix::Scalar fill) {
  if (layer.is_attention() || w.cols() == layer.padded_in_channels()) return w;
  if (w.rows() != layer.out_channels || w.cols() > layer.padded_in_channels()) {
    throw ShapeError("engine weights are " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                     ", layer '" + layer.name + "' expects " + std::to_string(layer.out_channels) +
                     "x" + std::to_string(layer.in_channels));
  }
  WeightMatrix out = WeightMatrix::Constant(w.rows(), layer.padded_in_channels(), fill);
  out.leftCols(w.cols()) = w;
  return out;
}

template <typename WeightMatrix>
EngineResult run_quantized(const MatMulLayer& layer, const AcceleratorParams& params,
                           const QuantizedTensor& inputs, const WeightMatrix& weights,
                           double weight_scale, int port_bits) {
  const EngineTiling tiling = engine_tiling(layer, params);
  const std::int64_t per_word = layer.quantized_inputs ? params.pack_q : params.pack;
  const CodeMatrix on_chip = transfer_inputs(layer, tiling, inputs, per_word, port_bits);
  EngineResult r;
  r.acc = run_compute_engine(layer, tiling, on_chip, pad_weights(layer, weights, typename WeightMatrix::Scalar{1}));
  r.scale = inputs.scale * weight_scale;
  return r;
}

// Duration of `rows` back-to-back bursts, each `beats` long, spread round
// robin over `ports` ports; a burst ends when its busiest port drains.
std::int64_t transfer_cycles(std::int64_t rows, std::int64_t beats, int ports) {
  std::vector<std::int64_t> busy(static_cast<std::size_t>(ports), 0);
  for (std::int64_t b = 0; b < beats; ++b) ++busy[static_cast<std::size_t>(b % ports)];
  return rows * *std::max_element(busy.begin(), busy.end());
}

// Port words needed to carry `values` values packed `per_word` at a time.
std::int64_t packed_words(std::int64_t values, std::int64_t per_word) {
  std::int64_t words = 0;
  for (std::int64_t left = values; left > 0; left -= std::min(left, per_word)) ++words;
  return words;
}

class TraceRecorder {
 public:
  TraceRecorder(TileTrace& trace, const CycleSimOptions& opt) : trace_(trace), opt_(opt) {}

  void add(TileEventKind kind, std::int64_t tile, std::int64_t step, std::int64_t start,
           std::int64_t end, bool bubble) {
    if (!opt_.record_trace) return;
    if (trace_.events.size() >= opt_.max_trace_events) {
      trace_.truncated = true;
      return;
    }
    trace_.events.push_back(TileEvent{kind, tile, step, start, end, bubble});
  }

 private:
  TileTrace& trace_;
  const CycleSimOptions& opt_;
};

}  // namespace

EngineTiling engine_tiling(const MatMulLayer& layer, const AcceleratorParams& params) {
  return EngineTiling{layer.quantized_outputs ? params.tile_m_q : params.tile_m,
                      layer.quantized_inputs ? params.tile_n_q : params.tile_n,
                      params.head_parallel};
}

EngineResult simulate_matmul_engine(const MatMulLayer& layer, const AcceleratorParams& params,
                                    const QuantizedTensor& inputs, const BinarizedWeights& weights,
                                    int port_bits) {
  return run_quantized(layer, params, inputs, weights.signs, weights.scale, port_bits);
}

EngineResult simulate_matmul_engine(const MatMulLayer& layer, const AcceleratorParams& params,
                                    const QuantizedTensor& inputs, const QuantizedTensor& weights,
                                    int port_bits) {
  return run_quantized(layer, params, inputs, weights.codes, weights.scale, port_bits);
}

const char* to_string(TileEventKind kind) {
  switch (kind) {
    case TileEventKind::LoadInput: return "load_input";
    case TileEventKind::LoadWeight: return "load_weight";
    case TileEventKind::Compute: return "compute";
    case TileEventKind::Store: return "store";
  }
  return "?";
}

CycleSimResult simulate_cycles(const MatMulLayer& layer, const AcceleratorParams& params,
                               const FpgaSpec& spec, const CycleSimOptions& options) {
  const bool q_in = layer.quantized_inputs;
  const bool q_out = layer.quantized_outputs;
  const std::int64_t heads = layer.head_count;
  const std::int64_t tile_in = q_in ? params.tile_n_q : params.tile_n;
  const std::int64_t pack_in = q_in ? params.pack_q : params.pack;
  const std::int64_t tile_out = q_out ? params.tile_m_q : params.tile_m;
  const std::int64_t pack_out = q_out ? params.pack_q : params.pack;

  // Stage durations. Every head group streams its packed input rows over F
  // tokens and its packed weight rows over the T_m output channels; stores
  // cover every head's outputs for attention, a single reduced set for FC.
  const std::int64_t in_rows = heads * packed_words(tile_in, pack_in);
  const std::int64_t load_in = transfer_cycles(in_rows, layer.tokens, spec.ports_in);
  const std::int64_t load_wgt = transfer_cycles(in_rows, params.tile_m, spec.ports_wgt);
  const std::int64_t stored_sets = layer.is_attention() ? heads : 1;
  const std::int64_t store =
      transfer_cycles(stored_sets * packed_words(tile_out, pack_out), layer.tokens, spec.ports_out);
  std::int64_t compute = 0;
  for (std::int64_t h0 = 0; h0 < heads; h0 += params.head_parallel) compute += layer.tokens;

  std::int64_t out_tiles = 0;
  for (std::int64_t m0 = 0; m0 < layer.out_channels; m0 += tile_out) ++out_tiles;
  std::int64_t in_steps = 0;
  for (std::int64_t n0 = 0; n0 < layer.in_channels; n0 += heads * tile_in) ++in_steps;

  CycleSimResult result;
  TraceRecorder rec(result.trace, options);
  std::int64_t now = 0;
  for (std::int64_t tile = 0; tile < out_tiles; ++tile) {
    const std::int64_t slot = now;
    // Output ping-pong: the previous tile drains while this one computes.
    const std::int64_t store_end = slot + store;
    rec.add(TileEventKind::Store, tile - 1, 0, slot, store_end, tile == 0);

    std::int64_t phase = slot;
    for (std::int64_t k = 0; k < in_steps; ++k) {
      const std::int64_t in_end = phase + load_in;
      const std::int64_t w_end = phase + load_wgt;
      const std::int64_t c_end = phase + compute;
      rec.add(TileEventKind::LoadInput, tile, k, phase, in_end, false);
      rec.add(TileEventKind::LoadWeight, tile, k, phase, w_end, false);
      rec.add(TileEventKind::Compute, tile, k - 1, phase, c_end, k == 0);
      phase = std::max({in_end, w_end, c_end});
    }
    // Drain: the last loaded step still has to be computed.
    const std::int64_t drain = compute + (options.inject_off_by_one ? 1 : 0);
    rec.add(TileEventKind::Compute, tile, in_steps - 1, phase, phase + drain, false);
    phase += drain;
    now = std::max(phase, store_end);
  }
  rec.add(TileEventKind::Store, out_tiles - 1, 0, now, now + store, false);
  now += store;
  result.total_cycles = now;
  return result;
}

std::optional<std::string> find_trace_hazard(const TileTrace& trace) {
  using Key = std::tuple<std::int64_t, std::int64_t>;
  std::map<Key, std::int64_t> load_end;       // (tile, step) -> both loads done
  std::map<Key, std::int64_t> compute_span[2];  // [0] start, [1] end
  std::map<std::int64_t, std::int64_t> tile_done;
  for (const auto& e : trace.events) {
    if (e.bubble) continue;
    const Key key{e.out_tile, e.step};
    switch (e.kind) {
      case TileEventKind::LoadInput:
      case TileEventKind::LoadWeight:
        load_end[key] = std::max(load_end[key], e.end);
        break;
      case TileEventKind::Compute:
        compute_span[0][key] = e.start;
        compute_span[1][key] = e.end;
        tile_done[e.out_tile] = std::max(tile_done[e.out_tile], e.end);
        break;
      case TileEventKind::Store:
        break;
    }
  }
  for (const auto& [key, start] : compute_span[0]) {
    const auto it = load_end.find(key);
    if (it == load_end.end() || it->second > start) {
      return "compute of tile " + std::to_string(std::get<0>(key)) + " step " +
             std::to_string(std::get<1>(key)) + " starts before its operands are loaded";
    }
  }
  // Step k+2 refills the buffer that step k computes from.
  for (const auto& e : trace.events) {
    if (e.bubble || (e.kind != TileEventKind::LoadInput && e.kind != TileEventKind::LoadWeight)) continue;
    const auto it = compute_span[1].find(Key{e.out_tile, e.step - 2});
    if (it != compute_span[1].end() && e.start < it->second) {
      return "load of tile " + std::to_string(e.out_tile) + " step " + std::to_string(e.step) +
             " overwrites a buffer still being computed on";
    }
  }
  for (const auto& e : trace.events) {
    if (e.bubble || e.kind != TileEventKind::Store) continue;
    const auto it = tile_done.find(e.out_tile);
    if (it == tile_done.end() || e.start < it->second) {
      return "store of tile " + std::to_string(e.out_tile) + " starts before its results exist";
    }
  }
  return std::nullopt;
}

}  // namespace qvit
