#include "qvit/perf_model.hpp"

#include <algorithm>
#include <sstream>

#include "qvit/error.hpp"

namespace qvit {

namespace {

constexpr std::int64_t kBramBits = 18 * 1024;

constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// ceil(words) * ceil(bits / 18k), the per-group buffer footprint.
std::int64_t buffer_blocks(std::int64_t tile, std::int64_t pack, std::int64_t depth,
                           std::int64_t bits_per_value) {
  return ceil_div(tile, pack) * ceil_div(depth * pack * bits_per_value, kBramBits);
}

}  // namespace

void FpgaSpec::validate() const {
  auto fail = [&](const std::string& what) { throw ConfigError("fpga spec '" + name + "': " + what); };
  if (dsp <= 0 || lut <= 0 || bram_18k <= 0) fail("resource counts must be positive");
  if (ports_in <= 0 || ports_wgt <= 0 || ports_out <= 0) fail("port counts must be positive");
  if (baseline_bits <= 0) fail("baseline_bits must be positive");
  if (port_bits < baseline_bits) fail("port_bits must be at least baseline_bits");
  if (!(clock_hz > 0)) fail("clock_hz must be positive");
  if (!(dsp_ratio > 0 && dsp_ratio <= 1)) fail("dsp_ratio must lie in (0, 1]");
  if (!(lut_ratio > 0 && lut_ratio <= 1)) fail("lut_ratio must lie in (0, 1]");
  if (lut_per_mac < 0 || lut_per_mac_bit < 0 || !(lut_cost(1) > 0)) {
    fail("LUT cost per MAC must be positive");
  }
}

std::vector<std::string> AcceleratorParams::violations(std::int64_t num_heads,
                                                       int baseline_bits) const {
  std::vector<std::string> v;
  auto positive = [&](std::int64_t x, const char* name) {
    if (x <= 0) v.push_back(std::string(name) + " must be positive");
  };
  positive(tile_m, "tile_m");
  positive(tile_n, "tile_n");
  positive(tile_m_q, "tile_m_q");
  positive(tile_n_q, "tile_n_q");
  positive(pack, "pack");
  positive(pack_q, "pack_q");
  positive(head_parallel, "head_parallel");
  if (!v.empty()) return v;
  auto divisible = [&](std::int64_t x, const char* xn, std::int64_t d, const char* dn) {
    if (x % d != 0) {
      std::ostringstream os;
      os << xn << "=" << x << " is not divisible by " << dn << "=" << d;
      v.push_back(os.str());
    }
  };
  divisible(tile_m, "tile_m", pack, "pack");
  divisible(tile_m, "tile_m", pack_q, "pack_q");
  divisible(tile_m_q, "tile_m_q", pack, "pack");
  divisible(tile_m_q, "tile_m_q", pack_q, "pack_q");
  if (num_heads > 0) divisible(num_heads, "num_heads", head_parallel, "head_parallel");
  if (activation_bits < 1 || activation_bits > baseline_bits) {
    v.push_back("activation_bits=" + std::to_string(activation_bits) + " outside [1, " +
                std::to_string(baseline_bits) + "]");
  }
  return v;
}

void AcceleratorParams::validate(std::int64_t num_heads, int baseline_bits) const {
  const auto v = violations(num_heads, baseline_bits);
  if (v.empty()) return;
  std::string msg = "invalid accelerator params:";
  for (const auto& s : v) msg += "\n  " + s;
  throw ConfigError(msg);
}

const char* to_string(Resource r) {
  switch (r) {
    case Resource::BRAM: return "bram";
    case Resource::DSP: return "dsp";
    case Resource::LUT: return "lut";
  }
  return "?";
}

std::int64_t pack_factor(int port_bits, int value_bits) {
  if (value_bits < 1 || value_bits > port_bits) {
    throw ConfigError("cannot pack " + std::to_string(value_bits) + "-bit values into a " +
                      std::to_string(port_bits) + "-bit port");
  }
  // Floor: leftover bits of the port word stay unused (6-bit -> 10 values, 60 of 64 bits).
  return port_bits / value_bits;
}

LayerCost layer_cycles(const MatMulLayer& layer, const AcceleratorParams& params,
                       const FpgaSpec& spec) {
  const bool alpha = layer.quantized_inputs;
  const bool beta = layer.quantized_outputs;
  const std::int64_t heads = layer.head_count;
  const std::int64_t f = layer.tokens;

  const std::int64_t tile_in = alpha ? params.tile_n_q : params.tile_n;
  const std::int64_t in_words = alpha ? ceil_div(params.tile_n_q, params.pack_q)
                                      : ceil_div(params.tile_n, params.pack);
  const std::int64_t out_words = beta ? ceil_div(params.tile_m_q, params.pack_q)
                                      : ceil_div(params.tile_m, params.pack);
  const std::int64_t gamma = layer.is_attention() ? heads - 1 : 0;

  LayerCost c;
  c.in = heads * in_words * ceil_div(f, spec.ports_in);
  // Weight transfer is sized by the unquantized output tile in both branches.
  c.wgt = heads * in_words * ceil_div(params.tile_m, spec.ports_wgt);
  c.out = (1 + gamma) * out_words * ceil_div(f, spec.ports_out);
  c.cmpt = f * ceil_div(heads, params.head_parallel);
  c.lc = std::max({c.in, c.wgt, c.cmpt});
  const std::int64_t in_steps = ceil_div(layer.in_channels, heads * tile_in);
  c.s = std::max(c.lc * in_steps + c.cmpt, c.out);
  const std::int64_t out_tiles = ceil_div(layer.out_channels, beta ? params.tile_m_q : params.tile_m);
  c.total = out_tiles * c.s + c.out;
  return c;
}

std::int64_t total_cycles(const std::vector<MatMulLayer>& layers, const AcceleratorParams& params,
                          const FpgaSpec& spec) {
  std::int64_t total = 0;
  for (const auto& l : layers) total += layer_cycles(l, params, spec).total;
  return total;
}

LatencyEstimate model_latency(const LayerSchedule& schedule, const AcceleratorParams& params,
                              const FpgaSpec& spec) {
  const auto layers = schedule.matmul_layers();
  if (layers.empty()) throw ConfigError("schedule contains no matmul layers");
  LatencyEstimate est;
  est.layers.reserve(layers.size());
  for (const auto& l : layers) {
    est.layers.push_back(layer_cycles(l, params, spec));
    est.total_cycles += est.layers.back().total;
  }
  est.seconds = static_cast<double>(est.total_cycles) / spec.clock_hz;
  est.fps = 1.0 / est.seconds;
  est.gops = count_operations(schedule) * est.fps / 1e9;
  return est;
}

ResourceUsage resource_usage(const AcceleratorParams& p, const FpgaSpec& spec,
                             std::int64_t num_heads, std::int64_t max_tokens) {
  const std::int64_t base = spec.baseline_bits;
  const std::int64_t bq = p.activation_bits;
  const std::int64_t f = max_tokens;
  const std::int64_t groups = 2 * num_heads;  // double buffered, one bank per head group

  ResourceUsage u;
  u.bram_in = groups * std::max(buffer_blocks(p.tile_n, p.pack, f, base),
                                buffer_blocks(p.tile_n_q, p.pack_q, f, bq));
  // Binary weights: one bit per packed value in the quantized branch.
  u.bram_wgt = groups * std::max(buffer_blocks(p.tile_n, p.pack, p.tile_m, base),
                                 buffer_blocks(p.tile_n_q, p.pack_q, p.tile_m, 1));
  u.bram_out = groups * std::max(buffer_blocks(p.tile_m, p.pack, f, base),
                                 buffer_blocks(p.tile_m_q, p.pack_q, f, bq));
  u.bram_18k = u.bram_in + u.bram_wgt + u.bram_out;
  u.dsp = p.tile_m * p.head_parallel * p.tile_n;
  // At the baseline precision every MAC runs on DSPs.
  if (bq < base) {
    u.lut_mac = spec.lut_cost(p.activation_bits) * static_cast<double>(p.tile_m_q * p.head_parallel * p.tile_n_q);
  }
  return u;
}

ResourceUsage resource_usage(const AcceleratorParams& params, const FpgaSpec& spec,
                             const LayerSchedule& schedule) {
  return resource_usage(params, spec, schedule.num_heads, schedule.max_tokens());
}

ConstraintCheck check_constraints(const ResourceUsage& usage, const FpgaSpec& spec) {
  ConstraintCheck c;
  c.bram_slack = static_cast<double>(spec.bram_18k - usage.bram_18k);
  c.dsp_slack = spec.dsp_budget() - static_cast<double>(usage.dsp);
  c.lut_slack = spec.lut_budget() - usage.lut_mac;
  c.feasible = c.bram_slack >= 0 && c.dsp_slack >= 0 && c.lut_slack >= 0;

  // Rank by slack relative to each budget.
  const double rel[] = {c.bram_slack / static_cast<double>(spec.bram_18k),
                        c.dsp_slack / spec.dsp_budget(), c.lut_slack / spec.lut_budget()};
  const Resource names[] = {Resource::BRAM, Resource::DSP, Resource::LUT};
  std::size_t worst = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (rel[i] < rel[worst]) worst = i;
  }
  c.binding = names[worst];
  return c;
}

}  // namespace qvit
