#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qvit/model_ir.hpp"

namespace qvit {

// Device budget plus the calibration constants of the analytical model.
struct FpgaSpec {
  std::string name = "custom";
  std::int64_t dsp = 2520;
  std::int64_t lut = 274000;
  std::int64_t bram_18k = 1824;
  int port_bits = 64;
  int ports_in = 2;
  int ports_wgt = 2;
  int ports_out = 2;
  double clock_hz = 150e6;
  double dsp_ratio = 0.9;   // r_dsp: share of DSPs usable for MACs
  double lut_ratio = 0.7;   // r_lut: share of LUTs usable for MACs
  double lut_per_mac = 12;  // C_lut
  // Extra LUTs per MAC for every activation bit; 0 keeps C_lut flat.
  double lut_per_mac_bit = 0;
  int baseline_bits = 16;

  void validate() const;
  double dsp_budget() const { return static_cast<double>(dsp) * dsp_ratio; }
  double lut_budget() const { return static_cast<double>(lut) * lut_ratio; }
  double lut_cost(int activation_bits) const { return lut_per_mac + lut_per_mac_bit * activation_bits; }
};

// Tunable knobs of the compute engine for one activation precision.
struct AcceleratorParams {
  std::int64_t tile_m = 4;    // T_m
  std::int64_t tile_n = 4;    // T_n
  std::int64_t tile_m_q = 4;  // T_m^q
  std::int64_t tile_n_q = 4;  // T_n^q
  std::int64_t pack = 4;      // G
  std::int64_t pack_q = 4;    // G^q
  std::int64_t head_parallel = 1;  // P_h
  int activation_bits = 16;        // b^q

  // Human-readable list of broken invariants; empty when valid.
  std::vector<std::string> violations(std::int64_t num_heads, int baseline_bits = 16) const;
  void validate(std::int64_t num_heads, int baseline_bits = 16) const;

  friend bool operator==(const AcceleratorParams&, const AcceleratorParams&) = default;
};

struct LayerCost {
  std::int64_t in = 0;
  std::int64_t wgt = 0;
  std::int64_t out = 0;
  std::int64_t cmpt = 0;
  std::int64_t lc = 0;
  std::int64_t s = 0;
  std::int64_t total = 0;  // J_i

  friend bool operator==(const LayerCost&, const LayerCost&) = default;
};

struct ResourceUsage {
  std::int64_t bram_in = 0;
  std::int64_t bram_wgt = 0;
  std::int64_t bram_out = 0;
  std::int64_t bram_18k = 0;
  std::int64_t dsp = 0;
  double lut_mac = 0;
};

enum class Resource { BRAM, DSP, LUT };

const char* to_string(Resource r);

struct ConstraintCheck {
  bool feasible = true;
  double bram_slack = 0;  // budget minus usage; negative when violated
  double dsp_slack = 0;
  double lut_slack = 0;
  // Most violated resource when infeasible, tightest one otherwise.
  Resource binding = Resource::DSP;
};

struct LatencyEstimate {
  std::int64_t total_cycles = 0;
  double seconds = 0;
  double fps = 0;
  double gops = 0;
  std::vector<LayerCost> layers;
};

// Largest number of value_bits-wide values that fit in one port word.
std::int64_t pack_factor(int port_bits, int value_bits);

LayerCost layer_cycles(const MatMulLayer& layer, const AcceleratorParams& params,
                       const FpgaSpec& spec);

// Sum of J_i over the matmul layers; throws ConfigError on a schedule with none.
LatencyEstimate model_latency(const LayerSchedule& schedule, const AcceleratorParams& params,
                              const FpgaSpec& spec);

// Sigma J_i only, without the per-layer breakdown.
std::int64_t total_cycles(const std::vector<MatMulLayer>& layers, const AcceleratorParams& params,
                          const FpgaSpec& spec);

// BRAM buffers are sized for `num_heads` groups of `max_tokens` tokens.
ResourceUsage resource_usage(const AcceleratorParams& params, const FpgaSpec& spec,
                             std::int64_t num_heads, std::int64_t max_tokens);
ResourceUsage resource_usage(const AcceleratorParams& params, const FpgaSpec& spec,
                             const LayerSchedule& schedule);

ConstraintCheck check_constraints(const ResourceUsage& usage, const FpgaSpec& spec);

}  // namespace qvit
