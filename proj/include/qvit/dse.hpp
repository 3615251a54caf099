#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qvit/model_ir.hpp"
#include "qvit/perf_model.hpp"

namespace qvit {

struct SearchTarget {
  double fps = 0;  // FR_tgt
  int min_bits = 1;
  int max_bits = 16;
};

// Fully evaluated accelerator configuration for one activation precision.
struct PrecisionPoint {
  int bits = 0;
  bool realizable = false;  // false when no parameter set fits the device
  std::string diagnostic;   // why not realizable
  AcceleratorParams params;
  LatencyEstimate latency;
  ResourceUsage usage;
  ConstraintCheck check;
};

struct CompilationResult {
  SearchTarget target;
  bool feasible = false;
  double fr_max = 0;  // frame rate with 1-bit activations
  std::string diagnostic;
  int bits = 0;
  AcceleratorParams params;
  LatencyEstimate latency;
  ResourceUsage usage;
  ConstraintCheck check;
  int evaluations = 0;  // distinct precisions evaluated
  bool linear_scan = false;
};

// P_h for a model with `num_heads` heads: the largest divisor not above 4.
std::int64_t default_head_parallel(std::int64_t num_heads);

// Exhaustive search over (T_m, T_n) multiples of the 16-bit packing factor.
// Throws InfeasibleError when no tile pair satisfies the BRAM and DSP budgets.
AcceleratorParams optimize_baseline(const LayerSchedule& schedule, const FpgaSpec& spec);

AcceleratorParams init_params(const AcceleratorParams& baseline, int bits, const FpgaSpec& spec,
                              std::int64_t num_heads);

// Trades DSP tiles for LUT tiles until the device is used up. Throws
// InfeasibleError if even the smallest tiles do not fit.
AcceleratorParams adjust_params(const AcceleratorParams& params, const FpgaSpec& spec,
                                const LayerSchedule& schedule);

// init_params + adjust_params + evaluation; never throws for infeasibility.
PrecisionPoint evaluate_precision(const LayerSchedule& schedule, const FpgaSpec& spec,
                                  const AcceleratorParams& baseline, int bits);

CompilationResult search_precision(const LayerSchedule& schedule, const FpgaSpec& spec,
                                   const SearchTarget& target, const AcceleratorParams& baseline);
CompilationResult search_precision(const LayerSchedule& schedule, const FpgaSpec& spec,
                                   const SearchTarget& target);

}  // namespace qvit
