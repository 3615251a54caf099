#pragma once

#include <cstdint>
#include <string>

#include "qvit/engine_sim.hpp"

namespace qvit {

struct VerifyOutcome {
  std::string suite;
  std::int64_t cases = 0;
  bool passed = true;
  std::string counterexample;  // first mismatch, human readable
};

struct CycleCheckOptions {
  std::int64_t max_dim = 512;
  bool inject_off_by_one = false;
};

// simulate_cycles against layer_cycles on random (layer, params, spec) draws.
VerifyOutcome run_cycle_equivalence(std::uint64_t seed, std::int64_t cases,
                                    const CycleCheckOptions& options = {});

struct EngineCheckOptions {
  std::int64_t max_dim = 64;
};

// simulate_matmul_engine against the naive integer oracle, cycling through
// several (G, G^q, bits) settings and all alpha/beta combinations.
VerifyOutcome run_engine_equivalence(std::uint64_t seed, std::int64_t cases,
                                     const EngineCheckOptions& options = {});

}  // namespace qvit
