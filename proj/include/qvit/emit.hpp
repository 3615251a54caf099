#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qvit/dse.hpp"
#include "qvit/model_ir.hpp"
#include "qvit/perf_model.hpp"

namespace qvit {

inline constexpr const char* kToolVersion = "0.3.0";

struct ReportInput {
  ViTConfig model;
  FpgaSpec spec;
  std::optional<AcceleratorParams> baseline;
  // One entry per target; estimate mode passes a single entry whose
  // target.fps is 0.
  std::vector<CompilationResult> results;
};

// Stable key order, no timestamps: identical inputs give identical bytes.
nlohmann::ordered_json build_report(const ReportInput& input, const LayerSchedule& schedule);
std::string emit_report(const ReportInput& input, const LayerSchedule& schedule);

// Template shipped with the library (templates/accelerator.hpp.in).
const std::string& builtin_accelerator_template();

// Fills every {{placeholder}}. Throws ConfigError if the template names an
// unknown placeholder or a marker survives substitution.
std::string emit_accelerator_source(const AcceleratorParams& params, const LayerSchedule& schedule,
                                    const FpgaSpec& spec, const std::string& tmpl);

// Values available to templates, by placeholder name.
std::map<std::string, std::string> template_values(const AcceleratorParams& params,
                                                   const LayerSchedule& schedule,
                                                   const FpgaSpec& spec);

// Reads the parameter constants back out of generated source.
AcceleratorParams parse_accelerator_constants(const std::string& source);

// "10 x 6-bit values, 60 of 64 bits used"
std::string packing_summary(int port_bits, int value_bits);

}  // namespace qvit
