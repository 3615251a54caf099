#pragma once

#include <string>

#include "json.hpp"

#include "qvit/model_ir.hpp"
#include "qvit/perf_model.hpp"

namespace qvit {

// JSON mapping. Missing keys keep their defaults, unknown keys are rejected,
// and every loader validates before returning. Errors are ConfigError.
nlohmann::ordered_json to_json(const ViTConfig& config);
nlohmann::ordered_json to_json(const FpgaSpec& spec);
nlohmann::ordered_json to_json(const AcceleratorParams& params);

ViTConfig vit_config_from_json(const nlohmann::ordered_json& j);
FpgaSpec fpga_spec_from_json(const nlohmann::ordered_json& j);
AcceleratorParams accelerator_params_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json read_json_file(const std::string& path);

// Built-in models: deit-tiny, deit-small, deit-base. Built-in device: zcu102.
bool has_builtin_model(const std::string& name);
bool has_builtin_fpga(const std::string& name);
ViTConfig builtin_model(const std::string& name);
FpgaSpec builtin_fpga(const std::string& name);

// Resolves `ref` as, in order: an existing file, <QVIT_PRESET_DIR>/<ref>.json
// when that variable is set, then a built-in preset.
ViTConfig load_model(const std::string& ref);
FpgaSpec load_fpga(const std::string& ref);
AcceleratorParams load_params(const std::string& path);

}  // namespace qvit
