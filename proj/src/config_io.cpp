#include "qvit/config_io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include "qvit/error.hpp"

namespace qvit {

namespace {

using json = nlohmann::ordered_json;

// Reads `key` into `field` when present; type errors become ConfigError.
template <typename T>
void take(const json& j, const char* key, T& field, const std::string& what) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(what + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(what + ": unknown field '" + key + "'");
  }
}

ViTConfig deit(const std::string& name, std::int64_t dim, std::int64_t heads) {
  ViTConfig c;
  c.name = name;
  c.embed_dim = dim;
  c.num_heads = heads;
  return c;
}

std::optional<std::filesystem::path> preset_file(const std::string& ref) {
  const char* dir = std::getenv("QVIT_PRESET_DIR");
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  std::filesystem::path p = std::filesystem::path(dir) / (ref + ".json");
  if (std::filesystem::is_regular_file(p)) return p;
  return std::nullopt;
}

}  // namespace

json to_json(const ViTConfig& c) {
  return json{{"name", c.name},
              {"image_height", c.image_height},
              {"image_width", c.image_width},
              {"in_channels", c.in_channels},
              {"patch_size", c.patch_size},
              {"embed_dim", c.embed_dim},
              {"depth", c.depth},
              {"num_heads", c.num_heads},
              {"mlp_ratio", c.mlp_ratio},
              {"num_classes", c.num_classes}};
}

json to_json(const FpgaSpec& s) {
  return json{{"name", s.name},
              {"dsp", s.dsp},
              {"lut", s.lut},
              {"bram_18k", s.bram_18k},
              {"port_bits", s.port_bits},
              {"ports_in", s.ports_in},
              {"ports_wgt", s.ports_wgt},
              {"ports_out", s.ports_out},
              {"clock_hz", s.clock_hz},
              {"dsp_ratio", s.dsp_ratio},
              {"lut_ratio", s.lut_ratio},
              {"lut_per_mac", s.lut_per_mac},
              {"lut_per_mac_bit", s.lut_per_mac_bit},
              {"baseline_bits", s.baseline_bits}};
}

json to_json(const AcceleratorParams& p) {
  return json{{"tile_m", p.tile_m},
              {"tile_n", p.tile_n},
              {"tile_m_q", p.tile_m_q},
              {"tile_n_q", p.tile_n_q},
              {"pack", p.pack},
              {"pack_q", p.pack_q},
              {"head_parallel", p.head_parallel},
              {"activation_bits", p.activation_bits}};
}

ViTConfig vit_config_from_json(const json& j) {
  const std::string what = "model config";
  reject_unknown(j,
                 {"name", "image_height", "image_width", "in_channels", "patch_size", "embed_dim",
                  "depth", "num_heads", "mlp_ratio", "num_classes", "comment"},
                 what);
  ViTConfig c;
  take(j, "name", c.name, what);
  take(j, "image_height", c.image_height, what);
  take(j, "image_width", c.image_width, what);
  take(j, "in_channels", c.in_channels, what);
  take(j, "patch_size", c.patch_size, what);
  take(j, "embed_dim", c.embed_dim, what);
  take(j, "depth", c.depth, what);
  take(j, "num_heads", c.num_heads, what);
  take(j, "mlp_ratio", c.mlp_ratio, what);
  take(j, "num_classes", c.num_classes, what);
  c.validate();
  return c;
}

FpgaSpec fpga_spec_from_json(const json& j) {
  const std::string what = "fpga spec";
  reject_unknown(j,
                 {"name", "dsp", "lut", "bram_18k", "port_bits", "ports_in", "ports_wgt",
                  "ports_out", "clock_hz", "dsp_ratio", "lut_ratio", "lut_per_mac",
                  "lut_per_mac_bit", "baseline_bits", "comment"},
                 what);
  FpgaSpec s;
  take(j, "name", s.name, what);
  take(j, "dsp", s.dsp, what);
  take(j, "lut", s.lut, what);
  take(j, "bram_18k", s.bram_18k, what);
  take(j, "port_bits", s.port_bits, what);
  take(j, "ports_in", s.ports_in, what);
  take(j, "ports_wgt", s.ports_wgt, what);
  take(j, "ports_out", s.ports_out, what);
  take(j, "clock_hz", s.clock_hz, what);
  take(j, "dsp_ratio", s.dsp_ratio, what);
  take(j, "lut_ratio", s.lut_ratio, what);
  take(j, "lut_per_mac", s.lut_per_mac, what);
  take(j, "lut_per_mac_bit", s.lut_per_mac_bit, what);
  take(j, "baseline_bits", s.baseline_bits, what);
  s.validate();
  return s;
}

AcceleratorParams accelerator_params_from_json(const json& j) {
  const std::string what = "accelerator params";
  reject_unknown(j,
                 {"tile_m", "tile_n", "tile_m_q", "tile_n_q", "pack", "pack_q", "head_parallel",
                  "activation_bits", "comment"},
                 what);
  AcceleratorParams p;
  take(j, "tile_m", p.tile_m, what);
  take(j, "tile_n", p.tile_n, what);
  take(j, "tile_m_q", p.tile_m_q, what);
  take(j, "tile_n_q", p.tile_n_q, what);
  take(j, "pack", p.pack, what);
  take(j, "pack_q", p.pack_q, what);
  take(j, "head_parallel", p.head_parallel, what);
  take(j, "activation_bits", p.activation_bits, what);
  // Head divisibility needs the model; the caller checks it.
  p.validate(0);
  return p;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

bool has_builtin_model(const std::string& name) {
  return name == "deit-tiny" || name == "deit-small" || name == "deit-base";
}

bool has_builtin_fpga(const std::string& name) { return name == "zcu102"; }

ViTConfig builtin_model(const std::string& name) {
  if (name == "deit-tiny") return deit(name, 192, 3);
  if (name == "deit-small") return deit(name, 384, 6);
  if (name == "deit-base") return deit(name, 768, 12);
  throw ConfigError("unknown model preset '" + name + "'");
}

FpgaSpec builtin_fpga(const std::string& name) {
  if (name != "zcu102") throw ConfigError("unknown fpga preset '" + name + "'");
  // Device totals plus the constants fitted for DeiT-base (see
  // data/calibration/zcu102_deit_base.json).
  FpgaSpec s;
  s.name = "zcu102";
  s.ports_in = 4;
  s.dsp_ratio = 0.62;
  s.lut_ratio = 0.60;
  s.lut_per_mac = 0;
  s.lut_per_mac_bit = 3.5;
  return s;
}

ViTConfig load_model(const std::string& ref) {
  if (std::filesystem::is_regular_file(ref)) return vit_config_from_json(read_json_file(ref));
  if (auto p = preset_file(ref)) return vit_config_from_json(read_json_file(p->string()));
  if (has_builtin_model(ref)) return builtin_model(ref);
  throw ConfigError("model '" + ref + "' is neither a readable file nor a known preset");
}

FpgaSpec load_fpga(const std::string& ref) {
  if (std::filesystem::is_regular_file(ref)) return fpga_spec_from_json(read_json_file(ref));
  if (auto p = preset_file(ref)) return fpga_spec_from_json(read_json_file(p->string()));
  if (has_builtin_fpga(ref)) return builtin_fpga(ref);
  throw ConfigError("fpga spec '" + ref + "' is neither a readable file nor a known preset");
}

AcceleratorParams load_params(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("params file '" + path + "' does not exist");
  }
  return accelerator_params_from_json(read_json_file(path));
}

}  // namespace qvit
