#include "qvit/emit.hpp"

#include <regex>
#include <sstream>

#include "qvit/config_io.hpp"
#include "qvit/error.hpp"

namespace qvit {

namespace {

using nlohmann::ordered_json;

const char kEmbeddedTemplate[] =
#include "accelerator_template.inc"
    ;

double percent(double used, double total) { return total > 0 ? 100.0 * used / total : 0.0; }

std::int64_t ceil_log2(std::int64_t n) {
  std::int64_t b = 0;
  while ((std::int64_t{1} << b) < n) ++b;
  return b;
}

ordered_json params_json(const AcceleratorParams& p) { return to_json(p); }

ordered_json layer_json(const MatMulLayer& l, const LayerCost& c, int bits, int baseline_bits) {
  const int operand_bits = l.quantized_inputs ? bits : baseline_bits;
  ordered_json j;
  j["name"] = l.name;
  j["kind"] = to_string(l.kind);
  j["out_channels"] = l.out_channels;
  j["in_channels"] = l.in_channels;
  j["tokens"] = l.tokens;
  j["head_count"] = l.head_count;
  j["quantized_inputs"] = l.quantized_inputs;
  j["quantized_outputs"] = l.quantized_outputs;
  j["operations"] = count_operations(l);
  // Exact accumulation of group_in signed operands.
  j["accumulator_bits"] = ceil_log2(l.group_in_channels()) + operand_bits;
  j["cycles"] = ordered_json{{"in", c.in},   {"wgt", c.wgt}, {"out", c.out}, {"cmpt", c.cmpt},
                             {"lc", c.lc},   {"s", c.s},     {"total", c.total}};
  return j;
}

ordered_json result_json(const CompilationResult& r, const LayerSchedule& schedule,
                         const FpgaSpec& spec, double ops) {
  ordered_json j;
  j["mode"] = r.target.fps > 0 ? "compile" : "estimate";
  j["target_fps"] = r.target.fps > 0 ? ordered_json(r.target.fps) : ordered_json(nullptr);
  j["feasible"] = r.feasible;
  if (r.target.fps > 0) {
    j["fr_max"] = r.fr_max;
    j["evaluations"] = r.evaluations;
    j["linear_scan"] = r.linear_scan;
  }
  j["diagnostic"] = r.diagnostic.empty() ? ordered_json(nullptr) : ordered_json(r.diagnostic);
  j["binding_resource"] = to_string(r.check.binding);
  if (r.bits == 0) return j;

  j["activation_bits"] = r.bits;
  j["params"] = params_json(r.params);

  const double dsp = static_cast<double>(r.usage.dsp);
  const double klut = r.usage.lut_mac / 1000.0;
  ordered_json perf;
  perf["total_cycles"] = r.latency.total_cycles;
  perf["latency_s"] = r.latency.seconds;
  perf["fps"] = r.latency.fps;
  perf["gops"] = ops * r.latency.fps / 1e9;
  perf["gops_per_dsp"] = dsp > 0 ? ordered_json(ops * r.latency.fps / 1e9 / dsp) : ordered_json(nullptr);
  perf["gops_per_klut"] = klut > 0 ? ordered_json(ops * r.latency.fps / 1e9 / klut) : ordered_json(nullptr);
  j["performance"] = perf;

  ordered_json res;
  res["bram_18k"] = r.usage.bram_18k;
  res["bram_36k"] = static_cast<double>(r.usage.bram_18k) / 2.0;
  res["bram_in"] = r.usage.bram_in;
  res["bram_wgt"] = r.usage.bram_wgt;
  res["bram_out"] = r.usage.bram_out;
  res["dsp"] = r.usage.dsp;
  res["lut_mac"] = r.usage.lut_mac;
  res["percent"] = ordered_json{{"bram", percent(static_cast<double>(r.usage.bram_18k), static_cast<double>(spec.bram_18k))},
                                {"dsp", percent(dsp, static_cast<double>(spec.dsp))},
                                {"lut", percent(r.usage.lut_mac, static_cast<double>(spec.lut))}};
  res["slack"] = ordered_json{{"bram", r.check.bram_slack}, {"dsp", r.check.dsp_slack}, {"lut", r.check.lut_slack}};
  j["resources"] = res;

  ordered_json layers = ordered_json::array();
  const auto mm = schedule.matmul_layers();
  for (std::size_t i = 0; i < mm.size() && i < r.latency.layers.size(); ++i) {
    layers.push_back(layer_json(mm[i], r.latency.layers[i], r.bits, spec.baseline_bits));
  }
  j["layers"] = layers;
  return j;
}

std::string layer_table(const LayerSchedule& schedule) {
  std::ostringstream os;
  const auto layers = schedule.matmul_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const char* kind = l.kind == LayerKind::FC ? "FC"
                       : l.kind == LayerKind::AttentionScore ? "ATTENTION_SCORE"
                                                             : "ATTENTION_CONTEXT";
    os << "    {\"" << l.name << "\", " << kind << ", " << l.out_channels << ", " << l.in_channels
       << ", " << l.tokens << ", " << l.head_count << ", " << (l.quantized_inputs ? "true" : "false")
       << ", " << (l.quantized_outputs ? "true" : "false") << "}";
    if (i + 1 < layers.size()) os << ",\n";
  }
  return os.str();
}

}  // namespace

ordered_json build_report(const ReportInput& input, const LayerSchedule& schedule) {
  if (input.results.empty()) throw ConfigError("report needs at least one result");
  const double ops = count_operations(schedule);

  ordered_json doc;
  doc["tool"] = ordered_json{{"name", "qvit"}, {"version", kToolVersion}};

  ordered_json model = to_json(input.model);
  model["tokens"] = input.model.num_tokens();
  model["matmul_layers"] = schedule.matmul_layers().size();
  model["operations_per_frame"] = ops;
  doc["model"] = model;

  doc["fpga"] = to_json(input.spec);

  if (input.baseline) {
    const LatencyEstimate est = model_latency(schedule, *input.baseline, input.spec);
    const ResourceUsage u = resource_usage(*input.baseline, input.spec, schedule);
    ordered_json b;
    b["params"] = params_json(*input.baseline);
    b["fps"] = est.fps;
    b["total_cycles"] = est.total_cycles;
    b["dsp"] = u.dsp;
    b["bram_18k"] = u.bram_18k;
    doc["baseline"] = b;
  } else {
    doc["baseline"] = nullptr;
  }

  ordered_json results = ordered_json::array();
  for (const auto& r : input.results) results.push_back(result_json(r, schedule, input.spec, ops));
  doc["results"] = results;

  doc["assumptions"] = ordered_json::array({
      "host operations (layer norm, softmax, scaling, GELU, skip add, concat, positional add) cost zero accelerator cycles",
      "cycle counts come from the closed-form tile model; DDR latency and AXI contention are not modeled",
      "lut_mac counts only LUTs spent on quantized MACs: (lut_per_mac + lut_per_mac_bit * bits) * T_m^q * P_h * T_n^q",
      "BRAM is counted in 18k-bit blocks; bram_36k is half of that figure",
      "BRAM buffers are sized for the longest token sequence in the schedule",
      "calibration constants are taken from the fpga section as given",
      "host operations are evaluated in double precision; 16-bit rounding of norms on hardware is not modeled",
      "accumulators are exact integers; accumulator_bits per layer is the width needed to avoid overflow",
  });
  return doc;
}

std::string emit_report(const ReportInput& input, const LayerSchedule& schedule) {
  return build_report(input, schedule).dump(2) + "\n";
}

const std::string& builtin_accelerator_template() {
  static const std::string t(kEmbeddedTemplate);
  return t;
}

std::string packing_summary(int port_bits, int value_bits) {
  const std::int64_t n = pack_factor(port_bits, value_bits);
  return std::to_string(n) + " x " + std::to_string(value_bits) + "-bit values, " +
         std::to_string(n * value_bits) + " of " + std::to_string(port_bits) + " bits used";
}

std::map<std::string, std::string> template_values(const AcceleratorParams& p,
                                                   const LayerSchedule& schedule,
                                                   const FpgaSpec& spec) {
  std::map<std::string, std::string> v;
  v["model_name"] = schedule.model_name;
  v["fpga_name"] = spec.name;
  v["port_bits"] = std::to_string(spec.port_bits);
  v["baseline_bits"] = std::to_string(spec.baseline_bits);
  v["activation_bits"] = std::to_string(p.activation_bits);
  v["tile_m"] = std::to_string(p.tile_m);
  v["tile_n"] = std::to_string(p.tile_n);
  v["tile_m_q"] = std::to_string(p.tile_m_q);
  v["tile_n_q"] = std::to_string(p.tile_n_q);
  v["pack"] = std::to_string(p.pack);
  v["pack_q"] = std::to_string(p.pack_q);
  v["head_parallel"] = std::to_string(p.head_parallel);
  v["num_heads"] = std::to_string(schedule.num_heads);
  v["max_tokens"] = std::to_string(schedule.max_tokens());
  v["packing_baseline"] = packing_summary(spec.port_bits, spec.baseline_bits);
  v["packing_quantized"] = packing_summary(spec.port_bits, p.activation_bits);
  v["layer_count"] = std::to_string(schedule.matmul_layers().size());
  v["layer_table"] = layer_table(schedule);
  v["pipeline_pragma"] = "#pragma HLS PIPELINE II=1";
  v["unroll_m_pragma"] = "#pragma HLS UNROLL";
  v["unroll_h_pragma"] = "#pragma HLS UNROLL";
  v["unroll_n_pragma"] = "#pragma HLS UNROLL";
  v["partition_pragmas"] =
      "#pragma HLS ARRAY_PARTITION variable=in_buf complete dim=2\n"
      "#pragma HLS ARRAY_PARTITION variable=w_buf complete dim=2\n"
      "#pragma HLS ARRAY_PARTITION variable=w_buf complete dim=3\n"
      "#pragma HLS ARRAY_PARTITION variable=out_buf complete dim=2";
  return v;
}

std::string emit_accelerator_source(const AcceleratorParams& params, const LayerSchedule& schedule,
                                    const FpgaSpec& spec, const std::string& tmpl) {
  const auto values = template_values(params, schedule, spec);
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = tmpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    const std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) throw ConfigError("template has an unterminated '{{' marker");
    const std::string key = tmpl.substr(open + 2, close - open - 2);
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError("template uses unknown placeholder '{{" + key + "}}'");
    out.append(tmpl, pos, open - pos);
    out += it->second;
    pos = close + 2;
  }
  if (out.find("{{") != std::string::npos) throw ConfigError("placeholder marker left in generated source");
  return out;
}

AcceleratorParams parse_accelerator_constants(const std::string& source) {
  static const std::regex re(R"(constexpr\s+int\s+([A-Z_]+)\s*=\s*(-?\d+)\s*;)");
  std::map<std::string, std::int64_t> found;
  for (auto it = std::sregex_iterator(source.begin(), source.end(), re); it != std::sregex_iterator(); ++it) {
    found[(*it)[1].str()] = std::stoll((*it)[2].str());
  }
  auto need = [&](const char* name) {
    const auto it = found.find(name);
    if (it == found.end()) throw ConfigError(std::string("generated source lacks constant ") + name);
    return it->second;
  };
  AcceleratorParams p;
  p.tile_m = need("TILE_M");
  p.tile_n = need("TILE_N");
  p.tile_m_q = need("TILE_M_Q");
  p.tile_n_q = need("TILE_N_Q");
  p.pack = need("PACK");
  p.pack_q = need("PACK_Q");
  p.head_parallel = need("HEAD_PARALLEL");
  p.activation_bits = static_cast<int>(need("ACTIVATION_BITS"));
  return p;
}

}  // namespace qvit
