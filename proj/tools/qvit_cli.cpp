// qvit: compile, estimate, simulate and verify from the command line.
//
// Exit codes: 0 ok, 1 verification mismatch, 2 configuration error,
// 3 infeasible target or parameters.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "CLI11.hpp"

#include "qvit/config_io.hpp"
#include "qvit/dse.hpp"
#include "qvit/emit.hpp"
#include "qvit/engine_sim.hpp"
#include "qvit/error.hpp"
#include "qvit/forward.hpp"
#include "qvit/tensor_io.hpp"
#include "qvit/verify.hpp"

namespace fs = std::filesystem;
using namespace qvit;

namespace {

constexpr int kOk = 0;
constexpr int kMismatch = 1;
constexpr int kConfigError = 2;
constexpr int kInfeasible = 3;

int verbosity = 0;

void log(int level, const std::string& msg) {
  if (verbosity >= level) std::cerr << msg << "\n";
}

// Temp file next to the target, then rename, so readers never see a partial file.
void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out.flush()) throw ConfigError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open template '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

struct ModelArgs {
  std::string model = "deit-base";
  std::string fpga = "zcu102";
};

void add_model_args(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--model", a.model, "model preset (deit-tiny, deit-small, deit-base) or JSON file")
      ->capture_default_str();
  cmd->add_option("--fpga", a.fpga, "device preset (zcu102) or JSON file")->capture_default_str();
}

// ---- compile ---------------------------------------------------------------

struct CompileArgs {
  ModelArgs m;
  std::vector<double> targets;
  std::string out = "qvit-out";
  std::string template_path;
  int min_bits = 1;
  int max_bits = 0;
};

int run_compile(const CompileArgs& a) {
  const ViTConfig model = load_model(a.m.model);
  const FpgaSpec spec = load_fpga(a.m.fpga);
  const LayerSchedule schedule = expand_model(model);
  const std::string tmpl = a.template_path.empty() ? builtin_accelerator_template() : read_text(a.template_path);

  log(1, "model " + model.name + ": " + fmt(count_operations(schedule) / 1e9, 3) + " G ops/frame");
  const AcceleratorParams baseline = optimize_baseline(schedule, spec);
  log(1, "baseline T_m=" + std::to_string(baseline.tile_m) + " T_n=" + std::to_string(baseline.tile_n) +
             " FPS=" + fmt(model_latency(schedule, baseline, spec).fps));

  ReportInput in{model, spec, baseline, {}};
  for (double t : a.targets) {
    SearchTarget target{t, a.min_bits, a.max_bits > 0 ? a.max_bits : spec.baseline_bits};
    in.results.push_back(search_precision(schedule, spec, target, baseline));
  }

  const fs::path dir(a.out);
  std::set<int> emitted;
  bool all_feasible = true;
  for (const auto& r : in.results) {
    if (!r.feasible) {
      all_feasible = false;
      std::cout << "target " << fmt(r.target.fps) << " FPS: infeasible (" << r.diagnostic << ")\n";
      continue;
    }
    std::cout << "target " << fmt(r.target.fps) << " FPS: W1A" << r.bits << ", " << fmt(r.latency.fps)
              << " FPS, DSP " << r.usage.dsp << ", kLUT " << fmt(r.usage.lut_mac / 1000.0, 1) << ", BRAM18 "
              << r.usage.bram_18k << " (" << r.evaluations << " evaluations"
              << (r.linear_scan ? ", linear scan" : "") << ")\n";
    if (emitted.insert(r.bits).second) {
      const fs::path src = dir / ("accelerator_a" + std::to_string(r.bits) + ".hpp");
      write_atomic(src, emit_accelerator_source(r.params, schedule, spec, tmpl));
      log(1, "wrote " + src.string());
    }
  }
  write_atomic(dir / "report.json", emit_report(in, schedule));
  log(1, "wrote " + (dir / "report.json").string());
  return all_feasible ? kOk : kInfeasible;
}

// ---- estimate --------------------------------------------------------------

struct EstimateArgs {
  ModelArgs m;
  std::string params;
  std::string out;
};

int run_estimate(const EstimateArgs& a) {
  const ViTConfig model = load_model(a.m.model);
  const FpgaSpec spec = load_fpga(a.m.fpga);
  const AcceleratorParams p = load_params(a.params);
  p.validate(model.num_heads, spec.baseline_bits);
  const LayerSchedule schedule = expand_model(model);

  CompilationResult r;
  r.bits = p.activation_bits;
  r.params = p;
  r.latency = model_latency(schedule, p, spec);
  r.usage = resource_usage(p, spec, schedule);
  r.check = check_constraints(r.usage, spec);
  r.feasible = r.check.feasible;
  if (!r.feasible) r.diagnostic = std::string("over budget: ") + to_string(r.check.binding);

  std::cout << "W1A" << r.bits << ": " << fmt(r.latency.fps) << " FPS, " << r.latency.total_cycles
            << " cycles, DSP " << r.usage.dsp << ", kLUT " << fmt(r.usage.lut_mac / 1000.0, 1) << ", BRAM18 "
            << r.usage.bram_18k << (r.feasible ? "" : " [" + r.diagnostic + "]") << "\n";
  if (!a.out.empty()) {
    write_atomic(fs::path(a.out) / "report.json", emit_report(ReportInput{model, spec, std::nullopt, {r}}, schedule));
  }
  return r.feasible ? kOk : kInfeasible;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  ModelArgs m;
  std::string params;
  int bits = 0;
  std::string layer;
  std::string trace;
  std::string inputs;
  std::string weights;
  std::string output;
  bool forward = false;
  std::uint64_t seed = 1;
};

std::string trace_json(const TileTrace& t) {
  nlohmann::ordered_json j;
  j["truncated"] = t.truncated;
  nlohmann::ordered_json ev = nlohmann::ordered_json::array();
  for (const auto& e : t.events) {
    ev.push_back({{"kind", to_string(e.kind)}, {"tile", e.out_tile}, {"step", e.step},
                  {"start", e.start}, {"end", e.end}, {"bubble", e.bubble}});
  }
  j["events"] = ev;
  return j.dump(1) + "\n";
}

int run_forward(const ViTConfig& model, const SimulateArgs& a) {
  ForwardOptions opt;
  opt.activation_bits = a.bits > 0 ? a.bits : 8;
  const ModelWeights w = synthesize_weights(model, a.seed);
  const Eigen::VectorXd scores = run_encoder_forward(model, w, synthesize_image(model, a.seed + 1), opt);
  Eigen::Index best = 0;
  scores.maxCoeff(&best);
  std::cout << "class scores (W1A" << opt.activation_bits << ", seed " << a.seed << "), argmax " << best << ":\n";
  for (Eigen::Index i = 0; i < scores.size(); ++i) std::cout << "  " << i << " " << fmt(scores(i), 6) << "\n";
  return kOk;
}

int run_simulate(const SimulateArgs& a) {
  const ViTConfig model = load_model(a.m.model);
  if (a.forward) return run_forward(model, a);
  const FpgaSpec spec = load_fpga(a.m.fpga);
  const LayerSchedule schedule = expand_model(model);

  AcceleratorParams p;
  if (!a.params.empty()) {
    p = load_params(a.params);
    p.validate(model.num_heads, spec.baseline_bits);
  } else {
    const AcceleratorParams base = optimize_baseline(schedule, spec);
    const PrecisionPoint pt = evaluate_precision(schedule, spec, base, a.bits > 0 ? a.bits : spec.baseline_bits);
    if (!pt.realizable) throw InfeasibleError(pt.diagnostic);
    p = pt.params;
  }

  std::vector<MatMulLayer> layers;
  for (const auto& l : schedule.matmul_layers()) {
    if (a.layer.empty() || l.name == a.layer) layers.push_back(l);
  }
  if (layers.empty()) throw ConfigError("no matmul layer named '" + a.layer + "'");

  if (!a.inputs.empty() || !a.weights.empty()) {
    if (a.inputs.empty() || a.weights.empty() || a.layer.empty() || a.output.empty()) {
      throw ConfigError("engine mode needs --layer, --inputs, --weights and --output");
    }
    const MatMulLayer& l = layers.front();
    QuantizedTensor x;
    x.bits = l.quantized_inputs ? p.activation_bits : spec.baseline_bits;
    x.scale = 1.0;
    x.codes = read_tensor(a.inputs).to_codes();
    const TensorFile wf = read_tensor(a.weights);
    EngineResult r;
    if (wf.dtype == TensorDType::I8) {
      BinarizedWeights w{wf.to_signs(), 1.0};
      r = simulate_matmul_engine(l, p, x, w, spec.port_bits);
    } else {
      QuantizedTensor w{wf.to_codes(), 1.0, x.bits};
      r = simulate_matmul_engine(l, p, x, w, spec.port_bits);
    }
    write_tensor(a.output, r.acc);
    std::cout << "engine output " << r.acc.rows() << "x" << r.acc.cols() << " written to " << a.output << "\n";
    return kOk;
  }

  CycleSimOptions opt;
  opt.record_trace = !a.trace.empty();
  bool ok = true;
  std::int64_t sim_total = 0;
  std::int64_t model_total = 0;
  TileTrace first_trace;
  for (const auto& l : layers) {
    const CycleSimResult sim = simulate_cycles(l, p, spec, opt);
    const std::int64_t expected = layer_cycles(l, p, spec).total;
    sim_total += sim.total_cycles;
    model_total += expected;
    if (sim.total_cycles != expected) ok = false;
    if (opt.record_trace) {
      if (const auto hazard = find_trace_hazard(sim.trace)) {
        std::cerr << l.name << ": " << *hazard << "\n";
        ok = false;
      }
      if (first_trace.events.empty()) first_trace = sim.trace;
    }
    log(1, l.name + ": simulated " + std::to_string(sim.total_cycles) + ", model " + std::to_string(expected));
  }
  std::cout << layers.size() << " layers, W1A" << p.activation_bits << ": simulated " << sim_total
            << " cycles, model " << model_total << " cycles" << (ok ? "" : " MISMATCH") << "\n";
  if (!a.trace.empty()) write_atomic(a.trace, trace_json(first_trace));
  return ok ? kOk : kMismatch;
}

// ---- verify ----------------------------------------------------------------

struct VerifyArgs {
  std::uint64_t seed = 1;
  std::int64_t cases = 1000;
  std::int64_t engine_cases = 200;
  bool inject_fault = false;
};

int run_verify(const VerifyArgs& a) {
  CycleCheckOptions copt;
  copt.inject_off_by_one = a.inject_fault;
  const VerifyOutcome outcomes[] = {run_cycle_equivalence(a.seed, a.cases, copt),
                                    run_engine_equivalence(a.seed, a.engine_cases)};
  bool ok = true;
  for (const auto& o : outcomes) {
    std::cout << o.suite << ": " << o.cases << " cases, " << (o.passed ? "pass" : "FAIL") << "\n";
    if (!o.passed) {
      std::cout << "  counterexample: " << o.counterexample << "\n";
      ok = false;
    }
  }
  return ok ? kOk : kMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Precision and accelerator parameter search for binary-weight ViTs on FPGAs"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("-v,--verbose", verbosity, "more output on stderr (repeat for more)");
  app.set_version_flag("--version", kToolVersion);

  CompileArgs ca;
  auto* compile = app.add_subcommand("compile", "search the activation precision for each target frame rate");
  add_model_args(compile, ca.m);
  compile->add_option("--target-fps", ca.targets, "one or more target frame rates")
      ->required()
      ->check(CLI::PositiveNumber);
  compile->add_option("--out", ca.out, "output directory")->capture_default_str();
  compile->add_option("--template", ca.template_path, "accelerator source template (default: built in)");
  compile->add_option("--min-bits", ca.min_bits, "lowest activation precision")->check(CLI::Range(1, 64));
  compile->add_option("--max-bits", ca.max_bits, "highest activation precision (default: baseline bits)")
      ->check(CLI::Range(1, 64));

  EstimateArgs ea;
  auto* estimate = app.add_subcommand("estimate", "evaluate latency and resources for fixed parameters");
  add_model_args(estimate, ea.m);
  estimate->add_option("--params", ea.params, "accelerator parameter JSON")->required();
  estimate->add_option("--out", ea.out, "write report.json into this directory");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "replay layers in the cycle simulator or the functional engine");
  add_model_args(simulate, sa.m);
  simulate->add_option("--params", sa.params, "accelerator parameter JSON (default: searched for --bits)");
  simulate->add_option("--bits", sa.bits, "activation precision when no params file is given")
      ->check(CLI::Range(1, 64));
  simulate->add_option("--layer", sa.layer, "restrict to one matmul layer by name");
  simulate->add_option("--trace", sa.trace, "write the tile trace of the first layer as JSON");
  simulate->add_option("--inputs", sa.inputs, "input code tensor file (engine mode)");
  simulate->add_option("--weights", sa.weights, "weight tensor file, i8 signs or i64 codes (engine mode)");
  simulate->add_option("--output", sa.output, "accumulator tensor file to write (engine mode)");
  simulate->add_flag("--forward", sa.forward, "run the functional forward pass on synthetic weights");
  simulate->add_option("--seed", sa.seed, "seed for --forward")->capture_default_str();

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "run the engine/oracle and cycle/formula equivalence suites");
  verify->add_option("--seed", va.seed, "random seed")->capture_default_str();
  verify->add_option("--cases", va.cases, "cycle/formula cases")->capture_default_str()->check(CLI::PositiveNumber);
  verify->add_option("--engine-cases", va.engine_cases, "engine/oracle cases")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify->add_flag("--inject-fault", va.inject_fault, "add one cycle to every simulated drain (must fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (compile->parsed()) return run_compile(ca);
    if (estimate->parsed()) return run_estimate(ea);
    if (simulate->parsed()) return run_simulate(sa);
    if (verify->parsed()) return run_verify(va);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
