// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures. argv[1] is the qvit CLI binary (criterion 10).

#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "qvit/config_io.hpp"
#include "qvit/dse.hpp"
#include "qvit/engine_sim.hpp"
#include "qvit/error.hpp"
#include "qvit/forward.hpp"
#include "qvit/model_ir.hpp"
#include "qvit/perf_model.hpp"
#include "qvit/quant.hpp"
#include "qvit/verify.hpp"
#include "reference_forward.hpp"

using namespace qvit;
namespace fs = std::filesystem;

namespace {

using Rng = std::mt19937_64;

std::string cli_path;

std::int64_t draw(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

std::int64_t cdiv(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Each check returns an empty string on success or a failure description.
using Check = std::function<std::string(std::ostringstream& detail)>;

std::string crit1(std::ostringstream& d) {
  const std::int64_t a = pack_factor(64, 16), b = pack_factor(64, 8), c = pack_factor(64, 6);
  d << "(64,16)->" << a << " (64,8)->" << b << " (64,6)->" << c;
  return a == 4 && b == 8 && c == 10 ? "" : "packing table mismatch";
}

std::string crit2(std::ostringstream& d) {
  const double ops = count_operations(expand_model(builtin_model("deit-base")));
  const double target = 345.8e9 / 10.0;
  d << "ops/frame " << ops / 1e9 << " G, expected 34.58 G +-5%";
  return std::abs(ops / target - 1.0) <= 0.05 ? "" : "operation count outside tolerance";
}

std::string crit3(std::ostringstream& d) {
  const VerifyOutcome v = run_cycle_equivalence(20240601, 1000, CycleCheckOptions{512, false});
  d << v.cases << " cases, dims <= 512";
  return v.passed && v.cases >= 1000 ? "" : "mismatch: " + v.counterexample;
}

// Naive integer product over the engine operand layout, written here so the
// check does not lean on the library's own oracle.
template <typename W>
CodeMatrix naive(const MatMulLayer& l, const CodeMatrix& x, const RowMatrix<W>& w) {
  const std::int64_t heads = l.head_count;
  const std::int64_t m = l.out_channels;
  if (l.is_attention()) {
    const std::int64_t g = l.in_channels / heads;
    CodeMatrix out = CodeMatrix::Zero(l.tokens, heads * m);
    for (std::int64_t h = 0; h < heads; ++h) {
      const CodeMatrix xh = x.middleCols(h * g, g);
      const CodeMatrix wh = w.middleRows(h * m, m).template cast<std::int64_t>();
      out.middleCols(h * m, m) = xh * wh.transpose();
    }
    return out;
  }
  return x * w.template cast<std::int64_t>().transpose();
}

std::string crit4(std::ostringstream& d) {
  struct Packing {
    std::int64_t pack;
    int bits;
  };
  const Packing settings[] = {{4, 8}, {4, 6}, {2, 4}, {1, 3}};
  Rng rng(77);
  int fc = 0;
  int attn = 0;
  for (int i = 0; i < 240; ++i) {
    const Packing& pk = settings[i % 4];
    MatMulLayer l;
    l.name = "case" + std::to_string(i);
    l.kind = (i / 4) % 3 == 0 ? LayerKind::FC : ((i / 4) % 3 == 1 ? LayerKind::AttentionScore : LayerKind::AttentionContext);
    l.head_count = draw(rng, 1, 4);
    l.out_channels = draw(rng, 1, 64);
    l.tokens = draw(rng, 1, 64);
    l.in_channels = l.is_attention() ? l.head_count * draw(rng, 1, 64 / l.head_count) : draw(rng, 1, 64);
    l.quantized_inputs = i % 2 == 0;
    l.quantized_outputs = (i / 2) % 2 == 0;
    (l.is_attention() ? attn : fc)++;

    AcceleratorParams p;
    p.pack = pk.pack;
    p.activation_bits = pk.bits;
    p.pack_q = pack_factor(64, pk.bits);
    std::vector<std::int64_t> divs;
    for (std::int64_t k = 1; k <= l.head_count; ++k)
      if (l.head_count % k == 0) divs.push_back(k);
    p.head_parallel = divs[static_cast<std::size_t>(draw(rng, 0, static_cast<std::int64_t>(divs.size()) - 1))];
    p.tile_m = p.tile_m_q = draw(rng, 1, l.out_channels);
    p.tile_n = draw(rng, 1, l.group_in_channels());
    p.tile_n_q = draw(rng, 1, l.group_in_channels());

    QuantizedTensor x;
    x.bits = l.quantized_inputs ? pk.bits : 16;
    x.scale = 1;
    x.codes.resize(l.tokens, l.in_channels);
    for (Eigen::Index k = 0; k < x.codes.size(); ++k) x.codes.data()[k] = draw(rng, x.min_code(), x.max_code());

    CodeMatrix got;
    CodeMatrix want;
    if (l.is_attention()) {
      QuantizedTensor w;
      w.bits = pk.bits;
      w.scale = 1;
      w.codes.resize(l.head_count * l.out_channels, l.in_channels / l.head_count);
      for (Eigen::Index k = 0; k < w.codes.size(); ++k) w.codes.data()[k] = draw(rng, w.min_code(), w.max_code());
      got = simulate_matmul_engine(l, p, x, w).acc;
      want = naive(l, x.codes, w.codes);
    } else {
      BinarizedWeights w;
      w.scale = 1;
      w.signs.resize(l.out_channels, l.in_channels);
      for (Eigen::Index k = 0; k < w.signs.size(); ++k) w.signs.data()[k] = draw(rng, 0, 1) ? 1 : -1;
      got = simulate_matmul_engine(l, p, x, w).acc;
      want = naive(l, x.codes, w.signs);
    }
    if (got != want) {
      return "case " + std::to_string(i) + " (" + to_string(l.kind) + " M=" + std::to_string(l.out_channels) +
             " N=" + std::to_string(l.in_channels) + " F=" + std::to_string(l.tokens) + ") differs";
    }
  }
  const VerifyOutcome lib = run_engine_equivalence(5, 200);
  d << fc << " FC + " << attn << " attention cases, 4 (G, G^q) settings, all alpha/beta; library suite "
    << lib.cases << " cases";
  return lib.passed ? "" : "library suite: " + lib.counterexample;
}

struct Calibrated {
  ViTConfig model = builtin_model("deit-base");
  FpgaSpec spec = load_fpga(std::string(QVIT_SOURCE_DIR) + "/data/calibration/zcu102_deit_base.json");
  LayerSchedule schedule = expand_model(model);
  AcceleratorParams baseline = optimize_baseline(schedule, spec);
};

const Calibrated& calibrated() {
  static const Calibrated c;
  return c;
}

std::string crit5(std::ostringstream& d) {
  const Calibrated& c = calibrated();
  const LatencyEstimate base = model_latency(c.schedule, c.baseline, c.spec);
  const PrecisionPoint p8 = evaluate_precision(c.schedule, c.spec, c.baseline, 8);
  const PrecisionPoint p6 = evaluate_precision(c.schedule, c.spec, c.baseline, 6);
  const CompilationResult r24 = search_precision(c.schedule, c.spec, {24.0}, c.baseline);
  const CompilationResult r30 = search_precision(c.schedule, c.spec, {30.0}, c.baseline);
  const double ratio8 = p8.latency.fps / base.fps;
  const double ratio6 = p6.latency.fps / base.fps;
  d << "baseline " << base.fps << " FPS on " << resource_usage(c.baseline, c.spec, c.schedule).dsp
    << " DSPs; FPS8/FPS16 " << ratio8 << " (2.48 +-15%); FPS6/FPS16 " << ratio6
    << " (3.16 +-15%); 24 FPS -> " << r24.bits << " bits; 30 FPS -> " << r30.bits << " bits";
  std::string err;
  if (std::abs(base.fps / 10.0 - 1) > 0.15) err += " baseline FPS off;";
  if (!p8.realizable || std::abs(ratio8 / 2.48 - 1) > 0.15) err += " 8-bit ratio off;";
  if (!p6.realizable || std::abs(ratio6 / 3.16 - 1) > 0.15) err += " 6-bit ratio off;";
  if (!r24.feasible || r24.bits != 8) err += " 24 FPS not at 8 bits;";
  if (!r30.feasible || r30.bits != 6) err += " 30 FPS not at 6 bits;";
  return err;
}

std::string crit6(std::ostringstream& d) {
  const Calibrated& c = calibrated();
  int worst = 0;
  int runs = 0;
  for (double fps : {11.0, 15.0, 20.0, 24.0, 27.0, 30.0, 45.0, 60.0, 100.0}) {
    const CompilationResult r = search_precision(c.schedule, c.spec, {fps}, c.baseline);
    if (r.linear_scan) return "target " + std::to_string(fps) + " left the monotone path";
    worst = std::max(worst, r.evaluations);
    ++runs;
  }
  d << runs << " targets, at most " << worst << " precision evaluations";
  return worst <= 5 ? "" : "more than 5 evaluations";
}

// BRAM / DSP / LUT usage recomputed from the parameter set alone.
struct Usage {
  std::int64_t bram;
  std::int64_t dsp;
  double lut;
};

Usage recompute(const AcceleratorParams& p, const FpgaSpec& s, std::int64_t heads, std::int64_t f) {
  const std::int64_t base = s.baseline_bits;
  auto blocks = [](std::int64_t tile, std::int64_t pack, std::int64_t depth, std::int64_t bits) {
    return cdiv(tile, pack) * cdiv(depth * pack * bits, 18432);
  };
  const std::int64_t in = std::max(blocks(p.tile_n, p.pack, f, base), blocks(p.tile_n_q, p.pack_q, f, p.activation_bits));
  const std::int64_t wgt = std::max(blocks(p.tile_n, p.pack, p.tile_m, base), blocks(p.tile_n_q, p.pack_q, p.tile_m, 1));
  const std::int64_t out = std::max(blocks(p.tile_m, p.pack, f, base), blocks(p.tile_m_q, p.pack_q, f, p.activation_bits));
  Usage u;
  u.bram = 2 * heads * (in + wgt + out);
  u.dsp = p.tile_m * p.head_parallel * p.tile_n;
  u.lut = p.activation_bits < base
              ? (s.lut_per_mac + s.lut_per_mac_bit * p.activation_bits) *
                    static_cast<double>(p.tile_m_q * p.head_parallel * p.tile_n_q)
              : 0.0;
  return u;
}

std::string crit7(std::ostringstream& d) {
  Rng rng(4242);
  const char* models[] = {"deit-tiny", "deit-small"};
  LayerSchedule schedules[] = {expand_model(builtin_model(models[0])), expand_model(builtin_model(models[1]))};
  int feasible = 0;
  int infeasible = 0;
  int no_baseline = 0;
  for (int i = 0; i < 500; ++i) {
    const LayerSchedule& s = schedules[i % 2];
    FpgaSpec spec;
    spec.name = "rand" + std::to_string(i);
    spec.dsp = draw(rng, 64, 4000);
    spec.lut = draw(rng, 20000, 900000);
    spec.bram_18k = draw(rng, 100, 4000);
    spec.ports_in = static_cast<int>(draw(rng, 1, 4));
    spec.ports_wgt = static_cast<int>(draw(rng, 1, 4));
    spec.ports_out = static_cast<int>(draw(rng, 1, 4));
    spec.dsp_ratio = std::uniform_real_distribution<double>(0.3, 1.0)(rng);
    spec.lut_ratio = std::uniform_real_distribution<double>(0.3, 1.0)(rng);
    spec.lut_per_mac = std::uniform_real_distribution<double>(0, 16)(rng);
    spec.lut_per_mac_bit = std::uniform_real_distribution<double>(0.1, 4)(rng);
    const double target = std::exp(std::uniform_real_distribution<double>(std::log(1.0), std::log(5000.0))(rng));

    AcceleratorParams base;
    try {
      base = optimize_baseline(s, spec);
    } catch (const InfeasibleError& e) {
      // The device cannot host even the baseline; that verdict must explain itself.
      if (std::string(e.what()).empty()) return "empty baseline diagnostic";
      ++no_baseline;
      continue;
    }
    const CompilationResult r = search_precision(s, spec, {target}, base);
    if (r.feasible) {
      ++feasible;
      const Usage u = recompute(r.params, spec, s.num_heads, s.max_tokens());
      if (u.bram > spec.bram_18k || static_cast<double>(u.dsp) > spec.dsp * spec.dsp_ratio ||
          u.lut > spec.lut * spec.lut_ratio) {
        return "case " + std::to_string(i) + " violates a resource constraint";
      }
      std::int64_t cycles = 0;
      for (const auto& l : s.matmul_layers()) cycles += layer_cycles(l, r.params, spec).total;
      if (spec.clock_hz / static_cast<double>(cycles) < target) {
        return "case " + std::to_string(i) + " misses its frame-rate target";
      }
    } else {
      ++infeasible;
      std::string diag = r.diagnostic;
      for (char& ch : diag) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      bool explained = false;
      for (const char* key : {"fr_max", "bram", "dsp", "lut"}) explained |= diag.find(key) != std::string::npos;
      if (!explained) return "case " + std::to_string(i) + " infeasible without diagnostic: " + r.diagnostic;
    }
  }
  d << feasible << " feasible, " << infeasible << " infeasible, " << no_baseline << " without a baseline";
  return feasible > 0 && infeasible > 0 ? "" : "randomized draws did not cover both verdicts";
}

std::string crit8(std::ostringstream& d) {
  Rng rng(88);
  std::normal_distribution<double> nd;
  int zeros = 0;
  for (int i = 0; i < 100; ++i) {
    Eigen::MatrixXd w(draw(rng, 1, 12), draw(rng, 1, 12));
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = draw(rng, 0, 5) == 0 ? 0.0 : nd(rng);
    const BinarizedWeights b = binarize_weights(w);
    double l1 = 0;
    for (Eigen::Index k = 0; k < w.size(); ++k) l1 += std::abs(w.data()[k]);
    if (std::abs(b.scale - l1 / static_cast<double>(w.size())) > 1e-12 * (1 + l1)) return "scale is not mean |w|";
    const double c = std::exp(nd(rng));
    if (binarize_weights(c * w).signs != b.signs) return "signs change under positive scaling";
    const Eigen::MatrixXd rec = b.reconstruct();
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double want = w.data()[k] > 0 ? b.scale : -b.scale;
      if (rec.data()[k] != want) return "reconstruction mismatch";
      if (w.data()[k] == 0.0) ++zeros;
    }
  }
  d << "100 matrices, " << zeros << " zero entries mapped to -scale";
  return zeros > 0 ? "" : "no zero entries drawn";
}

std::string crit9(std::ostringstream& d) {
  const ViTConfig c = ref::toy_config();
  ForwardOptions opt;
  opt.activation_bits = 16;
  opt.weights = WeightMode::Identity;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ModelWeights w = synthesize_weights(c, seed);
    const Eigen::MatrixXd img = synthesize_image(c, seed + 100);
    const Eigen::VectorXd got = run_encoder_forward(c, w, img, opt);
    const Eigen::VectorXd want = ref::forward(c, w, img);
    worst = std::max(worst, (got - want).norm() / want.norm());
  }
  d << "L=" << c.depth << " M=" << c.embed_dim << ", worst relative error " << worst;
  return worst <= 1e-3 ? "" : "relative error above 1e-3";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string crit10(std::ostringstream& d) {
  if (cli_path.empty()) return "CLI path not given";
  const fs::path root = fs::temp_directory_path() / ("qvit_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) {
    const std::string cmd = "\"" + cli_path + "\" compile --model deit-base --fpga zcu102 --target-fps 24 30 --out \"" +
                            (root / run).string() + "\" > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return std::string("compile run ") + run + " failed";
  }
  int files = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    const fs::path other = root / "b" / e.path().filename();
    if (!fs::exists(other)) return e.path().filename().string() + " missing from second run";
    if (slurp(e.path()) != slurp(other)) return e.path().filename().string() + " differs between runs";
    ++files;
  }
  std::size_t count_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / "b")) ++count_b;
  fs::remove_all(root);
  d << files << " output files byte-identical";
  return files >= 3 && count_b == static_cast<std::size_t>(files) ? "" : "unexpected output set";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) cli_path = argv[1];
  const std::pair<const char*, Check> criteria[] = {
      {"packing table", crit1},
      {"operation count", crit2},
      {"cycle/formula equivalence", crit3},
      {"engine/oracle equivalence", crit4},
      {"calibrated ratio reproduction", crit5},
      {"search economy", crit6},
      {"constraint soundness", crit7},
      {"binarization properties", crit8},
      {"end-to-end functional sanity", crit9},
      {"determinism", crit10},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [name, check] : criteria) {
    ++n;
    std::ostringstream detail;
    const auto t0 = std::chrono::steady_clock::now();
    std::string err;
    try {
      err = check(detail);
    } catch (const std::exception& e) {
      err = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.2fs)%s%s\n", err.empty() ? "PASS" : "FAIL", n, name, detail.str().c_str(),
                secs, err.empty() ? "" : " -- ", err.c_str());
    if (!err.empty()) ++failures;
  }
  std::printf("%d/%d criteria passed\n", n - failures, n);
  return failures;
}
