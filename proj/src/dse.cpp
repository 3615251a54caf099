#include "qvit/dse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "qvit/error.hpp"

namespace qvit {

namespace {

struct Evaluator {
  const std::vector<MatMulLayer>& layers;
  const FpgaSpec& spec;
  std::int64_t heads;
  std::int64_t tokens;

  bool fits(const AcceleratorParams& p) const {
    return check_constraints(resource_usage(p, spec, heads, tokens), spec).feasible;
  }
  std::int64_t cycles(const AcceleratorParams& p) const { return total_cycles(layers, p, spec); }
};

std::int64_t max_out_channels(const std::vector<MatMulLayer>& layers, bool quantized) {
  std::int64_t m = 0;
  for (const auto& l : layers) {
    if (l.quantized_outputs == quantized) m = std::max(m, l.out_channels);
  }
  return m;
}

// Best T_m^q for fixed remaining parameters. Starting from a fitting point it
// only moves up, and only for a strict cycle gain; from an over-budget point it
// falls to the largest multiple that fits.
std::optional<AcceleratorParams> fit_tile_m_q(AcceleratorParams p, const Evaluator& ev,
                                              std::int64_t step, std::int64_t limit) {
  if (!ev.fits(p)) {
    for (p.tile_m_q -= step; p.tile_m_q >= step; p.tile_m_q -= step) {
      if (ev.fits(p)) return p;
    }
    return std::nullopt;
  }
  AcceleratorParams best = p;
  std::int64_t best_cycles = ev.cycles(p);
  for (AcceleratorParams q = p; q.tile_m_q + step <= limit;) {
    q.tile_m_q += step;
    if (!ev.fits(q)) break;
    const std::int64_t c = ev.cycles(q);
    if (c < best_cycles) {
      best = q;
      best_cycles = c;
    }
  }
  return best;
}

}  // namespace

std::int64_t default_head_parallel(std::int64_t num_heads) {
  for (std::int64_t p = std::min<std::int64_t>(4, num_heads); p > 1; --p) {
    if (num_heads % p == 0) return p;
  }
  return 1;
}

AcceleratorParams optimize_baseline(const LayerSchedule& schedule, const FpgaSpec& spec) {
  spec.validate();
  const auto layers = schedule.matmul_layers();
  if (layers.empty()) throw ConfigError("schedule contains no matmul layers");

  const std::int64_t g = pack_factor(spec.port_bits, spec.baseline_bits);
  std::int64_t max_m = 0;
  std::int64_t max_n = 0;
  for (const auto& l : layers) {
    max_m = std::max(max_m, l.out_channels);
    max_n = std::max(max_n, l.group_in_channels());
  }
  // Tile ranges start at one packed word even for layers narrower than G.
  max_m = std::max(max_m, g);
  max_n = std::max(max_n, g);

  const Evaluator ev{layers, spec, schedule.num_heads, schedule.max_tokens()};
  AcceleratorParams p;
  p.pack = p.pack_q = g;
  p.head_parallel = default_head_parallel(schedule.num_heads);
  p.activation_bits = spec.baseline_bits;

  std::optional<AcceleratorParams> best;
  std::int64_t best_cycles = std::numeric_limits<std::int64_t>::max();
  for (std::int64_t tm = g; tm <= max_m; tm += g) {
    // DSP usage grows with T_n, so the first miss ends the row.
    for (std::int64_t tn = g; tn <= max_n; tn += g) {
      p.tile_m = p.tile_m_q = tm;
      p.tile_n = p.tile_n_q = tn;
      if (static_cast<double>(tm * p.head_parallel * tn) > spec.dsp_budget()) break;
      if (!ev.fits(p)) continue;
      const std::int64_t c = ev.cycles(p);
      if (c < best_cycles) {
        best = p;
        best_cycles = c;
      }
    }
  }
  if (!best) {
    throw InfeasibleError("no baseline tile configuration fits device '" + spec.name +
                          "' (smallest tile needs " +
                          std::to_string(g * g * default_head_parallel(schedule.num_heads)) +
                          " DSPs, budget " + std::to_string(spec.dsp_budget()) + ")");
  }
  return *best;
}

AcceleratorParams init_params(const AcceleratorParams& baseline, int bits, const FpgaSpec& spec,
                              std::int64_t num_heads) {
  if (bits < 1 || bits > spec.baseline_bits) {
    throw ConfigError("activation precision " + std::to_string(bits) + " outside [1, " +
                      std::to_string(spec.baseline_bits) + "]");
  }
  AcceleratorParams p = baseline;
  p.activation_bits = bits;
  p.head_parallel = default_head_parallel(num_heads);
  if (bits >= spec.baseline_bits) {
    p.pack_q = p.pack;
    p.tile_m_q = p.tile_m;
    p.tile_n_q = p.tile_n;
    return p;
  }
  p.pack_q = pack_factor(spec.port_bits, bits);
  p.tile_n_q = p.tile_n * p.pack_q / p.pack;

  const std::int64_t step = std::lcm(p.pack, p.pack_q);
  const std::int64_t below = std::max(step, baseline.tile_m / step * step);
  const std::int64_t above = below + step;
  p.tile_m = (above - baseline.tile_m < baseline.tile_m - below) ? above : below;
  p.tile_m_q = p.tile_m;
  return p;
}

AcceleratorParams adjust_params(const AcceleratorParams& params, const FpgaSpec& spec,
                                const LayerSchedule& schedule) {
  if (params.activation_bits >= spec.baseline_bits) return params;

  const auto layers = schedule.matmul_layers();
  const Evaluator ev{layers, spec, schedule.num_heads, schedule.max_tokens()};
  const std::int64_t step = std::lcm(params.pack, params.pack_q);
  const std::int64_t limit_q = std::max(step, max_out_channels(layers, true));

  AcceleratorParams p = params;
  while (static_cast<double>(p.tile_m * p.head_parallel * p.tile_n) > spec.dsp_budget() &&
         p.tile_m > step) {
    p.tile_m -= step;
  }
  if (static_cast<double>(p.tile_m * p.head_parallel * p.tile_n) > spec.dsp_budget()) {
    throw InfeasibleError("DSP budget exceeded even with tile_m=" + std::to_string(step));
  }

  auto fitted = fit_tile_m_q(p, ev, step, limit_q);
  if (!fitted) {
    throw InfeasibleError("no tile_m_q multiple of " + std::to_string(step) + " fits the " +
                          std::string(to_string(check_constraints(
                              resource_usage(p, spec, ev.heads, ev.tokens), spec).binding)) +
                          " budget at " + std::to_string(p.activation_bits) + "-bit activations");
  }
  p = *fitted;

  // Shrinking T_m cuts weight traffic and frees BRAM for the quantized tiles.
  std::int64_t current = ev.cycles(p);
  while (p.tile_m > step) {
    AcceleratorParams q = p;
    q.tile_m -= step;
    auto refit = fit_tile_m_q(q, ev, step, limit_q);
    if (!refit) break;
    const std::int64_t c = ev.cycles(*refit);
    if (c >= current) break;
    p = *refit;
    current = c;
  }
  return p;
}

PrecisionPoint evaluate_precision(const LayerSchedule& schedule, const FpgaSpec& spec,
                                  const AcceleratorParams& baseline, int bits) {
  PrecisionPoint pt;
  pt.bits = bits;
  const AcceleratorParams start = init_params(baseline, bits, spec, schedule.num_heads);
  try {
    pt.params = adjust_params(start, spec, schedule);
  } catch (const InfeasibleError& e) {
    // Report the starting point so the binding resource is meaningful.
    pt.params = start;
    pt.usage = resource_usage(start, spec, schedule);
    pt.check = check_constraints(pt.usage, spec);
    pt.diagnostic = e.what();
    return pt;
  }
  pt.latency = model_latency(schedule, pt.params, spec);
  pt.usage = resource_usage(pt.params, spec, schedule);
  pt.check = check_constraints(pt.usage, spec);
  pt.realizable = pt.check.feasible;
  if (!pt.realizable) pt.diagnostic = std::string("binding resource: ") + to_string(pt.check.binding);
  return pt;
}

CompilationResult search_precision(const LayerSchedule& schedule, const FpgaSpec& spec,
                                   const SearchTarget& target, const AcceleratorParams& baseline) {
  if (!(target.fps > 0)) throw ConfigError("target frame rate must be positive");
  if (target.min_bits < 1 || target.max_bits > spec.baseline_bits ||
      target.min_bits > target.max_bits) {
    throw ConfigError("invalid precision range");
  }

  std::map<int, PrecisionPoint> memo;
  auto eval = [&](int bits) -> const PrecisionPoint& {
    auto it = memo.find(bits);
    if (it == memo.end()) {
      it = memo.emplace(bits, evaluate_precision(schedule, spec, baseline, bits)).first;
    }
    return it->second;
  };
  auto fps = [&](int bits) {
    const auto& pt = eval(bits);
    return pt.realizable ? pt.latency.fps : 0.0;
  };
  auto meets = [&](int bits) { return fps(bits) >= target.fps; };

  CompilationResult r;
  r.target = target;
  const PrecisionPoint& lowest = eval(target.min_bits);
  r.fr_max = fps(target.min_bits);

  if (!meets(target.min_bits)) {
    r.feasible = false;
    if (!lowest.realizable) {
      r.diagnostic = "FR_max is 0: no realizable configuration at " + std::to_string(target.min_bits) +
                     "-bit activations (binding resource " + to_string(lowest.check.binding) +
                     "): " + lowest.diagnostic;
    } else {
      r.diagnostic = "target " + std::to_string(target.fps) + " FPS exceeds FR_max " +
                     std::to_string(r.fr_max) + " FPS";
    }
    r.check = lowest.check;
    r.usage = lowest.usage;
    r.evaluations = static_cast<int>(memo.size());
    return r;
  }

  // Largest precision meeting the target, assuming FPS does not rise with bits.
  int lo = target.min_bits;
  int hi = target.max_bits;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (meets(mid)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }

  // The evaluated points must be consistent with a non-increasing FPS curve;
  // otherwise bisection may have skipped a feasible precision.
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [bits, pt] : memo) {
    const double f = pt.realizable ? pt.latency.fps : 0.0;
    if (f > prev) monotone = false;
    prev = f;
  }
  if (!monotone) {
    r.linear_scan = true;
    for (int b = target.max_bits; b >= target.min_bits; --b) {
      if (meets(b)) {
        lo = b;
        break;
      }
    }
  }

  const PrecisionPoint& chosen = eval(lo);
  r.feasible = true;
  r.bits = lo;
  r.params = chosen.params;
  r.latency = chosen.latency;
  r.usage = chosen.usage;
  r.check = chosen.check;
  r.evaluations = static_cast<int>(memo.size());
  return r;
}

CompilationResult search_precision(const LayerSchedule& schedule, const FpgaSpec& spec,
                                   const SearchTarget& target) {
  return search_precision(schedule, spec, target, optimize_baseline(schedule, spec));
}

}  // namespace qvit
