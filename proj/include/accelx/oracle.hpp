// Independent verification engines: an event-driven simulator of the
// generic engine's double-buffered group loop (exact rational time) and a
// brute-force enumerator over the DSE grid. Both exist to catch errors in
// the closed-form models and the search heuristic, so they share as little
// code with them as possible.
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "accelx/analytic.hpp"
#include "accelx/dse.hpp"
#include "accelx/model.hpp"

namespace accelx {

using Rational = boost::multiprecision::cpp_rational;

// ============================================================================
// Event-driven simulator
// ============================================================================

enum class SimEventKind { kWeightLoad, kIfmLoad, kCompute, kOfmStore };

inline const char* to_string(SimEventKind k) {
  switch (k) {
    case SimEventKind::kWeightLoad: return "weight_load";
    case SimEventKind::kIfmLoad: return "ifm_load";
    case SimEventKind::kCompute: return "compute";
    case SimEventKind::kOfmStore: return "ofm_store";
  }
  return "?";
}

struct SimEvent {
  SimEventKind kind;
  int64_t group = 0;
  Rational start, end;  // seconds
};

struct SimResult {
  Rational makespan;      // scheduled finish of the last event
  Rational analytic;      // the closed-form max() latency, in exact arithmetic
  Rational group_period;  // analytic / groups — the tolerance unit
  int64_t groups = 1;
  std::vector<SimEvent> events;
};

/// Schedule one layer's group loop on four resources (weight bus, ifm bus,
/// compute array, ofm bus) with depth-2 ping-pong buffers: group g's loads
/// wait for compute of g-2 (buffer free), compute waits for its loads and
/// for store of g-2, stores follow their compute. Returns the makespan and
/// the exact-arithmetic closed form it is expected to track.
inline SimResult simulate_generic_layer(const LayerSpec& l, int64_t in_h, int64_t in_w,
                                        const GenericPlan& plan, uint64_t freq_hz) {
  // Validates feasibility and fixes the group count / residence regime.
  const GenericLayerTerms terms = generic_layer_latency(l, in_h, in_w, plan, freq_hz);
  const bool ws = plan.strategy == GenericStrategy::kSplitWS;
  const int64_t groups = ws ? terms.g_w : terms.g_fm;

  const int64_t in_bits = in_h * in_w * l.c * l.dw;
  const int64_t out_bits = l.h * l.w * l.k * l.dw;
  const int64_t w_bits = (l.kind == LayerKind::kPool) ? 0 : l.r * l.s * l.c * l.k * l.ww;
  const int64_t par = (l.kind == LayerKind::kPool) ? plan.cpf : plan.cpf * plan.kpf;

  const Rational l_comp(layer_macs(l), static_cast<int64_t>(freq_hz) * par);
  const Rational l_w = w_bits == 0 ? Rational(0)
                                   : Rational(w_bits, static_cast<int64_t>(plan.bw_w));
  const Rational l_ifm = terms.resident
                             ? Rational(0)
                             : Rational(in_bits, static_cast<int64_t>(plan.bw_ifm));
  const Rational l_ofm = terms.resident
                             ? Rational(0)
                             : Rational(out_bits, static_cast<int64_t>(plan.bw_ofm));

  // Per-group durations and the exact closed form they aggregate to.
  Rational d_w, d_ifm, d_comp, d_ofm, analytic;
  if (ws) {
    d_w = l_w / groups;   // weights stream once, chunked along output channels
    d_ifm = l_ifm;        // the full input fmap re-streams per group
    d_comp = l_comp / groups;
    d_ofm = l_ofm;        // drained in full per group
    analytic = std::max({l_comp, l_w, Rational(l_ifm * groups), Rational(l_ofm * groups)});
  } else {
    d_w = l_w;            // the full weight set re-streams per fmap group
    d_ifm = l_ifm / groups;
    d_comp = l_comp / groups;
    d_ofm = l_ofm / groups;
    analytic = std::max({l_comp, Rational(l_w * groups), l_ifm, l_ofm});
  }

  SimResult res;
  res.groups = groups;
  res.analytic = analytic;
  res.group_period = analytic / groups;

  // Resource free times and per-group completion records.
  Rational free_w = 0, free_ifm = 0, free_comp = 0, free_ofm = 0;
  std::vector<Rational> comp_end(static_cast<size_t>(groups), Rational(0));
  std::vector<Rational> store_end(static_cast<size_t>(groups), Rational(0));
  Rational makespan = 0;

  auto emit = [&res, &makespan](SimEventKind kind, int64_t g, Rational start,
                                const Rational& dur) {
    Rational end = start + dur;
    if (dur != 0) res.events.push_back({kind, g, start, end});
    if (end > makespan) makespan = end;
    return end;
  };

  for (int64_t g = 0; g < groups; ++g) {
    const Rational buf_ready = g >= 2 ? comp_end[static_cast<size_t>(g - 2)] : Rational(0);
    Rational w_done = buf_ready, ifm_done = buf_ready;
    if (d_w != 0) {
      const Rational start = std::max(free_w, buf_ready);
      w_done = emit(SimEventKind::kWeightLoad, g, start, d_w);
      free_w = w_done;
    }
    if (d_ifm != 0) {
      const Rational start = std::max(free_ifm, buf_ready);
      ifm_done = emit(SimEventKind::kIfmLoad, g, start, d_ifm);
      free_ifm = ifm_done;
    }
    const Rational out_ready = g >= 2 ? store_end[static_cast<size_t>(g - 2)] : Rational(0);
    const Rational c_start = std::max(std::max(free_comp, out_ready), std::max(w_done, ifm_done));
    const Rational c_end = emit(SimEventKind::kCompute, g, c_start, d_comp);
    free_comp = c_end;
    comp_end[static_cast<size_t>(g)] = c_end;
    if (d_ofm != 0) {
      const Rational start = std::max(free_ofm, c_end);
      store_end[static_cast<size_t>(g)] = emit(SimEventKind::kOfmStore, g, start, d_ofm);
      free_ofm = store_end[static_cast<size_t>(g)];
    } else {
      store_end[static_cast<size_t>(g)] = c_end;
    }
  }
  res.makespan = makespan;
  return res;
}

// ============================================================================
// Brute-force DSE enumeration
// ============================================================================

struct BruteForceOptions {
  int grid = 4;
  int64_t batch_max = 4;
  std::optional<GenericStrategy> strategy;
  uint64_t max_points = 1000000;
};

/// Number of candidates full enumeration would evaluate.
inline uint64_t brute_force_points(size_t n_layers, int grid, int64_t batch_max) {
  const uint64_t cube = static_cast<uint64_t>(grid + 1) * static_cast<uint64_t>(grid + 1) *
                        static_cast<uint64_t>(grid + 1);
  uint64_t pts = 2 * static_cast<uint64_t>(batch_max);  // sp = 0 and sp = N
  if (n_layers >= 2)
    pts += static_cast<uint64_t>(n_layers - 1) * static_cast<uint64_t>(batch_max) * cube;
  return pts;
}

/// Exact optimum over the same grid explore searches, by full enumeration.
/// Refuses search spaces above max_points.
inline ExploreResult brute_force_dse(const NetworkModel& net, const FpgaSpec& fpga,
                                     const BruteForceOptions& opt) {
  if (opt.grid < 3) throw ModelError("brute_force_dse: grid must be >= 3");
  if (opt.batch_max < 1) throw ModelError("brute_force_dse: batch_max must be >= 1");
  const size_t n = net.layers.size();
  const uint64_t points = brute_force_points(n, opt.grid, opt.batch_max);
  if (points > opt.max_points)
    throw ModelError("brute_force_dse: search space has " + std::to_string(points) +
                     " points, above the " + std::to_string(opt.max_points) + " limit");

  ExploreResult result;
  std::optional<Rav> best_rav;
  detail::EvalCell best_cell;
  for (size_t sp = 0; sp <= n; ++sp) {
    detail::SpEvaluator ev(net, fpga, sp, opt.grid, static_cast<int>(opt.batch_max),
                           opt.strategy);
    bool sp_feasible = false;
    auto offer = [&](const Rav& rav) {
      const detail::EvalCell& cell = ev.eval(rav);
      sp_feasible = sp_feasible || cell.feasible;
      if (!cell.feasible) return;
      if (!best_rav || detail::cell_better(cell, rav, best_cell, *best_rav)) {
        best_rav = rav;
        best_cell = cell;
      }
    };
    if (sp == 0 || sp == n) {
      const int v = sp == 0 ? 0 : opt.grid;
      for (int64_t b = 1; b <= opt.batch_max; ++b)
        offer(detail::make_rav(sp, b, v, v, v, opt.grid));
    } else {
      for (int64_t b = 1; b <= opt.batch_max; ++b)
        for (int d = 0; d <= opt.grid; ++d)
          for (int m = 0; m <= opt.grid; ++m)
            for (int w = 0; w <= opt.grid; ++w)
              offer(detail::make_rav(sp, b, d, m, w, opt.grid));
    }
    for (const Rav& r : ev.visited()) {
      const detail::EvalCell& c = ev.eval(r);
      result.trace.push_back({r, c.feasible, c.gops, c.effi});
    }
    result.evaluations += ev.evaluations();
    if (!sp_feasible)
      result.sp_reasons.emplace_back(
          sp, ev.first_reason().empty() ? "no candidate evaluated" : ev.first_reason());
  }
  std::sort(result.trace.begin(), result.trace.end(),
            [](const TraceRow& a, const TraceRow& b) { return rav_less(a.rav, b.rav); });
  if (best_rav) {
    result.found = true;
    result.best = evaluate_rav(net, fpga, *best_rav, opt.strategy, opt.grid);
  }
  return result;
}

}  // namespace accelx
