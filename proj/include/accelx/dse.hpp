// Two-level design-space exploration: a global search over the resource
// allocation vector (split point, batch, DSP/BRAM/BW splits) with the
// allocation procedures of allocation.hpp as the local level. evaluate_rav
// composes one candidate end to end; explore runs the full search.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "accelx/allocation.hpp"
#include "accelx/analytic.hpp"
#include "accelx/model.hpp"

namespace accelx {

// ============================================================================
// Resource allocation vector
// ============================================================================

/// The five-axis candidate: layers [0, sp) run as pipeline stages, the rest
/// on the generic engine; each resource split is a numerator over `den`
/// giving the pipeline's share.
struct Rav {
  size_t sp = 0;
  int64_t batch = 1;
  int dsp_num = 0, bram_num = 0, bw_num = 0;
  int den = 16;

  double dsp_split() const { return static_cast<double>(dsp_num) / den; }
  double bram_split() const { return static_cast<double>(bram_num) / den; }
  double bw_split() const { return static_cast<double>(bw_num) / den; }
};

inline bool rav_less(const Rav& a, const Rav& b) {
  if (a.sp != b.sp) return a.sp < b.sp;
  if (a.batch != b.batch) return a.batch < b.batch;
  if (a.dsp_num != b.dsp_num) return a.dsp_num < b.dsp_num;
  if (a.bram_num != b.bram_num) return a.bram_num < b.bram_num;
  return a.bw_num < b.bw_num;
}

inline bool rav_eq(const Rav& a, const Rav& b) {
  return a.sp == b.sp && a.batch == b.batch && a.dsp_num == b.dsp_num &&
         a.bram_num == b.bram_num && a.bw_num == b.bw_num && a.den == b.den;
}

/// Structural validity: in-range axes, and pure modes pin the splits
/// (sp = 0 gives everything to the generic engine, sp = N to the pipeline).
inline void validate_rav(const Rav& rav, size_t n_layers) {
  if (rav.den < 1) throw ModelError("rav: split denominator must be >= 1");
  if (rav.sp > n_layers) throw ModelError("rav: sp out of range");
  if (rav.batch < 1) throw ModelError("rav: batch must be >= 1");
  for (int v : {rav.dsp_num, rav.bram_num, rav.bw_num})
    if (v < 0 || v > rav.den) throw ModelError("rav: split numerator out of [0, den]");
  if (rav.sp == 0 && (rav.dsp_num != 0 || rav.bram_num != 0 || rav.bw_num != 0))
    throw ModelError("rav: sp = 0 requires all splits = 0");
  if (rav.sp == n_layers &&
      (rav.dsp_num != rav.den || rav.bram_num != rav.den || rav.bw_num != rav.den))
    throw ModelError("rav: sp = N requires all splits = 1");
}

// ============================================================================
// Candidate configuration
// ============================================================================

struct ArchitectureConfig {
  Rav rav;
  bool feasible = false;
  std::string reason;  // why not, when infeasible
  std::optional<PipelinePlanSet> pipeline;
  std::optional<GenericPlan> generic;
  std::optional<PerfEstimate> pipeline_perf;
  std::optional<PerfEstimate> generic_perf;
  PerfEstimate perf;  // system level
  int64_t dsp_used = 0;
  int64_t bram_used = 0;  // bits, both structures
};

/// System view of two structure-level estimates: the slower side sets the
/// rate, GOP/s counts the whole network's work at that rate, efficiency is
/// measured against the combined DSP peak using DSP-mapped ops only.
inline PerfEstimate compose_system_perf(const std::optional<PerfEstimate>& pipe,
                                        const std::optional<PerfEstimate>& gen,
                                        double gops_per_image, double mac_gops_per_image,
                                        int alpha, int64_t dsp_used, uint64_t freq_hz) {
  if (!pipe && !gen) throw ModelError("compose_system_perf: both sides empty");
  PerfEstimate sys;
  sys.throughput_inf_s = std::numeric_limits<double>::infinity();
  for (const auto* side : {&pipe, &gen}) {
    if (!side->has_value()) continue;
    sys.throughput_inf_s = std::min(sys.throughput_inf_s, (*side)->throughput_inf_s);
    sys.total_latency += (*side)->total_latency;
  }
  sys.throughput_gops = gops_per_image * sys.throughput_inf_s;
  sys.dsp_efficiency = dsp_efficiency(mac_gops_per_image * sys.throughput_inf_s, alpha,
                                      dsp_used, freq_hz);
  return sys;
}

namespace detail {

/// Pipeline-side rate: stage-limited or stream-limited, whichever is slower.
inline double pipeline_rate(const PipelinePlanSet& set, uint64_t bw_share) {
  return std::min(1.0 / set.max_stage_latency,
                  static_cast<double>(bw_share) / static_cast<double>(set.traffic_bits));
}

}  // namespace detail

/// Evaluate one candidate end to end. Infeasibility is reported in the
/// returned config (feasible = false, reason set); only malformed inputs
/// throw.
inline ArchitectureConfig evaluate_rav(const NetworkModel& net, const FpgaSpec& fpga,
                                       const Rav& rav,
                                       std::optional<GenericStrategy> strategy,
                                       int grid) {
  const size_t n = net.layers.size();
  validate_rav(rav, n);
  ArchitectureConfig cfg;
  cfg.rav = rav;

  const int64_t dsp_p = fpga.dsp * rav.dsp_num / rav.den;
  const int64_t bram_p = fpga.bram_bits * rav.bram_num / rav.den;
  const uint64_t bw_p =
      fpga.bw_bits_per_s * static_cast<uint64_t>(rav.bw_num) / static_cast<uint64_t>(rav.den);

  // Pipeline side.
  double pipe_rate = 0.0;
  if (rav.sp > 0) {
    PipelinePlanSet set;
    try {
      set = balance_pipeline(net, 0, rav.sp, dsp_p, fpga);
    } catch (const InfeasibleError& e) {
      cfg.reason = e.what();
      return cfg;
    }
    if (set.bram_used > bram_p) {
      std::string breakdown;
      for (size_t i = 0; i < rav.sp; ++i) {
        if (!breakdown.empty()) breakdown += ", ";
        breakdown += net.layers[i].name + "=" + std::to_string(stage_buffer_bits(net, i));
      }
      cfg.reason = "pipeline line buffers need " + std::to_string(set.bram_used) +
                   " bits > BRAM share " + std::to_string(bram_p) + " (" + breakdown + ")";
      return cfg;
    }
    if (bw_p == 0) {
      cfg.reason = "pipeline bandwidth share is zero";
      return cfg;
    }
    pipe_rate = detail::pipeline_rate(set, bw_p);

    PerfEstimate pp;
    int64_t macs_p = 0;
    double fill = 0.0;
    for (size_t i = 0; i < rav.sp; ++i) {
      LayerPerf lp;
      lp.name = net.layers[i].name;
      lp.l_comp = set.stage_latencies[i];
      lp.l_layer = set.stage_latencies[i];
      pp.per_layer.push_back(lp);
      macs_p += layer_macs(net.layers[i]);
      fill += set.stage_latencies[i];
    }
    pp.total_latency = fill + static_cast<double>(rav.batch - 1) / pipe_rate;
    pp.throughput_inf_s = pipe_rate;
    pp.throughput_gops = 2.0 * static_cast<double>(macs_p) * pipe_rate / 1e9;
    const double mac_gops =
        2.0 * static_cast<double>(dsp_mapped_macs(net, 0, rav.sp)) * pipe_rate / 1e9;
    pp.dsp_efficiency = dsp_efficiency(mac_gops, network_alpha(fpga, net, 0, rav.sp),
                                       set.dsp_used, fpga.freq_hz);
    cfg.pipeline = set;
    cfg.pipeline_perf = pp;
    cfg.dsp_used += set.dsp_used;
    cfg.bram_used += set.bram_used;
  }

  // Generic side.
  if (rav.sp < n) {
    const int64_t dsp_g = fpga.dsp - dsp_p;
    const int64_t bram_g = fpga.bram_bits - bram_p;
    const uint64_t bw_g = fpga.bw_bits_per_s - bw_p;
    auto outcomes = partition_generic_sweep(net, rav.sp, n, dsp_g, bram_g, bw_g, fpga,
                                            strategy, static_cast<int>(rav.batch), grid);
    const GenericOutcome& o = outcomes[static_cast<size_t>(rav.batch - 1)];
    if (!o.feasible) {
      cfg.reason = o.reason;
      return cfg;
    }
    const int alpha_g = network_alpha(fpga, net, rav.sp, n);
    const int64_t dsp_g_used = dsp_cost(o.plan.cpf, o.plan.kpf, alpha_g);
    cfg.generic = o.plan;
    cfg.generic_perf = generic_network_perf(net, rav.sp, n, o.plan, fpga.freq_hz,
                                            rav.batch, alpha_g, dsp_g_used);
    cfg.dsp_used += dsp_g_used;
    cfg.bram_used += o.plan.cap_abuff_bits + o.plan.cap_wbuff_bits;
  }

  cfg.feasible = true;
  const double gops_image = 2.0 * static_cast<double>(net.total_macs()) / 1e9;
  const double mac_gops_image =
      2.0 * static_cast<double>(dsp_mapped_macs(net, 0, n)) / 1e9;
  cfg.perf = compose_system_perf(cfg.pipeline_perf, cfg.generic_perf, gops_image,
                                 mac_gops_image, network_alpha(fpga, net, 0, n),
                                 cfg.dsp_used, fpga.freq_hz);
  return cfg;
}

// ============================================================================
// Global search
// ============================================================================

struct ExploreOptions {
  int grid = 16;
  int64_t batch_max = 16;
  uint64_t seed = 0;
  std::optional<GenericStrategy> strategy;
  int threads = 0;  // 0 = ACCELX_THREADS env or hardware concurrency
};

struct TraceRow {
  Rav rav;
  bool feasible = false;
  double gops = 0.0;
  double effi = 0.0;
};

struct ExploreResult {
  bool found = false;
  ArchitectureConfig best;
  std::vector<TraceRow> trace;  // canonically sorted, infeasibles included
  std::vector<std::pair<size_t, std::string>> sp_reasons;  // sp → why nothing worked
  size_t evaluations = 0;       // distinct candidates evaluated
};

namespace detail {

/// Scalar summary of one candidate — enough for ordering and the trace.
struct EvalCell {
  bool feasible = false;
  double gops = 0.0, effi = 0.0;
  int64_t bram_used = 0;
  std::string reason;
};

/// Candidate order: feasible first, then GOP/s, DSP efficiency, lower BRAM,
/// lexicographically smallest RAV. A strict total order shared by explore
/// and the brute-force oracle so their optima are comparable configs.
inline bool cell_better(const EvalCell& a, const Rav& ra, const EvalCell& b, const Rav& rb) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) {
    if (a.gops != b.gops) return a.gops > b.gops;
    if (a.effi != b.effi) return a.effi > b.effi;
    if (a.bram_used != b.bram_used) return a.bram_used < b.bram_used;
  }
  return rav_less(ra, rb);
}

/// Per-split-point evaluator with memoized side computations. Not thread
/// safe; each worker owns the evaluators for its split points.
class SpEvaluator {
 public:
  SpEvaluator(const NetworkModel& net, const FpgaSpec& fpga, size_t sp, int grid,
              int batch_max, std::optional<GenericStrategy> strategy)
      : net_(net), fpga_(fpga), sp_(sp), grid_(grid), batch_max_(batch_max),
        strategy_(strategy), n_(net.layers.size()) {
    gops_image_ = 2.0 * static_cast<double>(net.total_macs()) / 1e9;
    mac_gops_image_ = 2.0 * static_cast<double>(dsp_mapped_macs(net, 0, n_)) / 1e9;
    alpha_sys_ = network_alpha(fpga, net, 0, n_);
    if (sp_ < n_) alpha_gen_ = network_alpha(fpga, net, sp_, n_);
    // In the unforced search the split-IS strategy is pointwise dominated by
    // the unified buffer (same streaming terms, strictly less activation
    // capacity), so skipping it cannot change any optimum and halves the grid.
    if (!strategy_) auto_strategies_ = {GenericStrategy::kUnified, GenericStrategy::kSplitWS};
  }

  const EvalCell& eval(const Rav& rav) {
    const int64_t key = cell_key(rav);
    auto it = cells_.find(key);
    if (it != cells_.end()) return it->second;
    EvalCell cell = compute(rav);
    auto pos = cells_.emplace(key, std::move(cell)).first;
    visited_.push_back(rav);
    if (!pos->second.feasible && first_reason_.empty()) first_reason_ = pos->second.reason;
    if (pos->second.feasible) any_feasible_ = true;
    return pos->second;
  }

  const std::vector<Rav>& visited() const { return visited_; }
  bool any_feasible() const { return any_feasible_; }
  const std::string& first_reason() const { return first_reason_; }
  size_t evaluations() const { return cells_.size(); }

 private:
  int64_t cell_key(const Rav& r) const {
    int64_t k = r.dsp_num;
    k = k * (grid_ + 1) + r.bram_num;
    k = k * (grid_ + 1) + r.bw_num;
    k = k * (batch_max_ + 1) + r.batch;
    return k;
  }

  struct PipeSide {
    bool ok = false;
    PipelinePlanSet set;
    std::string reason;
  };

  const PipeSide& pipe_side(int dsp_num) {
    auto it = pipe_cache_.find(dsp_num);
    if (it != pipe_cache_.end()) return it->second;
    PipeSide side;
    try {
      side.set = balance_pipeline(net_, 0, sp_, fpga_.dsp * dsp_num / grid_, fpga_);
      side.ok = true;
    } catch (const InfeasibleError& e) {
      side.reason = e.what();
    }
    return pipe_cache_.emplace(dsp_num, std::move(side)).first->second;
  }

  const std::vector<GenericOutcome>& gen_side(int dsp_num, int bram_num, int bw_num) {
    const int64_t key =
        (static_cast<int64_t>(dsp_num) * (grid_ + 1) + bram_num) * (grid_ + 1) + bw_num;
    auto it = gen_cache_.find(key);
    if (it != gen_cache_.end()) return it->second;
    const int64_t dsp_g = fpga_.dsp - fpga_.dsp * dsp_num / grid_;
    const int64_t bram_g = fpga_.bram_bits - fpga_.bram_bits * bram_num / grid_;
    const uint64_t bw_g =
        fpga_.bw_bits_per_s -
        fpga_.bw_bits_per_s * static_cast<uint64_t>(bw_num) / static_cast<uint64_t>(grid_);
    std::vector<GenericOutcome> out;
    if (strategy_) {
      out = partition_generic_sweep(net_, sp_, n_, dsp_g, bram_g, bw_g, fpga_, strategy_,
                                    batch_max_, grid_);
    } else {
      // Union of the undominated strategies, same canonical order.
      out = partition_generic_sweep(net_, sp_, n_, dsp_g, bram_g, bw_g, fpga_,
                                    auto_strategies_[0], batch_max_, grid_);
      auto ws = partition_generic_sweep(net_, sp_, n_, dsp_g, bram_g, bw_g, fpga_,
                                        auto_strategies_[1], batch_max_, grid_);
      for (int b = 0; b < batch_max_; ++b) {
        if (ws[b].feasible &&
            (!out[b].feasible || ws[b].total_batch_latency < out[b].total_batch_latency))
          out[b] = ws[b];
      }
    }
    return gen_cache_.emplace(key, std::move(out)).first->second;
  }

  EvalCell compute(const Rav& rav) {
    EvalCell cell;
    double inf_s = std::numeric_limits<double>::infinity();
    int64_t dsp_used = 0;
    if (sp_ > 0) {
      const PipeSide& ps = pipe_side(rav.dsp_num);
      if (!ps.ok) {
        cell.reason = ps.reason;
        return cell;
      }
      const int64_t bram_p = fpga_.bram_bits * rav.bram_num / grid_;
      if (ps.set.bram_used > bram_p) {
        cell.reason = "pipeline line buffers need " + std::to_string(ps.set.bram_used) +
                      " bits > BRAM share " + std::to_string(bram_p);
        return cell;
      }
      const uint64_t bw_p = fpga_.bw_bits_per_s * static_cast<uint64_t>(rav.bw_num) /
                            static_cast<uint64_t>(grid_);
      if (bw_p == 0) {
        cell.reason = "pipeline bandwidth share is zero";
        return cell;
      }
      inf_s = std::min(inf_s, pipeline_rate(ps.set, bw_p));
      dsp_used += ps.set.dsp_used;
      cell.bram_used += ps.set.bram_used;
    }
    if (sp_ < n_) {
      const auto& outs = gen_side(rav.dsp_num, rav.bram_num, rav.bw_num);
      const GenericOutcome& o = outs[static_cast<size_t>(rav.batch - 1)];
      if (!o.feasible) {
        cell.reason = o.reason;
        return cell;
      }
      inf_s = std::min(inf_s, static_cast<double>(rav.batch) / o.total_batch_latency);
      dsp_used += dsp_cost(o.plan.cpf, o.plan.kpf, alpha_gen_);
      cell.bram_used += o.plan.cap_abuff_bits + o.plan.cap_wbuff_bits;
    }
    cell.feasible = true;
    cell.gops = gops_image_ * inf_s;
    cell.effi = dsp_efficiency(mac_gops_image_ * inf_s, alpha_sys_, dsp_used, fpga_.freq_hz);
    return cell;
  }

  const NetworkModel& net_;
  const FpgaSpec& fpga_;
  size_t sp_;
  int grid_;
  int batch_max_;
  std::optional<GenericStrategy> strategy_;
  size_t n_;
  double gops_image_ = 0.0;
  double mac_gops_image_ = 0.0;
  int alpha_sys_ = 2, alpha_gen_ = 2;
  std::vector<GenericStrategy> auto_strategies_;
  std::unordered_map<int, PipeSide> pipe_cache_;
  std::unordered_map<int64_t, std::vector<GenericOutcome>> gen_cache_;
  std::unordered_map<int64_t, EvalCell> cells_;
  std::vector<Rav> visited_;
  bool any_feasible_ = false;
  std::string first_reason_;
};

/// Best candidate at one split point, or nothing when none is feasible.
struct SpResult {
  bool any_feasible = false;
  Rav best_rav;
  EvalCell best_cell;
  std::vector<TraceRow> rows;
  std::string reason;
  size_t evaluations = 0;
};

inline Rav make_rav(size_t sp, int64_t batch, int d, int m, int w, int grid) {
  Rav r;
  r.sp = sp;
  r.batch = batch;
  r.dsp_num = d;
  r.bram_num = m;
  r.bw_num = w;
  r.den = grid;
  return r;
}

/// Exhaustive batch sweep + coordinate descent over the three split axes
/// from deterministic corner/center starts plus seeded random restarts.
inline SpResult search_sp(const NetworkModel& net, const FpgaSpec& fpga, size_t sp,
                          const ExploreOptions& opt) {
  const size_t n = net.layers.size();
  const int g = opt.grid;
  SpEvaluator ev(net, fpga, sp, g, static_cast<int>(opt.batch_max), opt.strategy);
  SpResult res;

  auto offer = [&](const Rav& rav, const EvalCell& cell) {
    if (!res.any_feasible && cell.feasible) {
      res.any_feasible = true;
      res.best_rav = rav;
      res.best_cell = cell;
    } else if (cell.feasible && cell_better(cell, rav, res.best_cell, res.best_rav)) {
      res.best_rav = rav;
      res.best_cell = cell;
    }
  };

  if (sp == 0 || sp == n) {
    const int v = sp == 0 ? 0 : g;
    for (int64_t b = 1; b <= opt.batch_max; ++b) {
      const Rav rav = make_rav(sp, b, v, v, v, g);
      offer(rav, ev.eval(rav));
    }
  } else {
    for (int64_t b = 1; b <= opt.batch_max; ++b) {
      // Deterministic starts: the split-cube corners and center.
      std::vector<std::array<int, 3>> starts;
      for (int d : {0, g})
        for (int m : {0, g})
          for (int w : {0, g}) starts.push_back({d, m, w});
      starts.push_back({g / 2, g / 2, g / 2});
      // Seeded restarts, reproducible per (seed, sp, batch).
      std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ULL ^
                          (static_cast<uint64_t>(sp) * 0xBF58476D1CE4E5B9ULL) ^
                          (static_cast<uint64_t>(b) * 0x94D049BB133111EBULL));
      std::uniform_int_distribution<int> axis(0, g);
      for (int r = 0; r < 8; ++r) starts.push_back({axis(rng), axis(rng), axis(rng)});

      for (const auto& s : starts) {
        std::array<int, 3> cur = s;
        for (;;) {
          bool moved = false;
          for (int ax = 0; ax < 3; ++ax) {
            std::array<int, 3> probe = cur;
            Rav best_r = make_rav(sp, b, cur[0], cur[1], cur[2], g);
            EvalCell best_c = ev.eval(best_r);
            for (int v = 0; v <= g; ++v) {
              probe[ax] = v;
              const Rav r = make_rav(sp, b, probe[0], probe[1], probe[2], g);
              const EvalCell& c = ev.eval(r);
              if (cell_better(c, r, best_c, best_r)) {
                best_c = c;
                best_r = r;
              }
            }
            if (best_r.dsp_num != cur[0] || best_r.bram_num != cur[1] ||
                best_r.bw_num != cur[2]) {
              cur = {best_r.dsp_num, best_r.bram_num, best_r.bw_num};
              moved = true;
            }
          }
          if (!moved) break;
        }
        const Rav r = make_rav(sp, b, cur[0], cur[1], cur[2], g);
        offer(r, ev.eval(r));
      }
    }
  }

  for (const Rav& r : ev.visited()) {
    const EvalCell& c = ev.eval(r);
    res.rows.push_back({r, c.feasible, c.gops, c.effi});
  }
  res.evaluations = ev.evaluations();
  if (!res.any_feasible)
    res.reason = ev.first_reason().empty() ? "no candidate evaluated" : ev.first_reason();
  return res;
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ACCELX_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace detail

/// Global search: exhaustive over split point and batch, coordinate descent
/// with restarts over the quantized resource splits. Deterministic for a
/// fixed seed and grid; thread count never changes the result.
inline ExploreResult explore(const NetworkModel& net, const FpgaSpec& fpga,
                             const ExploreOptions& opt) {
  if (opt.grid < 3) throw ModelError("explore: grid must be >= 3");
  if (opt.batch_max < 1) throw ModelError("explore: batch_max must be >= 1");
  const size_t n = net.layers.size();
  std::vector<detail::SpResult> per_sp(n + 1);
  const int threads =
      std::min<int>(detail::resolve_threads(opt.threads), static_cast<int>(n) + 1);

  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  auto worker = [&](int t) {
    try {
      for (size_t sp = static_cast<size_t>(t); sp <= n; sp += static_cast<size_t>(threads))
        per_sp[sp] = detail::search_sp(net, fpga, sp, opt);
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExploreResult result;
  std::optional<size_t> best_sp;
  for (size_t sp = 0; sp <= n; ++sp) {
    const detail::SpResult& r = per_sp[sp];
    result.evaluations += r.evaluations;
    for (const TraceRow& row : r.rows) result.trace.push_back(row);
    if (!r.any_feasible) {
      result.sp_reasons.emplace_back(sp, r.reason);
      continue;
    }
    if (!best_sp || detail::cell_better(r.best_cell, r.best_rav,
                                        per_sp[*best_sp].best_cell,
                                        per_sp[*best_sp].best_rav))
      best_sp = sp;
  }
  std::sort(result.trace.begin(), result.trace.end(),
            [](const TraceRow& a, const TraceRow& b) { return rav_less(a.rav, b.rav); });
  if (best_sp) {
    result.found = true;
    result.best = evaluate_rav(net, fpga, per_sp[*best_sp].best_rav, opt.strategy, opt.grid);
  }
  return result;
}

}  // namespace accelx
