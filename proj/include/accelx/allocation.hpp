// Resource-allocation procedures: load-balanced parallelism assignment for
// the pipeline structure, line-buffer sizing, and buffer/bandwidth
// partitioning for the generic structure. These are the local optimizations
// the DSE engine runs once per candidate resource split.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "accelx/analytic.hpp"
#include "accelx/model.hpp"

namespace accelx {

// ============================================================================
// Pipeline structure: per-stage CPF/KPF under a DSP budget
// ============================================================================

struct PipelinePlanSet {
  std::vector<PipelineStagePlan> stages;
  std::vector<double> stage_latencies;  // seconds per image, same order
  int64_t dsp_used = 0;
  int64_t bram_used = 0;           // line-buffer bits across all stages
  double bw_used = 0.0;            // bits/s needed to sustain the full rate
  int64_t traffic_bits = 0;        // off-chip bits moved per image
  double max_stage_latency = 0.0;  // seconds per image
  double continuous_bound = 0.0;   // max_i(MACs_i) * N / (dsp_budget * freq)
};

/// Line-buffer bits one stage needs: R rows of its input feature map,
/// ping-pong doubled.
inline int64_t stage_buffer_bits(const NetworkModel& net, size_t i) {
  const LayerSpec& l = net.layers[i];
  return 2 * l.r * net.in_w(i) * l.c * l.dw;
}

/// Total line-buffer bits for stages [begin, end).
inline int64_t size_pipeline_buffers(const NetworkModel& net, size_t begin, size_t end) {
  int64_t total = 0;
  for (size_t i = begin; i < end; ++i) total += stage_buffer_bits(net, i);
  return total;
}

/// Off-chip bits per image when layers [begin, end) run as a pipeline:
/// the first stage's input fmap enters, every stage's weights stream, the
/// last stage's output fmap leaves. Inter-stage fmaps stay in line buffers.
inline int64_t pipeline_traffic_bits(const NetworkModel& net, size_t begin, size_t end) {
  int64_t total = net.input_bits(begin) + net.output_bits(end - 1);
  for (size_t i = begin; i < end; ++i) total += net.weight_bits(i);
  return total;
}

namespace detail {

struct StageOption {
  int64_t product;  // cpf * kpf
  int64_t cpf, kpf;
  int64_t cost;  // DSPs
};

inline std::vector<int64_t> divisors_of(int64_t n) {
  std::vector<int64_t> d;
  for (int64_t i = 1; i * i <= n; ++i) {
    if (n % i == 0) {
      d.push_back(i);
      if (i != n / i) d.push_back(n / i);
    }
  }
  std::sort(d.begin(), d.end());
  return d;
}

/// All achievable (CPF, KPF) products for one stage, ascending by product,
/// one canonical pair per product (lexicographically smallest CPF).
inline std::vector<StageOption> stage_options(const LayerSpec& l, int alpha) {
  std::vector<StageOption> opts;
  if (l.kind == LayerKind::kPool) {
    // Multiplier-free stage: full channel parallelism, no DSPs.
    opts.push_back({l.c, l.c, 1, 0});
    return opts;
  }
  const std::vector<int64_t> dc = divisors_of(l.c);
  const std::vector<int64_t> dk = divisors_of(l.k);
  for (int64_t a : dc)
    for (int64_t b : dk) {
      const int64_t p = a * b;
      auto it = std::find_if(opts.begin(), opts.end(),
                             [p](const StageOption& o) { return o.product == p; });
      if (it == opts.end())
        opts.push_back({p, a, b, dsp_cost(a, b, alpha)});
      else if (a < it->cpf) {
        it->cpf = a;
        it->kpf = b;
      }
    }
  std::sort(opts.begin(), opts.end(),
            [](const StageOption& x, const StageOption& y) { return x.product < y.product; });
  return opts;
}

}  // namespace detail

/// Assign per-stage CPF/KPF for layers [begin, end) minimizing the maximum
/// stage latency under the DSP budget. Procedure: workload-proportional
/// continuous seed, floored to feasible divisor products, then greedy
/// upgrades of the current bottleneck stage; the best state visited wins
/// (fewest DSPs on latency ties).
inline PipelinePlanSet balance_pipeline(const NetworkModel& net, size_t begin, size_t end,
                                        int64_t dsp_budget, const FpgaSpec& fpga) {
  if (begin >= end || end > net.layers.size())
    throw ModelError("balance_pipeline: empty or out-of-range layer span");
  const size_t n = end - begin;
  const double freq = static_cast<double>(fpga.freq_hz);

  // Per-stage upgrade ladders and workload weights (DSP-cost units).
  std::vector<std::vector<detail::StageOption>> options(n);
  std::vector<double> weight(n, 0.0);
  std::vector<int64_t> macs(n, 0);
  double weight_sum = 0.0;
  int64_t min_cost = 0;
  for (size_t s = 0; s < n; ++s) {
    const LayerSpec& l = net.layers[begin + s];
    const int alpha = layer_alpha(fpga, l);
    options[s] = detail::stage_options(l, alpha);
    macs[s] = layer_macs(l);
    if (l.kind != LayerKind::kPool) {
      weight[s] = 2.0 * static_cast<double>(macs[s]) / alpha;
      weight_sum += weight[s];
    }
    min_cost += options[s].front().cost;
  }
  if (dsp_budget < min_cost)
    throw InfeasibleError("balance_pipeline: DSP budget " + std::to_string(dsp_budget) +
                          " below one unit per stage (need " + std::to_string(min_cost) + ")");

  // Continuous proportional seed, floored to the ladder.
  std::vector<size_t> pick(n, 0);
  for (size_t s = 0; s < n; ++s) {
    if (weight[s] == 0.0) continue;
    const double share = static_cast<double>(dsp_budget) * weight[s] / weight_sum;
    const int64_t cost_cap = std::max<int64_t>(1, static_cast<int64_t>(std::floor(share)));
    while (pick[s] + 1 < options[s].size() && options[s][pick[s] + 1].cost <= cost_cap)
      ++pick[s];
  }

  auto used = [&] {
    int64_t u = 0;
    for (size_t s = 0; s < n; ++s) u += options[s][pick[s]].cost;
    return u;
  };
  auto latency = [&](size_t s) {
    return static_cast<double>(macs[s]) /
           (static_cast<double>(options[s][pick[s]].product) * freq);
  };
  auto bottleneck = [&] {
    size_t arg = 0;
    double worst = -1.0;
    for (size_t s = 0; s < n; ++s) {
      const double l = latency(s);
      if (l > worst) {
        worst = l;
        arg = s;
      }
    }
    return arg;
  };

  // The flooring of per-stage cost caps can overshoot when many stages round
  // up to their one-unit minimum; trim the least-loaded stages back down.
  int64_t dsp_used = used();
  while (dsp_used > dsp_budget) {
    size_t arg = n;
    double best = std::numeric_limits<double>::infinity();
    for (size_t s = 0; s < n; ++s) {
      if (pick[s] == 0) continue;
      const double l = latency(s);
      if (l < best || (l == best && arg != n && s > arg)) {
        best = l;
        arg = s;
      }
    }
    dsp_used -= options[arg][pick[arg]].cost - options[arg][pick[arg] - 1].cost;
    --pick[arg];
  }

  // Greedy bottleneck upgrades; remember the best state visited
  // (lowest max latency, then fewest DSPs).
  std::vector<size_t> best_pick = pick;
  double best_max = latency(bottleneck());
  int64_t best_used = dsp_used;
  for (;;) {
    const size_t b = bottleneck();
    if (pick[b] + 1 >= options[b].size()) break;
    const int64_t delta = options[b][pick[b] + 1].cost - options[b][pick[b]].cost;
    if (dsp_used + delta > dsp_budget) break;
    ++pick[b];
    dsp_used += delta;
    const double cur_max = latency(bottleneck());
    if (cur_max < best_max || (cur_max == best_max && dsp_used < best_used)) {
      best_pick = pick;
      best_max = cur_max;
      best_used = dsp_used;
    }
  }
  pick = best_pick;

  PipelinePlanSet out;
  int64_t max_macs = 0;
  for (size_t s = 0; s < n; ++s) {
    const detail::StageOption& o = options[s][pick[s]];
    out.stages.push_back({begin + s, o.cpf, o.kpf});
    out.stage_latencies.push_back(
        pipeline_stage_latency(net.layers[begin + s], o.cpf, o.kpf, fpga.freq_hz));
    out.dsp_used += o.cost;
    max_macs = std::max(max_macs, macs[s]);
  }
  out.max_stage_latency =
      *std::max_element(out.stage_latencies.begin(), out.stage_latencies.end());
  out.continuous_bound = static_cast<double>(max_macs) * static_cast<double>(n) /
                         (static_cast<double>(dsp_budget) * freq);
  out.bram_used = size_pipeline_buffers(net, begin, end);
  out.traffic_bits = pipeline_traffic_bits(net, begin, end);
  out.bw_used = static_cast<double>(out.traffic_bits) / out.max_stage_latency;
  return out;
}

// ============================================================================
// Generic structure: buffer capacities and 3-way bandwidth split
// ============================================================================

struct GenericOutcome {
  bool feasible = false;
  GenericPlan plan;
  double total_batch_latency = 0.0;  // seconds per batch, Σ over layers
  std::string reason;                // set when infeasible
};

namespace detail {

inline int64_t largest_pow2_at_most(int64_t v) {
  int64_t p = 1;
  while (p * 2 <= v) p *= 2;
  return p;
}

/// Per-layer constants hoisted out of the plan grid search.
struct SpanLayer {
  const LayerSpec* l;
  int64_t in_bits, out_bits, w_bits;
  int64_t row_bits;    // one output row, the input-stationary floor
  int64_t wchan_bits;  // one output channel's weights, the weight-stationary floor
  double l_comp;
};

/// Evaluate one plan over the span for every batch in [1, batch_max],
/// accumulating Σ per-layer batch latencies into sums[b-1].
/// Returns false (with reason) if any layer is infeasible under the plan.
inline bool eval_plan_sums(const std::vector<SpanLayer>& span, const GenericPlan& plan,
                           int batch_max, std::vector<double>* sums, std::string* reason) {
  std::fill(sums->begin(), sums->end(), 0.0);
  const int64_t half_a = plan.cap_abuff_bits / 2;
  const int64_t half_w = plan.cap_wbuff_bits / 2;
  const bool ws = plan.strategy == GenericStrategy::kSplitWS;
  for (const SpanLayer& s : span) {
    double l_w = 0.0, l_ifm = 0.0, l_ofm = 0.0;
    int64_t g = 1;
    if (s.w_bits > 0) {
      if (plan.bw_w == 0) {
        *reason = "'" + s.l->name + "': weight stream has zero bandwidth";
        return false;
      }
      l_w = static_cast<double>(s.w_bits) / static_cast<double>(plan.bw_w);
    }
    if (ws) {
      if (s.w_bits > 0) {
        if (half_w <= 0 || s.wchan_bits > half_w) {
          *reason = "'" + s.l->name + "': weight buffer below one output channel";
          return false;
        }
        g = std::max<int64_t>(1, (s.w_bits + half_w - 1) / half_w);
      }
      if (plan.bw_ifm == 0 || plan.bw_ofm == 0) {
        *reason = "'" + s.l->name + "': fmap stream has zero bandwidth";
        return false;
      }
      l_ifm = static_cast<double>(s.in_bits) / static_cast<double>(plan.bw_ifm);
      l_ofm = static_cast<double>(s.out_bits) / static_cast<double>(plan.bw_ofm);
      const double gd = static_cast<double>(g);
      for (int b = 1; b <= batch_max; ++b) {
        const double bd = static_cast<double>(b);
        (*sums)[b - 1] += std::max(std::max(bd * s.l_comp, l_w),
                                   std::max(bd * gd * l_ifm, bd * gd * l_ofm));
      }
      continue;
    }
    // Input-stationary family.
    if (half_a <= 0 || s.row_bits > half_a) {
      *reason = "'" + s.l->name + "': activation buffer below one output row";
      return false;
    }
    g = std::max<int64_t>(1, (s.out_bits + half_a - 1) / half_a);
    const bool resident = s.in_bits <= half_a && s.out_bits <= half_a;
    if (!resident) {
      if (plan.bw_ifm == 0 || plan.bw_ofm == 0) {
        *reason = "'" + s.l->name + "': fmap stream has zero bandwidth";
        return false;
      }
      l_ifm = static_cast<double>(s.in_bits) / static_cast<double>(plan.bw_ifm);
      l_ofm = static_cast<double>(s.out_bits) / static_cast<double>(plan.bw_ofm);
    }
    const double gw_l_w = static_cast<double>(g) * l_w;
    for (int b = 1; b <= batch_max; ++b) {
      const double bd = static_cast<double>(b);
      (*sums)[b - 1] += std::max(std::max(bd * s.l_comp, gw_l_w),
                                 std::max(bd * l_ifm, bd * l_ofm));
    }
  }
  return true;
}

}  // namespace detail

/// Search buffer capacities and the 3-way bandwidth split for layers
/// [begin, end) at every batch size 1..batch_max in one pass. Grid axes use
/// 1/grid granularity; bandwidth shares keep at least one grid unit each.
/// The per-batch winner minimizes the span's total batch latency; ties keep
/// the earliest plan in canonical order (unified first, smallest weight
/// buffer, largest weight-stream share, smallest ifm share).
inline std::vector<GenericOutcome> partition_generic_sweep(
    const NetworkModel& net, size_t begin, size_t end, int64_t dsp_budget,
    int64_t bram_budget_bits, uint64_t bw_budget, const FpgaSpec& fpga,
    std::optional<GenericStrategy> strategy, int batch_max, int grid) {
  if (begin >= end || end > net.layers.size())
    throw ModelError("partition_generic_sweep: empty or out-of-range layer span");
  if (grid < 3) throw ModelError("partition_generic_sweep: grid must be >= 3");
  if (batch_max < 1) throw ModelError("partition_generic_sweep: batch_max must be >= 1");

  std::vector<GenericOutcome> best(batch_max);
  std::string first_reason;
  const int alpha = network_alpha(fpga, net, begin, end);
  const int64_t p_total = dsp_budget * alpha / 2;
  if (p_total < 1) {
    for (auto& o : best) {
      o.feasible = false;
      o.reason = "generic engine needs at least one DSP";
    }
    return best;
  }
  const int64_t cpf = detail::largest_pow2_at_most(
      static_cast<int64_t>(std::sqrt(static_cast<double>(p_total))));
  const int64_t kpf = p_total / cpf;

  // Hoist per-layer constants; compute latency depends only on CPF/KPF.
  std::vector<detail::SpanLayer> span;
  for (size_t i = begin; i < end; ++i) {
    const LayerSpec& l = net.layers[i];
    detail::SpanLayer s;
    s.l = &l;
    s.in_bits = net.input_bits(i);
    s.out_bits = net.output_bits(i);
    s.w_bits = net.weight_bits(i);
    s.row_bits = l.w * l.k * l.dw;
    s.wchan_bits = l.r * l.s * l.c * l.ww;
    s.l_comp = generic_compute_latency(l, cpf, kpf, fpga.freq_hz);
    span.push_back(s);
  }

  std::vector<GenericStrategy> strategies;
  if (strategy)
    strategies.push_back(*strategy);
  else
    strategies = {GenericStrategy::kUnified, GenericStrategy::kSplitIS,
                  GenericStrategy::kSplitWS};

  std::vector<double> sums(batch_max, 0.0);
  std::string reason;
  auto consider = [&](const GenericPlan& plan) {
    if (!detail::eval_plan_sums(span, plan, batch_max, &sums, &reason)) {
      if (first_reason.empty()) first_reason = reason;
      return;
    }
    for (int b = 0; b < batch_max; ++b) {
      if (!best[b].feasible || sums[b] < best[b].total_batch_latency) {
        best[b].feasible = true;
        best[b].plan = plan;
        best[b].total_batch_latency = sums[b];
      }
    }
  };

  for (GenericStrategy st : strategies) {
    std::vector<std::pair<int64_t, int64_t>> caps;  // (abuff, wbuff)
    if (st == GenericStrategy::kUnified) {
      caps.emplace_back(bram_budget_bits, 0);
    } else {
      for (int m = 1; m < grid; ++m) {
        const int64_t cap_w = bram_budget_bits * m / grid;
        caps.emplace_back(bram_budget_bits - cap_w, cap_w);
      }
    }
    for (const auto& [cap_a, cap_w] : caps) {
      for (int i = grid - 2; i >= 1; --i) {
        for (int j = 1; j <= grid - 1 - i; ++j) {
          const int k = grid - i - j;
          GenericPlan plan;
          plan.strategy = st;
          plan.cpf = cpf;
          plan.kpf = kpf;
          plan.cap_abuff_bits = cap_a;
          plan.cap_wbuff_bits = cap_w;
          plan.bw_w = bw_budget * static_cast<uint64_t>(i) / static_cast<uint64_t>(grid);
          plan.bw_ifm = bw_budget * static_cast<uint64_t>(j) / static_cast<uint64_t>(grid);
          plan.bw_ofm = bw_budget * static_cast<uint64_t>(k) / static_cast<uint64_t>(grid);
          consider(plan);
        }
      }
    }
  }

  for (auto& o : best) {
    if (!o.feasible)
      o.reason = first_reason.empty() ? "no feasible plan at minimum granularity"
                                      : first_reason;
  }
  return best;
}

/// Single-batch convenience wrapper; throws when no grid point is feasible.
inline GenericPlan partition_generic_resources(const NetworkModel& net, size_t begin,
                                               size_t end, int64_t dsp_budget,
                                               int64_t bram_budget_bits, uint64_t bw_budget,
                                               const FpgaSpec& fpga,
                                               std::optional<GenericStrategy> strategy,
                                               int64_t batch, int grid) {
  auto outcomes = partition_generic_sweep(net, begin, end, dsp_budget, bram_budget_bits,
                                          bw_budget, fpga, strategy,
                                          static_cast<int>(batch), grid);
  const GenericOutcome& o = outcomes.at(static_cast<size_t>(batch - 1));
  if (!o.feasible) throw InfeasibleError("partition_generic_resources: " + o.reason);
  return o.plan;
}

}  // namespace accelx
