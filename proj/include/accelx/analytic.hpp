// Analytic performance models for the two accelerator structures:
// dedicated per-layer pipeline stages and the shared generic engine.
// Each function is one closed-form relation; composition lives in dse.hpp.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "accelx/model.hpp"

namespace accelx {

// ============================================================================
// Shared helpers
// ============================================================================

/// DSP cost of a CPF x KPF MAC array at the given ops-per-DSP-cycle rating.
/// One DSP delivers alpha/2 MACs per cycle, so cost = ceil(2 * CPF * KPF / alpha).
inline int64_t dsp_cost(int64_t cpf, int64_t kpf, int alpha) {
  const int64_t macs_per_cycle = cpf * kpf;
  return (2 * macs_per_cycle + alpha - 1) / alpha;
}

/// Peak MAC rate of `dsp` DSPs (MACs/s).
inline double dsp_peak_macs(int64_t dsp, int alpha, uint64_t freq_hz) {
  return static_cast<double>(dsp) * (alpha / 2.0) * static_cast<double>(freq_hz);
}

// ============================================================================
// Pipeline structure
// ============================================================================

struct PipelineStagePlan {
  size_t layer_index = 0;
  int64_t cpf = 1;
  int64_t kpf = 1;
};

/// Seconds one pipeline stage takes per input: MACs / (CPF * KPF * freq).
/// POOL stages parallelize along channels only (KPF fixed at 1).
inline double pipeline_stage_latency(const LayerSpec& l, int64_t cpf, int64_t kpf,
                                     uint64_t freq_hz) {
  if (cpf <= 0 || kpf <= 0) throw ModelError("pipeline_stage_latency: CPF/KPF must be positive");
  if (l.kind == LayerKind::kPool && kpf != 1)
    throw ModelError("pipeline_stage_latency: POOL stage must keep KPF = 1");
  return static_cast<double>(layer_macs(l)) /
         (static_cast<double>(cpf * kpf) * static_cast<double>(freq_hz));
}

/// Inferences per second of a stage pipeline fed `batch` inputs per pass:
/// batch / max(stage latencies).
inline double pipeline_throughput(const std::vector<double>& stage_latencies,
                                  int64_t batch) {
  if (stage_latencies.empty()) throw ModelError("pipeline_throughput: no stages");
  if (batch < 1) throw ModelError("pipeline_throughput: batch must be >= 1");
  const double worst = *std::max_element(stage_latencies.begin(), stage_latencies.end());
  return static_cast<double>(batch) / worst;
}

/// Achieved fraction of the DSP peak: (GOP/s) / (alpha * DSP * freq).
/// Values above 1 mean the model books more work than the array can do,
/// which is a consistency error.
inline double dsp_efficiency(double gops, int alpha, int64_t dsp_used,
                             uint64_t freq_hz) {
  if (dsp_used <= 0) throw ModelError("dsp_efficiency: dsp_used must be positive");
  const double peak_ops =
      static_cast<double>(alpha) * static_cast<double>(dsp_used) * static_cast<double>(freq_hz);
  const double eff = gops * 1e9 / peak_ops;
  if (eff > 1.0 + 1e-9)
    throw ModelError("dsp_efficiency: computed " + std::to_string(eff) +
                     " > 1; model inconsistency");
  return eff;
}

// ============================================================================
// Generic (reusable) structure
// ============================================================================

/// How the generic engine's on-chip memory is organized.
///  kUnified  : all BRAM holds feature maps + accumulation (input stationary).
///  kSplitIS  : separate activation/weight buffers, input-stationary order.
///  kSplitWS  : separate buffers, weight-stationary order.
enum class GenericStrategy { kUnified, kSplitIS, kSplitWS };

inline const char* to_string(GenericStrategy s) {
  switch (s) {
    case GenericStrategy::kUnified: return "1";
    case GenericStrategy::kSplitIS: return "2is";
    case GenericStrategy::kSplitWS: return "2ws";
  }
  return "?";
}

/// Resource assignment of the generic engine.
struct GenericPlan {
  GenericStrategy strategy = GenericStrategy::kUnified;
  int64_t cpf = 1;
  int64_t kpf = 1;
  int64_t cap_abuff_bits = 0;  // activation/accumulation buffer
  int64_t cap_wbuff_bits = 0;  // weight buffer (0 under kUnified)
  uint64_t bw_w = 0;           // weight stream bandwidth, bits/s
  uint64_t bw_ifm = 0;         // input fmap stream bandwidth, bits/s
  uint64_t bw_ofm = 0;         // output fmap stream bandwidth, bits/s
};

/// Number of feature map groups: output fmap bits over half the activation
/// buffer (the other half is the ping-pong partner), rounded up, minimum 1.
inline int64_t fmap_groups(const LayerSpec& l, int64_t cap_abuff_bits) {
  const int64_t half = cap_abuff_bits / 2;
  if (half <= 0) throw InfeasibleError("fmap_groups: activation buffer below one ping-pong half");
  const int64_t out_bits = l.h * l.w * l.k * l.dw;
  return std::max<int64_t>(1, (out_bits + half - 1) / half);
}

/// Number of weight groups: weight bits over half the weight buffer,
/// rounded up, minimum 1.
inline int64_t weight_groups(const LayerSpec& l, int64_t cap_wbuff_bits) {
  const int64_t half = cap_wbuff_bits / 2;
  if (half <= 0) throw InfeasibleError("weight_groups: weight buffer below one ping-pong half");
  const int64_t w_bits = l.r * l.s * l.c * l.k * l.ww;
  return std::max<int64_t>(1, (w_bits + half - 1) / half);
}

/// Compute latency of one layer on the engine. POOL layers run multiplier-
/// free channel passes scaled by CPF only.
inline double generic_compute_latency(const LayerSpec& l, int64_t cpf, int64_t kpf,
                                      uint64_t freq_hz) {
  const double par = (l.kind == LayerKind::kPool)
                         ? static_cast<double>(cpf)
                         : static_cast<double>(cpf) * static_cast<double>(kpf);
  return static_cast<double>(layer_macs(l)) / (par * static_cast<double>(freq_hz));
}

/// Seconds to stream one full copy of the layer's weights.
inline double weight_load_latency(int64_t weight_bits, uint64_t bw_bits_per_s) {
  if (bw_bits_per_s == 0) {
    if (weight_bits == 0) return 0.0;
    throw InfeasibleError("weight_load_latency: zero bandwidth with nonzero weights");
  }
  return static_cast<double>(weight_bits) / static_cast<double>(bw_bits_per_s);
}

/// Seconds to move a feature map of `bits` over a stream of the given width.
inline double fmap_move_latency(int64_t bits, uint64_t bw_bits_per_s) {
  if (bw_bits_per_s == 0) {
    if (bits == 0) return 0.0;
    throw InfeasibleError("fmap_move_latency: zero bandwidth with nonzero traffic");
  }
  return static_cast<double>(bits) / static_cast<double>(bw_bits_per_s);
}

/// Per-layer latency decomposition on the generic engine.
struct GenericLayerTerms {
  double l_comp = 0.0;
  double l_w = 0.0;    // one full weight copy
  double l_ifm = 0.0;  // one full input fmap move (0 when resident)
  double l_ofm = 0.0;  // one full output fmap move (0 when resident)
  int64_t g_fm = 1;
  int64_t g_w = 1;
  bool weight_stationary = false;
  bool resident = false;  // both fmaps fit their ping-pong halves on chip
  double l_layer = 0.0;   // per-image latency under overlap (batch = 1)
};

namespace detail {

/// Core of the per-layer model; returns false (with `reason`) when the plan
/// cannot hold even one group row / output channel of this layer.
inline bool try_generic_layer_terms(const LayerSpec& l, int64_t in_h, int64_t in_w,
                                    const GenericPlan& plan, uint64_t freq_hz,
                                    GenericLayerTerms* out, std::string* reason) {
  GenericLayerTerms t;
  const int64_t in_bits = in_h * in_w * l.c * l.dw;
  const int64_t out_bits = l.h * l.w * l.k * l.dw;
  const int64_t w_bits = (l.kind == LayerKind::kPool) ? 0 : l.r * l.s * l.c * l.k * l.ww;
  const int64_t half_a = plan.cap_abuff_bits / 2;

  t.l_comp = generic_compute_latency(l, plan.cpf, plan.kpf, freq_hz);
  if (w_bits > 0 && plan.bw_w == 0) {
    if (reason) *reason = "'" + l.name + "': weight stream has zero bandwidth";
    return false;
  }
  t.l_w = (w_bits == 0) ? 0.0 : weight_load_latency(w_bits, plan.bw_w);

  if (plan.strategy == GenericStrategy::kSplitWS) {
    // Weight-stationary: weights partitioned along K stream once; each group
    // re-streams the full input fmap and re-drains the output fmap.
    t.weight_stationary = true;
    if (w_bits > 0) {
      const int64_t half_w = plan.cap_wbuff_bits / 2;
      if (half_w <= 0 || l.r * l.s * l.c * l.ww > half_w) {
        if (reason) *reason = "'" + l.name + "': weight buffer below one output channel";
        return false;
      }
      t.g_w = weight_groups(l, plan.cap_wbuff_bits);
    }
    if (plan.bw_ifm == 0 || plan.bw_ofm == 0) {
      if (reason) *reason = "'" + l.name + "': fmap stream has zero bandwidth";
      return false;
    }
    t.l_ifm = fmap_move_latency(in_bits, plan.bw_ifm);
    t.l_ofm = fmap_move_latency(out_bits, plan.bw_ofm);
    t.l_layer = std::max(std::max(t.l_comp, t.l_w),
                         std::max(static_cast<double>(t.g_w) * t.l_ifm,
                                  static_cast<double>(t.g_w) * t.l_ofm));
    *out = t;
    return true;
  }

  // Input-stationary family: output fmap partitioned into G_fm groups; the
  // full weight set streams once per group.
  if (half_a <= 0 || l.w * l.k * l.dw > half_a) {
    if (reason) *reason = "'" + l.name + "': activation buffer below one output row";
    return false;
  }
  t.g_fm = fmap_groups(l, plan.cap_abuff_bits);
  t.resident = (in_bits <= half_a && out_bits <= half_a);
  if (t.resident) {
    // Both fmaps live on chip: no streaming terms survive.
    t.l_layer = std::max(t.l_comp, static_cast<double>(t.g_fm) * t.l_w);
  } else {
    if (plan.bw_ifm == 0 || plan.bw_ofm == 0) {
      if (reason) *reason = "'" + l.name + "': fmap stream has zero bandwidth";
      return false;
    }
    t.l_ifm = fmap_move_latency(in_bits, plan.bw_ifm);
    t.l_ofm = fmap_move_latency(out_bits, plan.bw_ofm);
    t.l_layer = std::max(std::max(t.l_comp, static_cast<double>(t.g_fm) * t.l_w),
                         std::max(t.l_ifm, t.l_ofm));
  }
  *out = t;
  return true;
}

}  // namespace detail

/// Per-layer latency decomposition; errors when the plan's buffers cannot
/// hold one group row (IS) or one output channel of weights (WS).
inline GenericLayerTerms generic_layer_latency(const LayerSpec& l, int64_t in_h,
                                               int64_t in_w, const GenericPlan& plan,
                                               uint64_t freq_hz) {
  GenericLayerTerms t;
  std::string reason;
  if (!detail::try_generic_layer_terms(l, in_h, in_w, plan, freq_hz, &t, &reason))
    throw InfeasibleError("generic_layer_latency: " + reason);
  return t;
}

/// Latency of one layer for a batch processed back to back. Weight traffic
/// is shared across the batch (each group's weights serve every image before
/// the group advances); compute and fmap traffic scale with the batch.
inline double generic_layer_batch_latency(const GenericLayerTerms& t, int64_t batch) {
  const double b = static_cast<double>(batch);
  if (t.weight_stationary) {
    return std::max(std::max(b * t.l_comp, t.l_w),
                    std::max(b * static_cast<double>(t.g_w) * t.l_ifm,
                             b * static_cast<double>(t.g_w) * t.l_ofm));
  }
  return std::max(std::max(b * t.l_comp, static_cast<double>(t.g_fm) * t.l_w),
                  std::max(b * t.l_ifm, b * t.l_ofm));
}

// ============================================================================
// Aggregated estimates
// ============================================================================

struct LayerPerf {
  std::string name;
  double l_comp = 0.0, l_w = 0.0, l_ifm = 0.0, l_ofm = 0.0;
  double l_layer = 0.0;  // per image, overlap + batch amortization applied
  int64_t g_fm = 0, g_w = 0;
};

struct PerfEstimate {
  std::vector<LayerPerf> per_layer;
  double total_latency = 0.0;  // seconds per batch
  double throughput_gops = 0.0;
  double throughput_inf_s = 0.0;
  double dsp_efficiency = 0.0;
};

/// Run layers [begin, end) of `net` through the generic engine plan at the
/// given batch size. Layers execute in order, so the batch latency is the sum
/// of per-layer batch latencies; throughput is batch / that sum.
inline PerfEstimate generic_network_perf(const NetworkModel& net, size_t begin, size_t end,
                                         const GenericPlan& plan, uint64_t freq_hz,
                                         int64_t batch, int alpha, int64_t dsp_used) {
  if (begin >= end || end > net.layers.size())
    throw ModelError("generic_network_perf: empty or out-of-range layer span");
  if (batch < 1) throw ModelError("generic_network_perf: batch must be >= 1");
  PerfEstimate est;
  int64_t macs = 0;
  for (size_t i = begin; i < end; ++i) {
    const LayerSpec& l = net.layers[i];
    const GenericLayerTerms t =
        generic_layer_latency(l, net.in_h(i), net.in_w(i), plan, freq_hz);
    const double t_batch = generic_layer_batch_latency(t, batch);
    LayerPerf p;
    p.name = l.name;
    p.l_comp = t.l_comp;
    p.l_w = t.l_w;
    p.l_ifm = t.l_ifm;
    p.l_ofm = t.l_ofm;
    p.g_fm = t.g_fm;
    p.g_w = t.g_w;
    p.l_layer = t_batch / static_cast<double>(batch);
    est.per_layer.push_back(p);
    est.total_latency += t_batch;
    macs += layer_macs(l);
  }
  est.throughput_inf_s = static_cast<double>(batch) / est.total_latency;
  est.throughput_gops = 2.0 * static_cast<double>(macs) * est.throughput_inf_s / 1e9;
  // Efficiency counts only DSP-mapped work; pool passes ride along for free
  // in GOP/s but cannot make the array look better used than it is.
  const double mac_gops = 2.0 * static_cast<double>(dsp_mapped_macs(net, begin, end)) *
                          est.throughput_inf_s / 1e9;
  if (dsp_used > 0) est.dsp_efficiency = dsp_efficiency(mac_gops, alpha, dsp_used, freq_hz);
  return est;
}

}  // namespace accelx
