// Workload profiling: per-layer MAC/traffic accounting, computation-to-
// communication ratios, half-split variance statistics, resolution sweeps.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "accelx/model.hpp"

namespace accelx {

// ============================================================================
// Per-layer profile
// ============================================================================

/// Static cost sheet of one layer. `ctc` is MACs per byte of off-chip
/// traffic assuming no cross-layer reuse: every input/output feature map
/// element and every weight moves once at the layer's bit widths.
struct LayerProfile {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  int64_t macs = 0;
  int64_t input_bits = 0;
  int64_t output_bits = 0;
  int64_t weight_bits = 0;
  double ctc = 0.0;
};

inline LayerProfile layer_profile(const NetworkModel& net, size_t i) {
  const LayerSpec& l = net.layers[i];
  LayerProfile p;
  p.name = l.name;
  p.kind = l.kind;
  p.macs = layer_macs(l);
  p.input_bits = net.input_bits(i);
  p.output_bits = net.output_bits(i);
  p.weight_bits = net.weight_bits(i);
  const int64_t traffic_bits = p.input_bits + p.output_bits + p.weight_bits;
  p.ctc = 8.0 * static_cast<double>(p.macs) / static_cast<double>(traffic_bits);
  return p;
}

/// Profiles every layer; `include_pool = false` drops POOL layers (their
/// near-zero ctc can drown conv statistics).
inline std::vector<LayerProfile> profile_network(const NetworkModel& net,
                                                 bool include_pool = true) {
  std::vector<LayerProfile> out;
  out.reserve(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    if (!include_pool && net.layers[i].kind == LayerKind::kPool) continue;
    out.push_back(layer_profile(net, i));
  }
  return out;
}

// ============================================================================
// Half-split variance statistics
// ============================================================================

/// Network split into a front half holding >= 50% of the MACs and a back
/// half with the rest; v1/v2 are the population variances of per-layer ctc
/// within each half.
struct HalfSplitReport {
  size_t split_index = 0;  // first layer index of the second half
  double v1 = 0.0;
  double v2 = 0.0;
  double ratio = 0.0;  // v1 / v2; +inf when v2 == 0
  bool degenerate = false;
};

namespace detail {

inline double population_variance(const std::vector<LayerProfile>& profiles,
                                  size_t begin, size_t end) {
  const double n = static_cast<double>(end - begin);
  double mean = 0.0;
  for (size_t i = begin; i < end; ++i) mean += profiles[i].ctc;
  mean /= n;
  double acc = 0.0;
  for (size_t i = begin; i < end; ++i) {
    const double d = profiles[i].ctc - mean;
    acc += d * d;
  }
  return acc / n;
}

}  // namespace detail

/// Splits at the smallest prefix reaching half the total MACs. When that
/// prefix would swallow every layer, the split is capped so the last layer
/// forms the second half and the report is flagged degenerate.
inline HalfSplitReport half_split(const std::vector<LayerProfile>& profiles) {
  size_t nonzero = 0;
  const LayerProfile* only = nullptr;
  int64_t total = 0;
  for (const LayerProfile& p : profiles) {
    total += p.macs;
    if (p.macs > 0) {
      ++nonzero;
      only = &p;
    }
  }
  if (nonzero < 2) {
    throw ModelError("half_split: needs at least 2 layers with work" +
                     (only ? ("; all MACs sit in '" + only->name + "'")
                           : std::string("; none found")));
  }

  HalfSplitReport rep;
  int64_t acc = 0;
  size_t split = profiles.size();
  for (size_t i = 0; i < profiles.size(); ++i) {
    acc += profiles[i].macs;
    if (2 * acc >= total) {  // cumulative >= 50%
      split = i + 1;
      break;
    }
  }
  if (split >= profiles.size()) {  // second half would be empty
    split = profiles.size() - 1;
    rep.degenerate = true;
  }
  rep.split_index = split;
  rep.v1 = detail::population_variance(profiles, 0, split);
  rep.v2 = detail::population_variance(profiles, split, profiles.size());
  if (split == 1 || split + 1 == profiles.size()) rep.degenerate = true;
  rep.ratio = rep.v2 > 0.0 ? rep.v1 / rep.v2
                           : std::numeric_limits<double>::infinity();
  if (rep.v2 == 0.0) rep.degenerate = true;
  return rep;
}

// ============================================================================
// Resolution sweep
// ============================================================================

/// Median MACs-per-weight-byte at one input size. Weight traffic is the
/// resolution-independent part of a layer's footprint, so this median tracks
/// how compute density scales with the input; zero-weight layers (POOL)
/// carry no weight traffic and are excluded from the median.
struct SweepPoint {
  int64_t size = 0;
  double median_ctc = 0.0;
};

namespace detail {

inline double weight_ctc_median(const NetworkModel& net) {
  std::vector<double> vals;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const int64_t wb = net.weight_bits(i);
    if (wb == 0) continue;
    vals.push_back(8.0 * static_cast<double>(layer_macs(net.layers[i])) /
                   static_cast<double>(wb));
  }
  if (vals.empty())
    throw ModelError("resolution_sweep: network has no weighted layers");
  std::sort(vals.begin(), vals.end());
  const size_t n = vals.size();
  return (n % 2 == 1) ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

}  // namespace detail

/// Rescales the network to input `size` x `size`, keeping every layer's
/// H/W in proportion. Errors when a size does not divide evenly through the
/// downsampling chain.
inline NetworkModel rescale_network(const NetworkModel& net, int64_t size) {
  for (const LayerSpec& l : net.layers) {
    if (l.kind == LayerKind::kFc)
      throw ModelError("rescale: '" + l.name +
                       "' is fully connected; network is not fully convolutional");
  }
  NetworkModel scaled = net;
  auto scale_dim = [&](int64_t v, const std::string& what) {
    const int64_t num = v * size;
    if (num % net.input.h != 0)
      throw ModelError("rescale: size " + std::to_string(size) +
                       " does not divide evenly at " + what);
    return num / net.input.h;
  };
  if (net.input.h != net.input.w)
    throw ModelError("rescale: base input must be square");
  scaled.input.h = scaled.input.w = size;
  for (LayerSpec& l : scaled.layers) {
    l.h = scale_dim(l.h, "'" + l.name + "'.h");
    l.w = scale_dim(l.w, "'" + l.name + "'.w");
  }
  return scaled;
}

/// Median compute-per-weight-byte for each requested input size.
inline std::vector<SweepPoint> resolution_sweep(const NetworkModel& net,
                                                const std::vector<int64_t>& sizes) {
  std::vector<SweepPoint> out;
  out.reserve(sizes.size());
  for (int64_t size : sizes) {
    if (size <= 0) throw ModelError("resolution_sweep: sizes must be positive");
    NetworkModel scaled = rescale_network(net, size);
    out.push_back({size, detail::weight_ctc_median(scaled)});
  }
  return out;
}

}  // namespace accelx
