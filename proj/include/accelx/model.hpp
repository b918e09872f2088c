// Network and device model types: layer shapes, FPGA resource envelopes,
// JSON ingestion with structural validation.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace accelx {

// ============================================================================
// Errors
// ============================================================================

/// Malformed or inconsistent model/device description. The message names the
/// offending field or layer.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

/// A request that no resource assignment can satisfy (budget below the
/// minimum feasible configuration, buffer below one group row, ...).
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// ============================================================================
// Layer and network description
// ============================================================================

enum class LayerKind { kConv, kPool, kFc };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kPool: return "pool";
    case LayerKind::kFc: return "fc";
  }
  return "?";
}

/// One layer of the network. H/W are the *output* feature map dimensions;
/// C/K are input/output channel counts; R/S the kernel window; DW/WW the
/// activation and weight bit widths. Stride is not modeled: downsampling is
/// expressed by the explicit per-layer output dimensions.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  int64_t h = 0, w = 0;
  int64_t c = 0, k = 0;
  int64_t r = 0, s = 0;
  int64_t dw = 0, ww = 0;
};

/// Multiply-accumulate count of one layer. POOL layers count one op per
/// window element (comparator pass over C channels).
inline int64_t layer_macs(const LayerSpec& l) {
  if (l.kind == LayerKind::kPool) return l.h * l.w * l.r * l.s * l.c;
  return l.h * l.w * l.r * l.s * l.c * l.k;
}

struct InputShape {
  int64_t c = 0, h = 0, w = 0;
};

struct NetworkModel {
  std::string name;
  InputShape input;
  std::vector<LayerSpec> layers;

  /// Input feature map height of layer i (output of the previous layer, or
  /// the network input for layer 0).
  int64_t in_h(size_t i) const { return i == 0 ? input.h : layers[i - 1].h; }
  int64_t in_w(size_t i) const { return i == 0 ? input.w : layers[i - 1].w; }

  /// Input feature map bit volume of layer i at its activation width.
  int64_t input_bits(size_t i) const {
    return in_h(i) * in_w(i) * layers[i].c * layers[i].dw;
  }
  /// Output feature map bit volume of layer i.
  int64_t output_bits(size_t i) const {
    const LayerSpec& l = layers[i];
    return l.h * l.w * l.k * l.dw;
  }
  /// Weight bit volume of layer i (zero for POOL).
  int64_t weight_bits(size_t i) const {
    const LayerSpec& l = layers[i];
    if (l.kind == LayerKind::kPool) return 0;
    return l.r * l.s * l.c * l.k * l.ww;
  }

  int64_t total_macs() const {
    int64_t sum = 0;
    for (const LayerSpec& l : layers) sum += layer_macs(l);
    return sum;
  }
};

/// MACs of layers [begin, end) that map onto the DSP array. POOL windows are
/// comparator logic, so they deliver ops without consuming DSPs and are
/// excluded; counting them would let computed DSP efficiency exceed 1.
inline int64_t dsp_mapped_macs(const NetworkModel& net, size_t begin, size_t end) {
  int64_t sum = 0;
  for (size_t i = begin; i < end; ++i)
    if (net.layers[i].kind != LayerKind::kPool) sum += layer_macs(net.layers[i]);
  return sum;
}

// ============================================================================
// Device description
// ============================================================================

/// FPGA resource envelope. Bandwidth and clock are integers (bits/s, Hz) so
/// downstream latency math stays exact.
struct FpgaSpec {
  std::string name;
  int64_t dsp = 0;
  int64_t bram_bits = 0;
  uint64_t bw_bits_per_s = 0;
  uint64_t freq_hz = 0;
  // Data width (bits) -> ops per DSP per cycle (1 MAC = 2 ops).
  std::map<int, int> alpha;

  /// Ops per DSP-cycle at the given operand width; errors when the device
  /// table has no entry for it.
  int alpha_at(int width_bits) const {
    auto it = alpha.find(width_bits);
    if (it == alpha.end()) {
      throw ModelError("fpga '" + name + "': no alpha entry for " +
                       std::to_string(width_bits) + "-bit operands");
    }
    return it->second;
  }
};

/// Ops per DSP-cycle for one layer: the wider operand decides the packing.
inline int layer_alpha(const FpgaSpec& fpga, const LayerSpec& l) {
  return fpga.alpha_at(static_cast<int>(std::max(l.dw, l.ww)));
}

/// Highest alpha over a layer range [begin, end): the peak used for
/// efficiency ratios so they stay <= 1 under mixed widths.
inline int network_alpha(const FpgaSpec& fpga, const NetworkModel& net,
                         size_t begin, size_t end) {
  int a = 0;
  for (size_t i = begin; i < end; ++i)
    a = std::max(a, layer_alpha(fpga, net.layers[i]));
  if (a == 0) throw ModelError("network_alpha: empty layer range");
  return a;
}

// ============================================================================
// JSON ingestion
// ============================================================================

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j,
                                           const char* key,
                                           const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ModelError(where + ": missing field '" + std::string(key) + "'");
  return *it;
}

inline int64_t require_int(const nlohmann::json& j, const char* key,
                           const std::string& where) {
  const nlohmann::json& v = require_field(j, key, where);
  if (v.is_number_integer()) return v.get<int64_t>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    int64_t n = static_cast<int64_t>(d);
    if (static_cast<double>(n) == d) return n;
  }
  throw ModelError(where + "." + key + ": expected an integer");
}

inline std::string require_string(const nlohmann::json& j, const char* key,
                                  const std::string& where) {
  const nlohmann::json& v = require_field(j, key, where);
  if (!v.is_string())
    throw ModelError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline int64_t require_positive(const nlohmann::json& j, const char* key,
                                const std::string& where) {
  int64_t v = require_int(j, key, where);
  if (v <= 0) throw ModelError(where + "." + key + ": must be positive");
  return v;
}

inline nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("'" + path + "': " + e.what());
  }
  return j;
}

}  // namespace detail

/// Structural checks shared by every entry point that builds a NetworkModel.
inline void validate_network(const NetworkModel& net) {
  if (net.layers.empty()) throw ModelError("network '" + net.name + "': no layers");
  if (net.input.c <= 0 || net.input.h <= 0 || net.input.w <= 0)
    throw ModelError("network '" + net.name + "': input dims must be positive");
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const std::string where = "layers[" + std::to_string(i) + "] ('" + l.name + "')";
    if (l.h <= 0 || l.w <= 0 || l.c <= 0 || l.k <= 0 || l.r <= 0 || l.s <= 0)
      throw ModelError(where + ": dimensions must be positive");
    if ((l.dw != 8 && l.dw != 16 && l.dw != 32) ||
        (l.ww != 8 && l.ww != 16 && l.ww != 32))
      throw ModelError(where + ": dw/ww must be 8, 16 or 32");
    if (l.kind == LayerKind::kPool && l.k != l.c)
      throw ModelError(where + ": pool layers must keep k == c");
    if (l.kind == LayerKind::kFc && (l.h != 1 || l.w != 1 || l.r != 1 || l.s != 1))
      throw ModelError(where + ": fc layers must have h = w = r = s = 1");
    const int64_t upstream = (i == 0) ? net.input.c : net.layers[i - 1].k;
    if (l.c != upstream)
      throw ModelError(where + ": input channels " + std::to_string(l.c) +
                       " do not chain from upstream k = " + std::to_string(upstream));
  }
}

inline NetworkModel parse_network(const nlohmann::json& j) {
  NetworkModel net;
  net.name = detail::require_string(j, "name", "network");
  const nlohmann::json& in = detail::require_field(j, "input", "network");
  net.input.c = detail::require_positive(in, "c", "input");
  net.input.h = detail::require_positive(in, "h", "input");
  net.input.w = detail::require_positive(in, "w", "input");
  const nlohmann::json& layers = detail::require_field(j, "layers", "network");
  if (!layers.is_array()) throw ModelError("network.layers: expected an array");
  for (size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "layers[" + std::to_string(i) + "]";
    const nlohmann::json& lj = layers[i];
    LayerSpec l;
    l.name = detail::require_string(lj, "name", where);
    std::string kind = detail::require_string(lj, "kind", where);
    if (kind == "conv") l.kind = LayerKind::kConv;
    else if (kind == "pool") l.kind = LayerKind::kPool;
    else if (kind == "fc") l.kind = LayerKind::kFc;
    else throw ModelError(where + ".kind: unknown kind '" + kind + "'");
    l.h = detail::require_positive(lj, "h", where);
    l.w = detail::require_positive(lj, "w", where);
    l.c = detail::require_positive(lj, "c", where);
    l.k = detail::require_positive(lj, "k", where);
    l.r = detail::require_positive(lj, "r", where);
    l.s = detail::require_positive(lj, "s", where);
    l.dw = detail::require_positive(lj, "dw", where);
    l.ww = detail::require_positive(lj, "ww", where);
    net.layers.push_back(std::move(l));
  }
  validate_network(net);
  return net;
}

inline NetworkModel load_network(const std::string& path) {
  return parse_network(detail::parse_file(path));
}

inline FpgaSpec parse_fpga(const nlohmann::json& j) {
  FpgaSpec fpga;
  fpga.name = detail::require_string(j, "name", "fpga");
  fpga.dsp = detail::require_positive(j, "dsp", "fpga");
  fpga.bram_bits = detail::require_positive(j, "bram_bits", "fpga");
  fpga.bw_bits_per_s = static_cast<uint64_t>(
      detail::require_positive(j, "bw_bits_per_s", "fpga"));
  fpga.freq_hz = static_cast<uint64_t>(
      detail::require_positive(j, "freq_hz", "fpga"));
  const nlohmann::json& alpha = detail::require_field(j, "alpha", "fpga");
  if (!alpha.is_object()) throw ModelError("fpga.alpha: expected an object");
  for (auto it = alpha.begin(); it != alpha.end(); ++it) {
    int width;
    try {
      width = std::stoi(it.key());
    } catch (const std::exception&) {
      throw ModelError("fpga.alpha: key '" + it.key() + "' is not a width");
    }
    if (!it.value().is_number_integer() || it.value().get<int64_t>() <= 0)
      throw ModelError("fpga.alpha['" + it.key() + "']: must be a positive integer");
    fpga.alpha[width] = it.value().get<int>();
  }
  auto has = [&](int w, int a) {
    auto it = fpga.alpha.find(w);
    return it != fpga.alpha.end() && it->second == a;
  };
  if (!has(16, 2) || !has(8, 4))
    throw ModelError("fpga '" + fpga.name +
                     "': alpha table must contain at least 16->2 and 8->4");
  return fpga;
}

inline FpgaSpec load_fpga(const std::string& path) {
  return parse_fpga(detail::parse_file(path));
}

}  // namespace accelx
