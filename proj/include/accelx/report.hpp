// Machine-readable report emission: JSON for configs and estimates, CSV for
// tables and traces. Every report embeds the tool version, SHA-256 digests
// of the input files, and the full run configuration; nothing time-varying
// goes in, so identical runs produce byte-identical files.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "accelx/dse.hpp"
#include "accelx/model.hpp"
#include "accelx/oracle.hpp"
#include "accelx/profile.hpp"

namespace accelx {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// ============================================================================
// Provenance
// ============================================================================

/// Everything a command was invoked with; embedded in every report.
struct RunConfig {
  std::string command;
  std::string network_path;
  std::string fpga_path;  // empty when the command takes no device
  std::string out_dir;
  int grid = 16;
  int64_t batch_max = 16;
  uint64_t seed = 0;
  std::string strategy = "auto";
  std::string sweep;          // profile: requested resolution sweep, verbatim
  int64_t instances = 1000;   // validate: random instance count
  std::optional<Rav> rav;     // estimate: the vector under evaluation
};

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open file for digest: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw ModelError("sha256 digest failed for: " + path);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

inline Json rav_json(const Rav& r) {
  return Json{{"sp", r.sp},
              {"batch", r.batch},
              {"dsp_split", r.dsp_split()},
              {"bram_split", r.bram_split()},
              {"bw_split", r.bw_split()},
              {"dsp_num", r.dsp_num},
              {"bram_num", r.bram_num},
              {"bw_num", r.bw_num},
              {"den", r.den}};
}

inline Json provenance_json(const RunConfig& rc) {
  Json inputs = Json::object();
  if (!rc.network_path.empty())
    inputs["network"] = {{"path", rc.network_path}, {"sha256", sha256_file(rc.network_path)}};
  if (!rc.fpga_path.empty())
    inputs["fpga"] = {{"path", rc.fpga_path}, {"sha256", sha256_file(rc.fpga_path)}};
  Json run{{"command", rc.command}, {"grid", rc.grid},       {"batch_max", rc.batch_max},
           {"seed", rc.seed},       {"strategy", rc.strategy}};
  if (!rc.sweep.empty()) run["sweep"] = rc.sweep;
  if (rc.command == "validate") run["instances"] = rc.instances;
  if (rc.rav) run["rav"] = rav_json(*rc.rav);
  if (!rc.out_dir.empty()) run["out"] = rc.out_dir;
  return Json{{"version", kVersion}, {"inputs", inputs}, {"run", run}};
}

// ============================================================================
// Serialization helpers
// ============================================================================

namespace detail {

/// Deterministic shortest-ish decimal for CSV cells.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot open output file: " + path);
  out << text;
  if (!out) throw ModelError("failed writing output file: " + path);
}

}  // namespace detail

inline void write_json_file(const std::string& path, const Json& j) {
  detail::write_text_file(path, j.dump(2) + "\n");
}

inline Json perf_json(const PerfEstimate& p, bool with_layers = true) {
  Json j{{"total_latency_s", p.total_latency},
         {"throughput_gops", p.throughput_gops},
         {"throughput_inf_s", p.throughput_inf_s},
         {"dsp_efficiency", p.dsp_efficiency}};
  if (with_layers && !p.per_layer.empty()) {
    Json layers = Json::array();
    for (const LayerPerf& lp : p.per_layer)
      layers.push_back(Json{{"name", lp.name},
                            {"l_comp_s", lp.l_comp},
                            {"l_w_s", lp.l_w},
                            {"l_ifm_s", lp.l_ifm},
                            {"l_ofm_s", lp.l_ofm},
                            {"l_layer_s", lp.l_layer},
                            {"g_fm", lp.g_fm},
                            {"g_w", lp.g_w}});
    j["per_layer"] = layers;
  }
  return j;
}

inline Json config_json(const ArchitectureConfig& cfg, const NetworkModel& net) {
  Json j;
  j["rav"] = rav_json(cfg.rav);
  j["feasible"] = cfg.feasible;
  if (!cfg.feasible) j["reason"] = cfg.reason;
  j["dsp_used"] = cfg.dsp_used;
  j["bram_used_bits"] = cfg.bram_used;
  if (cfg.pipeline) {
    Json stages = Json::array();
    for (size_t i = 0; i < cfg.pipeline->stages.size(); ++i) {
      const PipelineStagePlan& s = cfg.pipeline->stages[i];
      stages.push_back(Json{{"layer", net.layers[s.layer_index].name},
                            {"cpf", s.cpf},
                            {"kpf", s.kpf},
                            {"latency_s", cfg.pipeline->stage_latencies[i]}});
    }
    j["pipeline"] = Json{{"stages", stages},
                         {"dsp_used", cfg.pipeline->dsp_used},
                         {"bram_used_bits", cfg.pipeline->bram_used},
                         {"traffic_bits_per_image", cfg.pipeline->traffic_bits},
                         {"max_stage_latency_s", cfg.pipeline->max_stage_latency},
                         {"continuous_bound_s", cfg.pipeline->continuous_bound}};
  }
  if (cfg.generic) {
    j["generic"] = Json{{"strategy", to_string(cfg.generic->strategy)},
                        {"cpf", cfg.generic->cpf},
                        {"kpf", cfg.generic->kpf},
                        {"cap_abuff_bits", cfg.generic->cap_abuff_bits},
                        {"cap_wbuff_bits", cfg.generic->cap_wbuff_bits},
                        {"bw_w_bits_per_s", cfg.generic->bw_w},
                        {"bw_ifm_bits_per_s", cfg.generic->bw_ifm},
                        {"bw_ofm_bits_per_s", cfg.generic->bw_ofm}};
  }
  if (cfg.pipeline_perf) j["pipeline_perf"] = perf_json(*cfg.pipeline_perf, false);
  if (cfg.generic_perf) j["generic_perf"] = perf_json(*cfg.generic_perf);
  if (cfg.feasible) j["perf"] = perf_json(cfg.perf, false);
  return j;
}

// ============================================================================
// Report writers
// ============================================================================

inline void write_profile_csv(const std::string& path,
                              const std::vector<LayerProfile>& profiles) {
  std::string text = "name,kind,macs,input_bits,output_bits,weight_bits,ctc\n";
  for (const LayerProfile& p : profiles) {
    text += p.name + "," + to_string(p.kind) + "," + std::to_string(p.macs) + "," +
            std::to_string(p.input_bits) + "," + std::to_string(p.output_bits) + "," +
            std::to_string(p.weight_bits) + "," + detail::fmt_double(p.ctc) + "\n";
  }
  detail::write_text_file(path, text);
}

inline void write_half_split_json(const std::string& path, const HalfSplitReport& rep,
                                  const RunConfig& rc) {
  Json j{{"provenance", provenance_json(rc)},
         {"split_index", rep.split_index},
         {"v1", rep.v1},
         {"v2", rep.v2},
         {"ratio", rep.ratio},
         {"degenerate", rep.degenerate}};
  write_json_file(path, j);
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepPoint>& pts) {
  std::string text = "size,median_ctc\n";
  for (const SweepPoint& p : pts)
    text += std::to_string(p.size) + "," + detail::fmt_double(p.median_ctc) + "\n";
  detail::write_text_file(path, text);
}

inline void write_estimate_json(const std::string& path, const ArchitectureConfig& cfg,
                                const NetworkModel& net, const RunConfig& rc) {
  Json j{{"provenance", provenance_json(rc)}, {"config", config_json(cfg, net)}};
  write_json_file(path, j);
}

inline void write_best_config_json(const std::string& path, const ExploreResult& res,
                                   const NetworkModel& net, const RunConfig& rc) {
  Json j{{"provenance", provenance_json(rc)},
         {"found", res.found},
         {"evaluations", res.evaluations}};
  if (res.found) {
    j["config"] = config_json(res.best, net);
  } else {
    Json reasons = Json::array();
    for (const auto& [sp, why] : res.sp_reasons)
      reasons.push_back(Json{{"sp", sp}, {"reason", why}});
    j["sp_reasons"] = reasons;
  }
  write_json_file(path, j);
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::string text = "sp,batch,dsp_split,bram_split,bw_split,feasible,gops,effi\n";
  for (const TraceRow& r : rows) {
    text += std::to_string(r.rav.sp) + "," + std::to_string(r.rav.batch) + "," +
            detail::fmt_double(r.rav.dsp_split()) + "," +
            detail::fmt_double(r.rav.bram_split()) + "," +
            detail::fmt_double(r.rav.bw_split()) + "," + (r.feasible ? "1" : "0") + "," +
            detail::fmt_double(r.gops) + "," + detail::fmt_double(r.effi) + "\n";
  }
  detail::write_text_file(path, text);
}

/// Debug dump of one simulation's schedule.
inline void write_sim_trace_csv(const std::string& path, const std::vector<SimEvent>& events) {
  std::string text = "kind,group,start_s,end_s\n";
  for (const SimEvent& e : events)
    text += std::string(to_string(e.kind)) + "," + std::to_string(e.group) + "," +
            detail::fmt_double(static_cast<double>(e.start)) + "," +
            detail::fmt_double(static_cast<double>(e.end)) + "\n";
  detail::write_text_file(path, text);
}

}  // namespace accelx
