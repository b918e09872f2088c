// Command-line front end: profile a network, estimate one candidate
// configuration, explore the full design space, or run the self-checking
// validation suites. All outputs are deterministic for fixed inputs and
// seed; reports embed version, input digests, and the run configuration.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "accelx/allocation.hpp"
#include "accelx/analytic.hpp"
#include "accelx/dse.hpp"
#include "accelx/model.hpp"
#include "accelx/oracle.hpp"
#include "accelx/profile.hpp"
#include "accelx/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUserError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitValidation = 3;

std::optional<accelx::GenericStrategy> parse_strategy(const std::string& s) {
  if (s == "auto") return std::nullopt;
  if (s == "1") return accelx::GenericStrategy::kUnified;
  if (s == "2is") return accelx::GenericStrategy::kSplitIS;
  if (s == "2ws") return accelx::GenericStrategy::kSplitWS;
  throw accelx::ModelError("unknown strategy '" + s + "' (expected 1, 2is, 2ws, auto)");
}

/// Sweep spec: either "lo..hi" (multiples of lo up to hi) or a comma list.
std::vector<int64_t> parse_sweep(const std::string& spec) {
  std::vector<int64_t> sizes;
  const size_t dots = spec.find("..");
  if (dots != std::string::npos) {
    const int64_t lo = std::stoll(spec.substr(0, dots));
    const int64_t hi = std::stoll(spec.substr(dots + 2));
    if (lo < 1 || hi < lo) throw accelx::ModelError("bad sweep range: " + spec);
    for (int64_t s = lo; s <= hi; s += lo) sizes.push_back(s);
    return sizes;
  }
  size_t pos = 0;
  while (pos < spec.size()) {
    size_t comma = spec.find(',', pos);
    if (comma == std::string::npos) comma = spec.size();
    sizes.push_back(std::stoll(spec.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (sizes.empty()) throw accelx::ModelError("empty sweep spec");
  return sizes;
}

/// Convert a user split fraction to a grid numerator; rejects off-grid values.
int split_to_num(double v, int grid, const std::string& flag) {
  const double scaled = v * grid;
  const int num = static_cast<int>(std::llround(scaled));
  if (v < 0.0 || v > 1.0 || std::abs(scaled - num) > 1e-9)
    throw accelx::ModelError(flag + " = " + std::to_string(v) +
                             " is not a multiple of 1/" + std::to_string(grid));
  return num;
}

std::string out_path(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

// ----------------------------------------------------------------------------
// profile
// ----------------------------------------------------------------------------

int cmd_profile(const accelx::RunConfig& rc) {
  const accelx::NetworkModel net = accelx::load_network(rc.network_path);
  const std::vector<accelx::LayerProfile> profiles = accelx::profile_network(net);
  accelx::write_profile_csv(out_path(rc.out_dir, "profile.csv"), profiles);
  const accelx::HalfSplitReport hs = accelx::half_split(profiles);
  accelx::write_half_split_json(out_path(rc.out_dir, "half_split.json"), hs, rc);
  std::cout << "profiled " << profiles.size() << " layers of '" << net.name
            << "': half-split at " << hs.split_index << ", v1 = " << hs.v1
            << ", v2 = " << hs.v2 << ", ratio = " << hs.ratio << "\n";
  if (!rc.sweep.empty()) {
    const std::vector<int64_t> sizes = parse_sweep(rc.sweep);
    const std::vector<accelx::SweepPoint> pts = accelx::resolution_sweep(net, sizes);
    accelx::write_sweep_csv(out_path(rc.out_dir, "sweep.csv"), pts);
    std::cout << "sweep: " << pts.size() << " sizes, median CTC "
              << pts.front().median_ctc << " -> " << pts.back().median_ctc << "\n";
  }
  return kExitOk;
}

// ----------------------------------------------------------------------------
// estimate
// ----------------------------------------------------------------------------

int cmd_estimate(const accelx::RunConfig& rc) {
  const accelx::NetworkModel net = accelx::load_network(rc.network_path);
  const accelx::FpgaSpec fpga = accelx::load_fpga(rc.fpga_path);
  const accelx::ArchitectureConfig cfg = accelx::evaluate_rav(
      net, fpga, *rc.rav, parse_strategy(rc.strategy), rc.grid);
  accelx::write_estimate_json(out_path(rc.out_dir, "estimate.json"), cfg, net, rc);
  if (!cfg.feasible) {
    std::cerr << "infeasible: " << cfg.reason << "\n";
    return kExitInfeasible;
  }
  std::cout << "sp = " << cfg.rav.sp << ", batch = " << cfg.rav.batch << ": "
            << cfg.perf.throughput_gops << " GOP/s, " << cfg.perf.throughput_inf_s
            << " inf/s, DSP efficiency " << cfg.perf.dsp_efficiency << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------------------
// explore
// ----------------------------------------------------------------------------

int cmd_explore(const accelx::RunConfig& rc) {
  const accelx::NetworkModel net = accelx::load_network(rc.network_path);
  const accelx::FpgaSpec fpga = accelx::load_fpga(rc.fpga_path);
  accelx::ExploreOptions opt;
  opt.grid = rc.grid;
  opt.batch_max = rc.batch_max;
  opt.seed = rc.seed;
  opt.strategy = parse_strategy(rc.strategy);
  const accelx::ExploreResult res = accelx::explore(net, fpga, opt);
  accelx::write_best_config_json(out_path(rc.out_dir, "best_config.json"), res, net, rc);
  accelx::write_trace_csv(out_path(rc.out_dir, "trace.csv"), res.trace);
  if (!res.found) {
    std::cerr << "no feasible configuration found; per-sp reasons in best_config.json\n";
    return kExitInfeasible;
  }
  const accelx::ArchitectureConfig& best = res.best;
  std::cout << "best of " << res.evaluations << " candidates: sp = " << best.rav.sp
            << ", batch = " << best.rav.batch << ", splits (dsp " << best.rav.dsp_split()
            << ", bram " << best.rav.bram_split() << ", bw " << best.rav.bw_split()
            << ")\n"
            << "  " << best.perf.throughput_gops << " GOP/s, "
            << best.perf.throughput_inf_s << " inf/s, DSP efficiency "
            << best.perf.dsp_efficiency << ", " << best.dsp_used << " DSP, "
            << best.bram_used << " BRAM bits\n";
  if (best.pipeline) {
    std::cout << "  pipeline stages (cpf x kpf):";
    for (const accelx::PipelineStagePlan& s : best.pipeline->stages)
      std::cout << " " << net.layers[s.layer_index].name << "=" << s.cpf << "x" << s.kpf;
    std::cout << "\n";
  }
  if (best.generic) {
    std::cout << "  generic engine: strategy " << accelx::to_string(best.generic->strategy)
              << ", " << best.generic->cpf << "x" << best.generic->kpf << " array, abuff "
              << best.generic->cap_abuff_bits << " bits, wbuff "
              << best.generic->cap_wbuff_bits << " bits\n";
  }
  return kExitOk;
}

// ----------------------------------------------------------------------------
// validate
// ----------------------------------------------------------------------------

struct SimViolation {
  int64_t instance;
  std::string what;
};

/// Random layer/plan cases for the simulator suite. Draw order is fixed so
/// the stream is reproducible whatever the case turns out to be.
struct RandomCase {
  accelx::LayerSpec layer;
  int64_t in_h, in_w;
  accelx::GenericPlan plan;
};

RandomCase draw_case(std::mt19937_64& rng) {
  auto pick = [&rng](int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(rng() % static_cast<uint64_t>(hi - lo + 1));
  };
  RandomCase c;
  accelx::LayerSpec& l = c.layer;
  const bool pool = pick(0, 4) == 0;
  l.kind = pool ? accelx::LayerKind::kPool : accelx::LayerKind::kConv;
  l.h = pick(1, 32);
  l.w = pick(1, 32);
  l.c = pick(1, 64);
  l.k = pick(1, 128);
  l.r = 2 * pick(0, 2) + 1;  // 1, 3, 5
  l.s = 2 * pick(0, 2) + 1;
  l.dw = pick(0, 1) ? 8 : 16;
  l.ww = pick(0, 1) ? 8 : 16;
  if (pool) {
    l.k = l.c;
    l.r = l.s = pick(2, 3);
  }
  l.name = "rnd";
  c.in_h = l.h + l.r - 1;
  c.in_w = l.w + l.s - 1;

  accelx::GenericPlan& p = c.plan;
  const int64_t strat = pick(0, 2);
  p.strategy = strat == 0 ? accelx::GenericStrategy::kUnified
               : strat == 1 ? accelx::GenericStrategy::kSplitIS
                            : accelx::GenericStrategy::kSplitWS;
  p.cpf = int64_t{1} << pick(0, 5);
  p.kpf = int64_t{1} << pick(0, 5);
  const int64_t out_bits = l.h * l.w * l.k * l.dw;
  const int64_t row_bits = l.w * l.k * l.dw;
  const int64_t w_bits = l.r * l.s * l.c * l.k * l.ww;
  const int64_t wchan_bits = l.r * l.s * l.c * l.ww;
  // Buffer sizes spanning many-group to fully-resident regimes.
  p.cap_abuff_bits = 2 * (row_bits + pick(0, 4) * out_bits + pick(0, 1024));
  p.cap_wbuff_bits = 2 * (wchan_bits + pick(0, 4) * (w_bits / 4) + pick(0, 1024));
  p.bw_w = static_cast<uint64_t>(pick(1, 9)) << pick(20, 34);
  p.bw_ifm = static_cast<uint64_t>(pick(1, 9)) << pick(20, 34);
  p.bw_ofm = static_cast<uint64_t>(pick(1, 9)) << pick(20, 34);
  return c;
}

/// Built-in toy networks for the explore-vs-brute-force suite.
std::vector<accelx::NetworkModel> toy_fixtures() {
  using accelx::LayerKind;
  auto conv = [](std::string name, int64_t h, int64_t w, int64_t c, int64_t k, int64_t r) {
    accelx::LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::kConv;
    l.h = h; l.w = w; l.c = c; l.k = k; l.r = r; l.s = r;
    l.dw = 16; l.ww = 16;
    return l;
  };
  auto pool = [](std::string name, int64_t h, int64_t w, int64_t c) {
    accelx::LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::kPool;
    l.h = h; l.w = w; l.c = c; l.k = c; l.r = 2; l.s = 2;
    l.dw = 16; l.ww = 16;
    return l;
  };
  std::vector<accelx::NetworkModel> nets;
  {
    accelx::NetworkModel n;
    n.name = "toy1";
    n.input = {3, 8, 8};
    n.layers = {conv("c1", 8, 8, 3, 8, 3)};
    nets.push_back(n);
  }
  {
    accelx::NetworkModel n;
    n.name = "toy2";
    n.input = {3, 16, 16};
    n.layers = {conv("c1", 16, 16, 3, 8, 3), pool("p1", 8, 8, 8)};
    nets.push_back(n);
  }
  {
    accelx::NetworkModel n;
    n.name = "toy3";
    n.input = {4, 12, 12};
    n.layers = {conv("c1", 12, 12, 4, 6, 3), conv("c2", 12, 12, 6, 12, 1),
                pool("p1", 6, 6, 12)};
    nets.push_back(n);
  }
  {
    accelx::NetworkModel n;
    n.name = "toy5";
    n.input = {3, 16, 16};
    n.layers = {conv("c1", 16, 16, 3, 6, 3), conv("c2", 16, 16, 6, 12, 3),
                pool("p1", 8, 8, 12), conv("c3", 8, 8, 12, 24, 3),
                conv("c4", 8, 8, 24, 16, 1)};
    nets.push_back(n);
  }
  return nets;
}

accelx::FpgaSpec toy_fpga() {
  accelx::FpgaSpec f;
  f.name = "toy-device";
  f.dsp = 128;
  f.bram_bits = 1 << 20;
  f.bw_bits_per_s = 1000000000;  // 1 Gb/s
  f.freq_hz = 100000000;         // 100 MHz
  f.alpha = {{8, 4}, {16, 2}};
  return f;
}

int cmd_validate(const accelx::RunConfig& rc) {
  using accelx::Rational;
  // Suite 1: event simulator vs the closed-form latency, exact arithmetic.
  std::mt19937_64 rng(rc.seed);
  int64_t sim_pass = 0;
  double max_dev_periods = 0.0;
  std::vector<SimViolation> violations;
  for (int64_t i = 0; i < rc.instances; ++i) {
    RandomCase c = draw_case(rng);
    accelx::SimResult sim;
    try {
      sim = accelx::simulate_generic_layer(c.layer, c.in_h, c.in_w, c.plan, 100000000);
    } catch (const accelx::InfeasibleError&) {
      // Buffer floors are sized into the draw, but keep the guard: an
      // infeasible draw is a generator bug worth surfacing.
      violations.push_back({i, "generated case infeasible"});
      continue;
    }
    const Rational slack = sim.makespan - sim.analytic;
    const double dev = sim.group_period == 0
                           ? 0.0
                           : static_cast<double>(Rational(slack / sim.group_period));
    max_dev_periods = std::max(max_dev_periods, dev);
    if (slack < 0) {
      violations.push_back({i, "simulated latency below analytic"});
    } else if (slack > 2 * sim.group_period) {
      violations.push_back({i, "deviation " + std::to_string(dev) + " group periods"});
    } else {
      ++sim_pass;
    }
  }

  // Suite 2: explore equals brute-force enumeration on the toy fixtures.
  const accelx::FpgaSpec fpga = toy_fpga();
  int64_t dse_pass = 0;
  std::vector<std::string> mismatches;
  const std::vector<accelx::NetworkModel> toys = toy_fixtures();
  for (const accelx::NetworkModel& toy : toys) {
    accelx::ExploreOptions eo;
    eo.grid = 4;
    eo.batch_max = 4;
    eo.seed = rc.seed;
    const accelx::ExploreResult ex = accelx::explore(toy, fpga, eo);
    accelx::BruteForceOptions bo;
    bo.grid = 4;
    bo.batch_max = 4;
    const accelx::ExploreResult bf = accelx::brute_force_dse(toy, fpga, bo);
    if (ex.found != bf.found ||
        (ex.found && (!accelx::rav_eq(ex.best.rav, bf.best.rav) ||
                      ex.best.perf.throughput_gops != bf.best.perf.throughput_gops))) {
      mismatches.push_back(toy.name);
    } else {
      ++dse_pass;
    }
  }

  accelx::Json j{{"provenance", accelx::provenance_json(rc)}};
  accelx::Json viol = accelx::Json::array();
  for (const SimViolation& v : violations)
    viol.push_back(accelx::Json{{"instance", v.instance}, {"what", v.what}});
  j["sim_suite"] = accelx::Json{{"instances", rc.instances},
                                {"pass", sim_pass},
                                {"fail", static_cast<int64_t>(violations.size())},
                                {"max_deviation_group_periods", max_dev_periods},
                                {"violations", viol}};
  j["dse_suite"] = accelx::Json{{"fixtures", toys.size()},
                                {"pass", dse_pass},
                                {"fail", mismatches.size()},
                                {"mismatches", mismatches}};
  accelx::write_json_file(out_path(rc.out_dir, "validate.json"), j);

  std::cout << "sim suite: " << sim_pass << "/" << rc.instances
            << " within 2 group periods (max deviation " << max_dev_periods
            << "); dse suite: " << dse_pass << "/" << toys.size() << " exact matches\n";
  if (!violations.empty() || !mismatches.empty()) {
    std::cerr << "validation failed: " << violations.size() << " sim violations, "
              << mismatches.size() << " dse mismatches (see validate.json)\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analytic modeling and design-space exploration for hybrid "
               "pipeline/generic DNN accelerators"};
  app.require_subcommand(1);

  accelx::RunConfig rc;
  double dsp_split = 0.0, bram_split = 0.0, bw_split = 0.0;
  int64_t sp = 0, batch = 1;

  auto add_common = [&rc](CLI::App* cmd, bool with_fpga) {
    cmd->add_option("--network", rc.network_path, "network model JSON")
        ->required()
        ->check(CLI::ExistingFile);
    if (with_fpga)
      cmd->add_option("--fpga", rc.fpga_path, "FPGA device JSON")
          ->required()
          ->check(CLI::ExistingFile);
    cmd->add_option("--out", rc.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--grid", rc.grid, "split granularity denominator")
        ->capture_default_str()
        ->check(CLI::Range(3, 64));
  };
  rc.out_dir = ".";

  CLI::App* prof = app.add_subcommand("profile", "per-layer workload statistics");
  add_common(prof, false);
  prof->add_option("--sweep", rc.sweep,
                   "input-resolution sweep: 'lo..hi' (multiples of lo) or comma list");

  CLI::App* est = app.add_subcommand("estimate", "evaluate one resource allocation vector");
  add_common(est, true);
  est->add_option("--sp", sp, "split point: layers [0, sp) are pipeline stages")->required();
  est->add_option("--batch", batch, "batch size")->capture_default_str();
  est->add_option("--dsp-split", dsp_split, "pipeline share of DSPs")->capture_default_str();
  est->add_option("--bram-split", bram_split, "pipeline share of BRAM")->capture_default_str();
  est->add_option("--bw-split", bw_split, "pipeline share of bandwidth")->capture_default_str();
  est->add_option("--strategy", rc.strategy, "generic buffer strategy")
      ->check(CLI::IsMember({"1", "2is", "2ws", "auto"}))
      ->capture_default_str();

  CLI::App* exp = app.add_subcommand("explore", "search the full design space");
  add_common(exp, true);
  exp->add_option("--batch-max", rc.batch_max, "largest batch size searched")
      ->capture_default_str()
      ->check(CLI::Range(int64_t{1}, int64_t{1024}));
  exp->add_option("--seed", rc.seed, "restart seed")->capture_default_str();
  exp->add_option("--strategy", rc.strategy, "generic buffer strategy")
      ->check(CLI::IsMember({"1", "2is", "2ws", "auto"}))
      ->capture_default_str();

  CLI::App* val = app.add_subcommand("validate", "run the self-checking oracle suites");
  val->add_option("--out", rc.out_dir, "output directory")->capture_default_str();
  val->add_option("--instances", rc.instances, "random simulator instances")
      ->capture_default_str()
      ->check(CLI::Range(int64_t{0}, int64_t{10000000}));
  val->add_option("--seed", rc.seed, "instance generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the message; 0 for --help/--version
    return code == 0 ? kExitOk : kExitUserError;
  }

  try {
    if (prof->parsed()) {
      rc.command = "profile";
      return cmd_profile(rc);
    }
    if (est->parsed()) {
      rc.command = "estimate";
      accelx::Rav rav;
      rav.sp = static_cast<size_t>(sp);
      rav.batch = batch;
      rav.den = rc.grid;
      rav.dsp_num = split_to_num(dsp_split, rc.grid, "--dsp-split");
      rav.bram_num = split_to_num(bram_split, rc.grid, "--bram-split");
      rav.bw_num = split_to_num(bw_split, rc.grid, "--bw-split");
      rc.rav = rav;
      return cmd_estimate(rc);
    }
    if (exp->parsed()) {
      rc.command = "explore";
      return cmd_explore(rc);
    }
    rc.command = "validate";
    return cmd_validate(rc);
  } catch (const accelx::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const accelx::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  }
}
