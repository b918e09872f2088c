// Resource allocation: pipeline stage balancing under a DSP budget and the
// generic engine's buffer/bandwidth partition sweep.
#include "accelx/allocation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "accelx/analytic.hpp"
#include "accelx/model.hpp"
#include "test_util.hpp"

using namespace accelx;
using testutil::conv;
using testutil::make_net;
using testutil::pool;

TEST(PipelineBuffers, LineBufferHoldsKernelHeightRows) {
  const NetworkModel net = load_network(testutil::model_path("vgg16.json"));
  // conv1_2: 3 rows of 224 x 64 channels at 16 bit, double buffered.
  EXPECT_EQ(stage_buffer_bits(net, 1), 2 * 3 * 224 * 64 * 16);  // 1,376,256

  // Pointwise layers still hold one (r = 1) input row per buffer half.
  const NetworkModel pt =
      make_net("pt", {4, 10, 10}, {conv("c", 10, 10, 4, 8, 1, 8, 8)});
  EXPECT_EQ(stage_buffer_bits(pt, 0), 2 * 1 * 10 * 4 * 8);

  EXPECT_EQ(size_pipeline_buffers(net, 0, 2),
            stage_buffer_bits(net, 0) + stage_buffer_bits(net, 1));
}

TEST(PipelineTraffic, EndpointFmapsPlusAllWeights) {
  const NetworkModel net = load_network(testutil::model_path("vgg16.json"));
  // [0, 2): network input + conv1_2 output + both weight sets.
  EXPECT_EQ(pipeline_traffic_bits(net, 0, 2),
            2408448 + 51380224 + 27648 + 589824);
}

TEST(BalancePipeline, UniformLayersGetUniformParallelism) {
  std::vector<LayerSpec> layers;
  for (int i = 0; i < 4; ++i)
    layers.push_back(conv("c" + std::to_string(i), 8, 8, 16, 16, 3));
  NetworkModel net;
  net.name = "uniform";
  net.input = {16, 8, 8};
  net.layers = layers;  // identical work per stage (c chain holds: 16 -> 16)
  validate_network(net);

  const FpgaSpec fpga = testutil::toy_fpga();
  for (int64_t budget : {64, 256, 259, 300, 2048}) {
    const PipelinePlanSet set = balance_pipeline(net, 0, 4, budget, fpga);
    ASSERT_EQ(set.stages.size(), 4u);
    EXPECT_LE(set.dsp_used, budget) << "budget " << budget;
    const int64_t p0 = set.stages[0].cpf * set.stages[0].kpf;
    for (const PipelineStagePlan& s : set.stages)
      EXPECT_EQ(s.cpf * s.kpf, p0) << "budget " << budget;
    for (double l : set.stage_latencies)
      EXPECT_DOUBLE_EQ(l, set.max_stage_latency) << "budget " << budget;
  }
}

TEST(BalancePipeline, ParallelismTracksWorkRatio) {
  // Stage 0 carries exactly 3x the MACs of stage 1 on the same channel
  // lattice; a 512-DSP budget splits 384 / 128.
  const NetworkModel net = make_net(
      "ratio", {48, 12, 12},
      {conv("a", 12, 12, 48, 48, 3), conv("b", 8, 6, 48, 48, 3)});
  ASSERT_EQ(layer_macs(net.layers[0]), 3 * layer_macs(net.layers[1]));

  const PipelinePlanSet set = balance_pipeline(net, 0, 2, 512, testutil::toy_fpga());
  const int64_t p0 = set.stages[0].cpf * set.stages[0].kpf;
  const int64_t p1 = set.stages[1].cpf * set.stages[1].kpf;
  EXPECT_EQ(p0, 384);
  EXPECT_EQ(p1, 128);
  // Equal work per DSP on both stages: latencies match exactly.
  EXPECT_DOUBLE_EQ(set.stage_latencies[0], set.stage_latencies[1]);
  EXPECT_EQ(set.dsp_used, 512);
}

TEST(BalancePipeline, MinimumBudgetIsOneUnitPerConvStage) {
  const NetworkModel net = make_net(
      "min", {3, 4, 4},
      {conv("a", 4, 4, 3, 3, 1), conv("b", 4, 4, 3, 3, 1), conv("c", 4, 4, 3, 3, 1)});
  const FpgaSpec fpga = testutil::toy_fpga();

  const PipelinePlanSet set = balance_pipeline(net, 0, 3, 3, fpga);
  EXPECT_EQ(set.dsp_used, 3);
  for (const PipelineStagePlan& s : set.stages) EXPECT_EQ(s.cpf * s.kpf, 1);

  try {
    balance_pipeline(net, 0, 3, 2, fpga);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("below one unit per stage"), std::string::npos);
  }
}

TEST(BalancePipeline, PoolStagesRunFullWidthAtZeroDspCost) {
  const NetworkModel net = make_net(
      "cpc", {3, 16, 16},
      {conv("c1", 16, 16, 3, 8, 3), pool("p1", 8, 8, 8), conv("c2", 8, 8, 8, 8, 3)});
  const PipelinePlanSet set = balance_pipeline(net, 0, 3, 64, testutil::toy_fpga());
  ASSERT_EQ(set.stages.size(), 3u);
  EXPECT_EQ(set.stages[1].cpf, 8);  // full channel parallelism
  EXPECT_EQ(set.stages[1].kpf, 1);
  // DSPs are spent on the conv stages only.
  const int64_t conv_cost =
      dsp_cost(set.stages[0].cpf, set.stages[0].kpf, 2) +
      dsp_cost(set.stages[2].cpf, set.stages[2].kpf, 2);
  EXPECT_EQ(set.dsp_used, conv_cost);
  EXPECT_LE(set.dsp_used, 64);
}

TEST(BalancePipeline, ReportsConsistentLatenciesAndBound) {
  const NetworkModel net = load_network(testutil::model_path("vgg16.json"));
  const FpgaSpec fpga = load_fpga(testutil::model_path("ku115.json"));
  const PipelinePlanSet set = balance_pipeline(net, 0, 9, 2760, fpga);

  EXPECT_LE(set.dsp_used, 2760);
  ASSERT_EQ(set.stages.size(), 9u);
  for (size_t s = 0; s < set.stages.size(); ++s) {
    const PipelineStagePlan& p = set.stages[s];
    EXPECT_DOUBLE_EQ(set.stage_latencies[s],
                     pipeline_stage_latency(net.layers[p.layer_index], p.cpf, p.kpf,
                                            fpga.freq_hz));
  }
  EXPECT_DOUBLE_EQ(set.max_stage_latency,
                   *std::max_element(set.stage_latencies.begin(),
                                     set.stage_latencies.end()));
  EXPECT_EQ(set.bram_used, size_pipeline_buffers(net, 0, 9));
  EXPECT_EQ(set.traffic_bits, pipeline_traffic_bits(net, 0, 9));
  EXPECT_LE(set.max_stage_latency, 2.0 * set.continuous_bound);
}

TEST(BalancePipeline, NoSingleUnitTransferImproves) {
  // Moving one ladder step from any stage to any other (within budget) must
  // not lower the bottleneck latency of the returned plan.
  const NetworkModel net = load_network(testutil::model_path("vgg16.json"));
  const FpgaSpec fpga = load_fpga(testutil::model_path("ku115.json"));
  const PipelinePlanSet set = balance_pipeline(net, 0, 9, 2760, fpga);

  const size_t n = set.stages.size();
  std::vector<std::vector<detail::StageOption>> options(n);
  std::vector<size_t> pick(n, 0);
  for (size_t s = 0; s < n; ++s) {
    const LayerSpec& l = net.layers[set.stages[s].layer_index];
    options[s] = detail::stage_options(l, layer_alpha(fpga, l));
    const int64_t product = set.stages[s].cpf * set.stages[s].kpf;
    for (size_t o = 0; o < options[s].size(); ++o)
      if (options[s][o].product == product) pick[s] = o;
  }
  auto max_latency = [&](const std::vector<size_t>& p) {
    double worst = 0.0;
    int64_t used = 0;
    for (size_t s = 0; s < n; ++s) {
      const LayerSpec& l = net.layers[set.stages[s].layer_index];
      worst = std::max(worst, static_cast<double>(layer_macs(l)) /
                                  (static_cast<double>(options[s][p[s]].product) *
                                   static_cast<double>(fpga.freq_hz)));
      used += options[s][p[s]].cost;
    }
    return std::pair<double, int64_t>(worst, used);
  };
  const double base = max_latency(pick).first;

  for (size_t down = 0; down < n; ++down) {
    if (pick[down] == 0) continue;
    for (size_t up = 0; up < n; ++up) {
      if (up == down || pick[up] + 1 >= options[up].size()) continue;
      std::vector<size_t> p = pick;
      --p[down];
      ++p[up];
      const auto [lat, used] = max_latency(p);
      if (used <= 2760)
        EXPECT_GE(lat, base * (1 - 1e-12)) << "transfer " << down << " -> " << up;
    }
  }
}

TEST(BalancePipeline, StageLatencyWithinTwiceContinuousBoundOnBundledNets) {
  const FpgaSpec fpga = load_fpga(testutil::model_path("ku115.json"));
  for (const char* name : {"vgg16.json", "vgg19.json", "vgg25.json", "vgg31.json",
                           "vgg38.json"}) {
    const NetworkModel net = load_network(testutil::model_path(name));
    const PipelinePlanSet set =
        balance_pipeline(net, 0, net.layers.size(), fpga.dsp, fpga);
    EXPECT_LE(set.max_stage_latency, 2.0 * set.continuous_bound) << name;
    EXPECT_LE(set.dsp_used, fpga.dsp) << name;
  }
}

// --- generic-side partition ---------------------------------------------------

namespace {

/// Re-evaluates one plan through the public per-layer API.
bool public_span_latency(const NetworkModel& net, size_t begin, size_t end,
                         const GenericPlan& plan, uint64_t freq_hz, int64_t batch,
                         double* out) {
  double sum = 0.0;
  for (size_t i = begin; i < end; ++i) {
    GenericLayerTerms t;
    std::string reason;
    if (!detail::try_generic_layer_terms(net.layers[i], net.in_h(i), net.in_w(i), plan,
                                         freq_hz, &t, &reason))
      return false;
    sum += generic_layer_batch_latency(t, batch);
  }
  *out = sum;
  return true;
}

/// The same candidate plans the sweep enumerates, rebuilt independently.
std::vector<GenericPlan> grid_plans(int64_t dsp, int64_t bram, uint64_t bw, int alpha,
                                    std::optional<GenericStrategy> strategy, int grid) {
  const int64_t p_total = dsp * alpha / 2;
  int64_t cpf = 1;
  while (cpf * 2 <= static_cast<int64_t>(std::sqrt(static_cast<double>(p_total)))) cpf *= 2;
  const int64_t kpf = p_total / cpf;

  std::vector<GenericStrategy> strategies;
  if (strategy)
    strategies.push_back(*strategy);
  else
    strategies = {GenericStrategy::kUnified, GenericStrategy::kSplitIS,
                  GenericStrategy::kSplitWS};

  std::vector<GenericPlan> plans;
  for (GenericStrategy st : strategies) {
    std::vector<std::pair<int64_t, int64_t>> caps;
    if (st == GenericStrategy::kUnified) {
      caps.emplace_back(bram, 0);
    } else {
      for (int m = 1; m < grid; ++m)
        caps.emplace_back(bram - bram * m / grid, bram * m / grid);
    }
    for (const auto& [cap_a, cap_w] : caps) {
      for (int i = grid - 2; i >= 1; --i) {
        for (int j = 1; j <= grid - 1 - i; ++j) {
          const int k = grid - i - j;
          GenericPlan p;
          p.strategy = st;
          p.cpf = cpf;
          p.kpf = kpf;
          p.cap_abuff_bits = cap_a;
          p.cap_wbuff_bits = cap_w;
          p.bw_w = bw * static_cast<uint64_t>(i) / static_cast<uint64_t>(grid);
          p.bw_ifm = bw * static_cast<uint64_t>(j) / static_cast<uint64_t>(grid);
          p.bw_ofm = bw * static_cast<uint64_t>(k) / static_cast<uint64_t>(grid);
          plans.push_back(p);
        }
      }
    }
  }
  return plans;
}

}  // namespace

TEST(PartitionGeneric, WinnerIsGridOptimumUnderPublicModel) {
  const NetworkModel net = testutil::toy_fixtures()[2];  // toy3: conv conv pool
  const FpgaSpec fpga = testutil::toy_fpga();
  const int64_t dsp = 64, bram = 1 << 18;
  const uint64_t bw = 500000000;
  const int grid = 4, batch_max = 3;

  for (std::optional<GenericStrategy> strat :
       {std::optional<GenericStrategy>{}, std::optional<GenericStrategy>{GenericStrategy::kUnified},
        std::optional<GenericStrategy>{GenericStrategy::kSplitIS},
        std::optional<GenericStrategy>{GenericStrategy::kSplitWS}}) {
    const std::vector<GenericOutcome> outcomes = partition_generic_sweep(
        net, 0, 3, dsp, bram, bw, fpga, strat, batch_max, grid);
    ASSERT_EQ(outcomes.size(), static_cast<size_t>(batch_max));

    const int alpha = network_alpha(fpga, net, 0, 3);
    const std::vector<GenericPlan> plans = grid_plans(dsp, bram, bw, alpha, strat, grid);
    for (int b = 1; b <= batch_max; ++b) {
      const GenericOutcome& o = outcomes[static_cast<size_t>(b - 1)];
      ASSERT_TRUE(o.feasible);
      // The reported winner reproduces exactly through the public API.
      double win = 0.0;
      ASSERT_TRUE(public_span_latency(net, 0, 3, o.plan, fpga.freq_hz, b, &win));
      EXPECT_DOUBLE_EQ(win, o.total_batch_latency);
      // And no enumerated plan beats it.
      for (const GenericPlan& p : plans) {
        double lat = 0.0;
        if (public_span_latency(net, 0, 3, p, fpga.freq_hz, b, &lat))
          EXPECT_GE(lat, o.total_batch_latency * (1 - 1e-12));
      }
    }
  }
}

TEST(PartitionGeneric, WeightDominatedSpanMaximizesWeightBandwidth) {
  // A 1x1x256->256 "fully connected" conv: 1 Mbit of weights against 4 kbit
  // fmaps. The fmaps are resident, so everything rides on the weight stream.
  const NetworkModel net =
      make_net("wdom", {256, 1, 1}, {conv("fc1", 1, 1, 256, 256, 1)});
  const FpgaSpec fpga = testutil::toy_fpga();
  const int grid = 16;
  const GenericPlan plan = partition_generic_resources(
      net, 0, 1, 64, 1 << 20, 1000000000, fpga, std::nullopt, 1, grid);
  EXPECT_EQ(plan.strategy, GenericStrategy::kUnified);
  EXPECT_EQ(plan.bw_w, 1000000000ull * (grid - 2) / grid);
  EXPECT_GT(plan.bw_w, plan.bw_ifm);
  EXPECT_GT(plan.bw_w, plan.bw_ofm);
}

TEST(PartitionGeneric, SymmetricStreamingSplitsFmapBandwidthEvenly) {
  // No weights, input bits == output bits, fmaps too large to sit on chip:
  // the best split gives the fmap streams equal shares and the weight stream
  // the floor.
  const NetworkModel net = make_net("sym", {4, 64, 64}, {pool("sym", 64, 64, 4, 1)});
  FpgaSpec fpga = testutil::toy_fpga();
  const int grid = 16;
  const GenericPlan plan = partition_generic_resources(
      net, 0, 1, 16, 16384, 100000000, fpga, std::nullopt, 1, grid);
  EXPECT_EQ(plan.bw_ifm, plan.bw_ofm);
  EXPECT_EQ(plan.bw_ifm, 100000000ull * 7 / grid);
  EXPECT_EQ(plan.bw_w, 100000000ull * 2 / grid);
}

TEST(PartitionGeneric, SplitInputStationaryNeverBeatsUnified) {
  // A separate weight buffer only shrinks the activation half without
  // changing any input-stationary latency term.
  const FpgaSpec fpga = testutil::toy_fpga();
  for (const NetworkModel& net : testutil::toy_fixtures()) {
    const size_t n = net.layers.size();
    const auto unified = partition_generic_sweep(net, 0, n, 64, 1 << 16, 500000000,
                                                 fpga, GenericStrategy::kUnified, 2, 4);
    const auto split_is = partition_generic_sweep(net, 0, n, 64, 1 << 16, 500000000,
                                                  fpga, GenericStrategy::kSplitIS, 2, 4);
    for (size_t b = 0; b < 2; ++b) {
      if (!split_is[b].feasible) continue;
      ASSERT_TRUE(unified[b].feasible) << net.name;
      EXPECT_LE(unified[b].total_batch_latency,
                split_is[b].total_batch_latency * (1 + 1e-12))
          << net.name << " batch " << (b + 1);
    }
  }
}

TEST(PartitionGeneric, InfeasibilityReasonsAreSpecific) {
  const NetworkModel net = testutil::toy_fixtures()[0];  // single conv
  const FpgaSpec fpga = testutil::toy_fpga();

  auto no_dsp = partition_generic_sweep(net, 0, 1, 0, 1 << 20, 1000000000, fpga,
                                        std::nullopt, 1, 4);
  ASSERT_FALSE(no_dsp[0].feasible);
  EXPECT_NE(no_dsp[0].reason.find("at least one DSP"), std::string::npos);

  auto no_bram = partition_generic_sweep(net, 0, 1, 64, 2, 1000000000, fpga,
                                         GenericStrategy::kUnified, 1, 4);
  ASSERT_FALSE(no_bram[0].feasible);
  EXPECT_NE(no_bram[0].reason.find("activation buffer"), std::string::npos);

  auto no_bw = partition_generic_sweep(net, 0, 1, 64, 1 << 20, 0, fpga,
                                       std::nullopt, 1, 4);
  ASSERT_FALSE(no_bw[0].feasible);
  EXPECT_NE(no_bw[0].reason.find("zero bandwidth"), std::string::npos);

  EXPECT_THROW(partition_generic_resources(net, 0, 1, 0, 1 << 20, 1000000000, fpga,
                                           std::nullopt, 1, 4),
               InfeasibleError);
  EXPECT_THROW(partition_generic_sweep(net, 0, 1, 64, 1 << 20, 1000000000, fpga,
                                       std::nullopt, 1, 2),
               ModelError);  // grid below 3
  EXPECT_THROW(partition_generic_sweep(net, 0, 0, 64, 1 << 20, 1000000000, fpga,
                                       std::nullopt, 1, 4),
               ModelError);  // empty span
}
