// Event-driven simulator checked against pen-and-paper schedules, then used
// as a property oracle; brute-force enumerator sizing and guard rails.
#include "accelx/oracle.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <string>
#include <vector>

#include "accelx/model.hpp"
#include "test_util.hpp"

using namespace accelx;
using testutil::conv;
using testutil::pool;

namespace {

GenericPlan plan_of(GenericStrategy st, int64_t cap_a, int64_t cap_w, uint64_t bw_w,
                    uint64_t bw_ifm, uint64_t bw_ofm) {
  GenericPlan p;
  p.strategy = st;
  p.cpf = 1;
  p.kpf = 1;
  p.cap_abuff_bits = cap_a;
  p.cap_wbuff_bits = cap_w;
  p.bw_w = bw_w;
  p.bw_ifm = bw_ifm;
  p.bw_ofm = bw_ofm;
  return p;
}

}  // namespace

TEST(Simulator, ResidentSingleGroupIsLoadThenCompute) {
  // Fmaps fit on chip: the whole schedule is one weight load followed by one
  // compute burst; nothing else may appear on the timeline.
  const LayerSpec l = conv("c", 2, 2, 1, 2, 1, 8, 8);
  const GenericPlan p = plan_of(GenericStrategy::kUnified, 128, 0, 1600, 0, 0);
  const SimResult r = simulate_generic_layer(l, 2, 2, p, 100000000);

  EXPECT_EQ(r.groups, 1);
  EXPECT_EQ(r.analytic, Rational(1, 100));  // bound by the 16-bit weight load
  ASSERT_EQ(r.events.size(), 2u);
  EXPECT_EQ(r.events[0].kind, SimEventKind::kWeightLoad);
  EXPECT_EQ(r.events[0].start, Rational(0));
  EXPECT_EQ(r.events[0].end, Rational(1, 100));
  EXPECT_EQ(r.events[1].kind, SimEventKind::kCompute);
  EXPECT_EQ(r.events[1].start, Rational(1, 100));
  EXPECT_EQ(r.makespan, Rational(16, 1600) + Rational(8, 100000000));
}

TEST(Simulator, InputStationaryStreamingPipelinesGroups) {
  // Eight fmap groups, compute-bound: loads hide under compute after the
  // first group, so the makespan is first-loads + G computes + last store.
  const LayerSpec l = conv("c", 8, 1, 1, 1, 1, 8, 8);
  const GenericPlan p =
      plan_of(GenericStrategy::kUnified, 16, 0, 800000000, 640000000, 640000000);
  const SimResult r = simulate_generic_layer(l, 8, 1, p, 1000000);

  EXPECT_EQ(r.groups, 8);
  EXPECT_EQ(r.analytic, Rational(8, 1000000));  // == l_comp
  EXPECT_EQ(r.group_period, Rational(1, 1000000));
  EXPECT_EQ(r.events.size(), 32u);  // 4 real events per group
  EXPECT_EQ(r.makespan, Rational(321, 40000000));  // 12.5ns + 8us + 12.5ns
  // Within tolerance: one group of slack here.
  EXPECT_LE(r.makespan - r.analytic, 2 * r.group_period);
}

TEST(Simulator, WeightStationaryStreamingMatchesHandSchedule) {
  // Four weight groups bound by the weight stream; double buffering overlaps
  // fmap traffic but the last group's compute and store stick out.
  const LayerSpec l = conv("c", 2, 2, 2, 4, 1, 8, 8);
  const GenericPlan p =
      plan_of(GenericStrategy::kSplitWS, 0, 32, 1000000, 64000000, 128000000);
  const SimResult r = simulate_generic_layer(l, 2, 2, p, 1000000);

  EXPECT_EQ(r.groups, 4);
  EXPECT_EQ(r.analytic, Rational(64, 1000000));  // == l_w
  EXPECT_EQ(r.group_period, Rational(16, 1000000));
  EXPECT_EQ(r.events.size(), 16u);
  EXPECT_EQ(r.makespan, Rational(73, 1000000));
  EXPECT_LE(r.makespan - r.analytic, 2 * r.group_period);
}

TEST(Simulator, ResidentPoolLayerComputesWithZeroTraffic) {
  const LayerSpec l = pool("p", 2, 2, 2, 2, 8);
  const GenericPlan p = plan_of(GenericStrategy::kUnified, 1024, 0, 0, 0, 0);
  const SimResult r = simulate_generic_layer(l, 4, 4, p, 100000000);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].kind, SimEventKind::kCompute);
  EXPECT_EQ(r.makespan, r.analytic);  // nothing to overlap, zero slack
  EXPECT_EQ(r.makespan, Rational(32, 100000000));
}

TEST(Simulator, RandomSchedulesStayWithinTwoGroupPeriods) {
  std::mt19937_64 rng(20240817u);
  for (int i = 0; i < 300; ++i) {
    const testutil::RandomCase c = testutil::draw_case(rng);
    const SimResult r = simulate_generic_layer(c.layer, c.in_h, c.in_w, c.plan, 100000000);

    // The bottleneck resource works serially, so the schedule can never beat
    // the closed form; double buffering must keep it within two periods.
    ASSERT_GE(r.makespan, r.analytic) << "case " << i;
    ASSERT_LE(r.makespan - r.analytic, 2 * r.group_period) << "case " << i;

    // Well-formed timeline: each resource runs one event at a time, computes
    // start after their own group's loads, stores after their compute.
    std::map<SimEventKind, Rational> busy_until;
    std::map<int64_t, Rational> loads_done, comp_done;
    int64_t computes = 0;
    for (const SimEvent& e : r.events) {
      ASSERT_LT(e.start, e.end) << "case " << i;
      ASSERT_LE(e.end, r.makespan) << "case " << i;
      auto [it, fresh] = busy_until.emplace(e.kind, e.end);
      if (!fresh) {
        ASSERT_LE(it->second, e.start) << "case " << i << ": overlap on "
                                       << to_string(e.kind);
        it->second = e.end;
      }
      if (e.kind == SimEventKind::kWeightLoad || e.kind == SimEventKind::kIfmLoad) {
        Rational& done = loads_done[e.group];
        done = std::max(done, e.end);
      } else if (e.kind == SimEventKind::kCompute) {
        ++computes;
        auto ld = loads_done.find(e.group);
        if (ld != loads_done.end())
          ASSERT_LE(ld->second, e.start) << "case " << i << " group " << e.group;
        comp_done[e.group] = e.end;
      } else {
        ASSERT_LE(comp_done[e.group], e.start) << "case " << i << " group " << e.group;
      }
    }
    ASSERT_EQ(computes, r.groups) << "case " << i;
  }
}

TEST(BruteForce, PointCountFollowsGridGeometry) {
  // sp=0 and sp=N contribute batch-only axes; interior cuts get the full
  // (grid+1)^3 split cube per batch.
  EXPECT_EQ(brute_force_points(3, 4, 4), 1008u);
  EXPECT_EQ(brute_force_points(1, 4, 4), 8u);       // no interior cuts
  EXPECT_EQ(brute_force_points(2, 3, 2), 4u + 2u * 64u);
}

TEST(BruteForce, RefusesOversizedSearchSpaces) {
  const NetworkModel net = load_network(testutil::model_path("vgg16.json"));
  const FpgaSpec fpga = testutil::toy_fpga();
  BruteForceOptions opt;
  opt.grid = 16;
  opt.batch_max = 16;
  try {
    brute_force_dse(net, fpga, opt);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    // The refusal names the exact size so the caller can budget.
    EXPECT_NE(std::string(e.what()).find("1336368"), std::string::npos) << e.what();
  }
}

TEST(BruteForce, GuardsDegenerateOptions) {
  const NetworkModel net = testutil::toy_fixtures()[0];
  const FpgaSpec fpga = testutil::toy_fpga();
  BruteForceOptions opt;
  opt.grid = 2;
  EXPECT_THROW(brute_force_dse(net, fpga, opt), ModelError);
  opt.grid = 4;
  opt.batch_max = 0;
  EXPECT_THROW(brute_force_dse(net, fpga, opt), ModelError);
}
