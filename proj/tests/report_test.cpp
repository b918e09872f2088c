// Artifact writers: digests, JSON shape, CSV layout, and numeric formatting.
#include "accelx/report.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "accelx/profile.hpp"
#include "test_util.hpp"

using namespace accelx;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST(Sha256, MatchesKnownVector) {
  const std::string path = ::testing::TempDir() + "digest_probe.txt";
  detail::write_text_file(path, "abc");
  EXPECT_EQ(sha256_file(path),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_THROW(sha256_file(path + ".missing"), ModelError);
}

TEST(FmtDouble, RoundTripsAndKeepsDyadicsShort) {
  EXPECT_EQ(detail::fmt_double(0.25), "0.25");
  EXPECT_EQ(detail::fmt_double(256.0), "256");
  // 17 significant digits reproduce the exact bits on re-parse.
  const double v = 1.0 / 3.0;
  EXPECT_EQ(std::stod(detail::fmt_double(v)), v);
}

TEST(JsonFile, WritesIndentedWithTrailingNewlineAndRoundTrips) {
  const Json j{{"a", 1}, {"b", {1, 2, 3}}, {"s", "text"}};
  const std::string path = ::testing::TempDir() + "roundtrip.json";
  write_json_file(path, j);
  const std::string text = slurp(path);
  EXPECT_EQ(text, j.dump(2) + "\n");
  EXPECT_EQ(Json::parse(text), j);
}

TEST(ProvenanceJson, DigestsInputsAndEchoesRunParameters) {
  RunConfig rc;
  rc.command = "estimate";
  rc.network_path = testutil::model_path("toy3.json");
  rc.fpga_path = testutil::model_path("small_fpga.json");
  rc.grid = 8;
  rc.batch_max = 4;
  Rav r;
  r.sp = 1;
  r.batch = 2;
  r.dsp_num = 4;
  r.bram_num = 8;
  r.bw_num = 12;
  r.den = 16;
  rc.rav = r;

  const Json j = provenance_json(rc);
  EXPECT_EQ(j.at("version"), kVersion);
  EXPECT_EQ(j.at("inputs").at("network").at("sha256"),
            sha256_file(rc.network_path));
  EXPECT_EQ(j.at("inputs").at("fpga").at("path"), rc.fpga_path);
  EXPECT_EQ(j.at("run").at("command"), "estimate");
  EXPECT_EQ(j.at("run").at("grid"), 8);
  EXPECT_EQ(j.at("run").at("rav").at("dsp_split"), 0.25);
  EXPECT_EQ(j.at("run").at("rav").at("den"), 16);
}

TEST(ProfileCsv, OneRowPerLayerUnderFixedHeader) {
  const NetworkModel net = testutil::toy_fixtures()[2];  // toy3
  const std::vector<LayerProfile> profiles = profile_network(net);
  const std::string path = ::testing::TempDir() + "profile.csv";
  write_profile_csv(path, profiles);

  const std::vector<std::string> lines = lines_of(slurp(path));
  ASSERT_EQ(lines.size(), net.layers.size() + 1);
  EXPECT_EQ(lines[0], "name,kind,macs,input_bits,output_bits,weight_bits,ctc");
  EXPECT_EQ(lines[1].substr(0, 8), "c1,conv,");
  EXPECT_EQ(lines[3].substr(0, 8), "p1,pool,");
}

TEST(TraceCsv, EmitsSplitsAsFractionsAndFeasibilityAsBit) {
  TraceRow row;
  row.rav.sp = 1;
  row.rav.batch = 2;
  row.rav.dsp_num = 4;
  row.rav.bram_num = 8;
  row.rav.bw_num = 12;
  row.rav.den = 16;
  row.feasible = true;
  row.gops = 1.5;
  row.effi = 0.5;
  const std::string path = ::testing::TempDir() + "trace.csv";
  write_trace_csv(path, {row});

  const std::vector<std::string> lines = lines_of(slurp(path));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], "sp,batch,dsp_split,bram_split,bw_split,feasible,gops,effi");
  EXPECT_EQ(lines[1], "1,2,0.25,0.5,0.75,1,1.5,0.5");
}

TEST(BestConfigJson, InfeasibleRunsCarryReasonsInsteadOfConfig) {
  ExploreResult res;
  res.found = false;
  res.evaluations = 7;
  res.sp_reasons = {{0, "too small"}, {1, "still too small"}};
  RunConfig rc;
  rc.command = "explore";
  rc.network_path = testutil::model_path("toy3.json");
  const std::string path = ::testing::TempDir() + "best_config.json";
  write_best_config_json(path, res, testutil::toy_fixtures()[2], rc);

  const Json j = Json::parse(slurp(path));
  EXPECT_EQ(j.at("found"), false);
  EXPECT_EQ(j.at("evaluations"), 7);
  EXPECT_FALSE(j.contains("config"));
  ASSERT_EQ(j.at("sp_reasons").size(), 2u);
  EXPECT_EQ(j.at("sp_reasons")[1].at("reason"), "still too small");
}

TEST(SimTraceCsv, DumpsOneLinePerEvent) {
  SimEvent e;
  e.kind = SimEventKind::kCompute;
  e.group = 3;
  e.start = Rational(1, 4);
  e.end = Rational(1, 2);
  const std::string path = ::testing::TempDir() + "sim_trace.csv";
  write_sim_trace_csv(path, {e, e});

  const std::vector<std::string> lines = lines_of(slurp(path));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "kind,group,start_s,end_s");
  EXPECT_EQ(lines[1], "compute,3,0.25,0.5");
}
