#include <gtest/gtest.h>

#include "cli_pipeline.hpp"

using namespace densetnt::testing;
namespace fs = std::filesystem;

namespace {

const std::string kCli = DENSETNT_CLI_PATH;

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("densetnt_cli_" + name); }

}  // namespace

TEST(Cli, UnknownFlagPrintsUsageAndExitsTwo) {
  EXPECT_EQ(run_cli(kCli, "gen --out /tmp/x --no-such-flag"), 2);
  EXPECT_EQ(run_cli(kCli, "no-such-command"), 2);
  EXPECT_EQ(run_cli(kCli, ""), 2);
}

TEST(Cli, EmptyHeatmapFails) {
  const fs::path dir = scratch("empty");
  fs::create_directories(dir);
  std::ofstream(dir / "empty.csv").close();
  const std::string cmd = "\"" + kCli + "\" optimize --heatmap " + (dir / "empty.csv").string() + " --out " +
                          (dir / "g.csv").string() + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  std::string text;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) text += buf;
  const int status = pclose(pipe);
  EXPECT_NE(WEXITSTATUS(status), 0);
  EXPECT_NE(text.find("empty-heatmap"), std::string::npos) << text;
  fs::remove_all(dir);
}

TEST(Cli, GenTwiceIsIdentical) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  ASSERT_EQ(run_cli(kCli, "gen --seed 7 --count 3 --out " + a.string()), 0);
  ASSERT_EQ(run_cli(kCli, "gen --seed 7 --count 3 --out " + b.string()), 0);
  for (const char* f : {"index.csv", "scene_0000.json", "scene_0002.json"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  EXPECT_EQ(read_file(a / "index.csv").rfind("# seed=7\n", 0), 0u);
  const fs::path c = scratch("gen_c");
  ASSERT_EQ(run_cli(kCli, "gen --seed 8 --count 3 --out " + c.string()), 0);
  EXPECT_NE(read_file(a / "index.csv"), read_file(c / "index.csv"));
  for (const auto& p : {a, b, c}) fs::remove_all(p);
}

TEST(Cli, FullPipelineIsByteIdenticalAcrossReruns) {
  const auto first = run_pipeline(kCli, scratch("run_a"), 11);
  ASSERT_TRUE(first.ok) << first.failed_step;
  const auto second = run_pipeline(kCli, scratch("run_b"), 11);
  ASSERT_TRUE(second.ok) << second.failed_step;
  EXPECT_GE(first.csv.size(), 14u);
  ASSERT_EQ(first.csv.size(), second.csv.size());
  for (const auto& [name, text] : first.csv) {
    ASSERT_TRUE(second.csv.count(name)) << name;
    EXPECT_EQ(text, second.csv.at(name)) << name;
    EXPECT_EQ(text.rfind("# seed=11\n", 0), 0u) << name;
  }
  const std::string& metrics = first.csv.at("metrics.csv");
  EXPECT_NE(metrics.find("\nmean,"), std::string::npos);
  fs::remove_all(scratch("run_a"));
  fs::remove_all(scratch("run_b"));
}
