#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "degenloop/cli.hpp"
#include "degenloop/datasets.hpp"
#include "degenloop/io.hpp"

namespace dl = degenloop;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "degenloop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = dl::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("degenloop_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

constexpr const char* kTinyConfig = R"({
  "dataset": {"kind": "gaussian_ring", "size": 64},
  "generations": 2,
  "train": {"epochs": 1, "batch_size": 16},
  "model": {"hidden": [16]},
  "sample_steps": 4,
  "eval_samples": 32,
  "eval_set_size": 32,
  "metrics": {"n_projections": 8}
})";

}  // namespace

TEST(Cli, MetricsOfIdenticalFilesIsZero) {
  const auto dir = scratch("metrics");
  dl::DatasetSpec s;
  s.size = 50;
  dl::write_samples_csv(dir / "x.csv", dl::gaussian_ring_features(s));
  const auto r = run_cli({"metrics", "--a", (dir / "x.csv").string(), "--b", (dir / "x.csv").string(), "--ring-modes", "8"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mmd_rbf: 0\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("sliced_wasserstein: 0\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("mode_coverage: "), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"run", "--config", "/nonexistent/config.json", "--out", "x"}).code, 2);
  EXPECT_EQ(run_cli({"run", "--config"}).code, 2);
  EXPECT_EQ(run_cli({"demo", "--bogus"}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, BadConfigIsUsageError) {
  const auto dir = scratch("badcfg");
  dl::write_text_file(dir / "c.json", R"({"alpah": 1})");
  const auto r = run_cli({"run", "--config", (dir / "c.json").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("alpah"), std::string::npos);
  dl::write_text_file(dir / "d.json", "{not json");
  EXPECT_EQ(run_cli({"run", "--config", (dir / "d.json").string(), "--out", (dir / "out").string()}).code, 2);
}

TEST(Cli, RunWritesOutputs) {
  const auto dir = scratch("run");
  dl::write_text_file(dir / "c.json", kTinyConfig);
  const auto r = run_cli({"run", "--config", (dir / "c.json").string(), "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "gen_2" / "samples.csv"));
  EXPECT_NE(r.out.find("gen 2 pool 128"), std::string::npos) << r.out;
}

TEST(Cli, SweepWritesSummary) {
  const auto dir = scratch("sweep");
  dl::write_text_file(dir / "c.json", kTinyConfig);
  const auto r =
      run_cli({"sweep", "--config", (dir / "c.json").string(), "--alphas", "0.5,2", "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "sweep.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "alpha_0.5" / "metrics.csv"));
}

TEST(Cli, DivergedRunExitsOne) {
  const auto dir = scratch("diverge");
  dl::write_text_file(dir / "c.json", R"({"dataset": {"size": 64}, "train": {"epochs": 1, "learning_rate": 1e300},
    "model": {"hidden": [8]}, "eval_samples": 8, "eval_set_size": 8})");
  const auto r = run_cli({"run", "--config", (dir / "c.json").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(dl::read_text_file(dir / "out" / "metrics.csv").find("diverged"), std::string::npos);
}
