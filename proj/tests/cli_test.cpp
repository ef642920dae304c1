#include "mhnn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"mhnn"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  return mhnn::cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "mhnn_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }

  std::string make_config(const std::string& body) const {
    const std::string p = path("config.json");
    std::ofstream out(p);
    out << body;
    return p;
  }

  void make_data() {
    ASSERT_EQ(run({"--seed", "7", "synth", "--out", path("d.mhws"),
                   "--n-per-class", "12", "--channels", "4", "--steps", "32",
                   "--classes", "3"}),
              0);
  }

  std::string train_quick() {
    make_data();
    const std::string cfg = make_config(
        R"({"filters": 8, "levels": 2, "max_epochs": 4, "patience": 2,
            "batch_size": 16})");
    EXPECT_EQ(run({"--seed", "7", "--config", cfg, "train", "--data",
                   path("d.mhws"), "--out", path("m.ckpt")}),
              0);
    return path("m.ckpt");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UnknownFlagExitsTwo) {
  EXPECT_EQ(run({"--bogus-flag"}), 2);
  EXPECT_EQ(run({"synth", "--nope", "x"}), 2);
}

TEST_F(CliTest, MissingSubcommandExitsTwo) { EXPECT_EQ(run({}), 2); }

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(run({"--help"}), 0); }

TEST_F(CliTest, SynthIsByteDeterministic) {
  ASSERT_EQ(run({"--seed", "9", "synth", "--out", path("a.mhws"),
                 "--n-per-class", "4", "--channels", "3", "--steps", "16",
                 "--classes", "2"}),
            0);
  ASSERT_EQ(run({"--seed", "9", "synth", "--out", path("b.mhws"),
                 "--n-per-class", "4", "--channels", "3", "--steps", "16",
                 "--classes", "2"}),
            0);
  EXPECT_EQ(slurp(path("a.mhws")), slurp(path("b.mhws")));
}

TEST_F(CliTest, ConfigUnknownKeyExitsTwo) {
  make_data();
  const std::string cfg = make_config(R"({"filters": 8, "wat": 1})");
  EXPECT_EQ(run({"--config", cfg, "train", "--data", path("d.mhws"), "--out",
                 path("m.ckpt")}),
            2);
}

TEST_F(CliTest, MissingDataFileExitsOne) {
  EXPECT_EQ(run({"eval", "--model", path("nope.ckpt"), "--data",
                 path("nope.mhws")}),
            1);
}

TEST_F(CliTest, TrainWritesCheckpointAndHistory) {
  const std::string ckpt = train_quick();
  EXPECT_TRUE(fs::exists(ckpt));
  EXPECT_TRUE(fs::exists(ckpt + ".history.json"));
  const auto history = nlohmann::json::parse(slurp(ckpt + ".history.json"));
  EXPECT_GE(history.size(), 1u);
  EXPECT_TRUE(history.at(0).contains("train_loss"));
}

TEST_F(CliTest, TrainIsByteDeterministic) {
  make_data();
  const std::string cfg = make_config(
      R"({"filters": 8, "levels": 2, "max_epochs": 3, "patience": 1,
          "batch_size": 16})");
  ASSERT_EQ(run({"--seed", "7", "--config", cfg, "train", "--data",
                 path("d.mhws"), "--out", path("m1.ckpt")}),
            0);
  ASSERT_EQ(run({"--seed", "7", "--config", cfg, "train", "--data",
                 path("d.mhws"), "--out", path("m2.ckpt")}),
            0);
  EXPECT_EQ(slurp(path("m1.ckpt")), slurp(path("m2.ckpt")));
  EXPECT_EQ(slurp(path("m1.ckpt") + ".history.json"),
            slurp(path("m2.ckpt") + ".history.json"));
}

TEST_F(CliTest, EvalWritesPinnedReportShape) {
  const std::string ckpt = train_quick();
  ASSERT_EQ(run({"eval", "--model", ckpt, "--data", path("d.mhws"), "--out",
                 path("report.json")}),
            0);
  const auto j = nlohmann::json::parse(slurp(path("report.json")));
  EXPECT_TRUE(j.contains("accuracy"));
  EXPECT_TRUE(j.contains("macro_f1"));
  EXPECT_TRUE(j.contains("per_class"));
  EXPECT_TRUE(j.contains("confusion"));
}

TEST_F(CliTest, EvalZeroMaskMatchesCleanByteForByte) {
  const std::string ckpt = train_quick();
  ASSERT_EQ(run({"--seed", "3", "eval", "--model", ckpt, "--data",
                 path("d.mhws"), "--out", path("clean.json")}),
            0);
  ASSERT_EQ(run({"--seed", "3", "eval", "--model", ckpt, "--data",
                 path("d.mhws"), "--mask-fixed", "0", "--out",
                 path("mask0.json")}),
            0);
  EXPECT_EQ(slurp(path("clean.json")), slurp(path("mask0.json")));
}

TEST_F(CliTest, EvalPerturbationFlagsAreExclusive) {
  const std::string ckpt = train_quick();
  EXPECT_EQ(run({"eval", "--model", ckpt, "--data", path("d.mhws"),
                 "--mask-fixed", "0.2", "--mask-random", "0.2"}),
            2);
}

TEST_F(CliTest, SweepMissingRowCount) {
  const std::string ckpt = train_quick();
  ASSERT_EQ(run({"sweep", "missing", "--model", ckpt, "--data", path("d.mhws"),
                 "--ratios", "0.1,0.5", "--out", path("sweep.csv")}),
            0);
  const std::string csv = slurp(path("sweep.csv"));
  std::size_t lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  EXPECT_EQ(lines, 5u);  // header + 2 ratios x 2 kinds
  EXPECT_EQ(csv.substr(0, 4), "cell");
}

TEST_F(CliTest, SweepNoiseNeedsModel) {
  make_data();
  EXPECT_EQ(run({"sweep", "noise", "--data", path("d.mhws"), "--out",
                 path("x.csv")}),
            2);
}

TEST_F(CliTest, SweepIsByteDeterministic) {
  const std::string ckpt = train_quick();
  ASSERT_EQ(run({"--seed", "5", "sweep", "missing", "--model", ckpt, "--data",
                 path("d.mhws"), "--ratios", "0.3", "--out", path("s1.csv")}),
            0);
  ASSERT_EQ(run({"--seed", "5", "sweep", "missing", "--model", ckpt, "--data",
                 path("d.mhws"), "--ratios", "0.3", "--out", path("s2.csv")}),
            0);
  EXPECT_EQ(slurp(path("s1.csv")), slurp(path("s2.csv")));
}

TEST_F(CliTest, DecomposeWritesComponentFiles) {
  make_data();
  ASSERT_EQ(run({"decompose", "--data", path("d.mhws"), "--out-dir",
                 path("dec"), "--levels", "3"}),
            0);
  EXPECT_TRUE(fs::exists(path("dec") + "/x.csv"));
  EXPECT_TRUE(fs::exists(path("dec") + "/h1.csv"));
  EXPECT_TRUE(fs::exists(path("dec") + "/h2.csv"));
  EXPECT_TRUE(fs::exists(path("dec") + "/h3.csv"));
  EXPECT_TRUE(fs::exists(path("dec") + "/l3.csv"));
  // one row per channel
  const std::string h1 = slurp(path("dec") + "/h1.csv");
  std::size_t rows = 0;
  for (char c : h1)
    if (c == '\n') ++rows;
  EXPECT_EQ(rows, 4u);
}

TEST_F(CliTest, ImportWideRoundTrip) {
  std::ofstream csv(path("in.csv"));
  csv << "label,ch0_t0,ch0_t1,ch1_t0,ch1_t1\n";
  csv << "0,1,2,3,4\n1,5,6,7,8\n";
  csv.close();
  ASSERT_EQ(run({"import", "--in", path("in.csv"), "--format", "wide", "--out",
                 path("w.mhws")}),
            0);
  const auto set = mhnn::data::load_binary(path("w.mhws"));
  EXPECT_EQ(set.size(), 2u);
  EXPECT_EQ(set.channels, 2u);
  EXPECT_EQ(set.steps, 2u);
}

TEST_F(CliTest, ImportLongAppliesWindowing) {
  std::ofstream csv(path("long.csv"));
  csv << "label,ch0\n";
  for (int t = 0; t < 20; ++t) csv << (t < 10 ? 0 : 1) << "," << t << "\n";
  csv.close();
  ASSERT_EQ(run({"import", "--in", path("long.csv"), "--format", "long",
                 "--width", "10", "--overlap", "0.5", "--out",
                 path("l.mhws")}),
            0);
  const auto set = mhnn::data::load_binary(path("l.mhws"));
  EXPECT_EQ(set.size(), 3u);  // starts 0, 5, 10
  EXPECT_EQ(set.steps, 10u);
}

TEST_F(CliTest, ImportLongWithoutWidthExitsTwo) {
  std::ofstream csv(path("long2.csv"));
  csv << "label,ch0\n0,1\n";
  csv.close();
  EXPECT_EQ(run({"import", "--in", path("long2.csv"), "--format", "long",
                 "--out", path("x.mhws")}),
            2);
}

TEST_F(CliTest, ReportPrintsJsonAndCsv) {
  const std::string ckpt = train_quick();
  ASSERT_EQ(run({"eval", "--model", ckpt, "--data", path("d.mhws"), "--out",
                 path("r.json")}),
            0);
  EXPECT_EQ(run({"report", "--in", path("r.json")}), 0);
  ASSERT_EQ(run({"sweep", "missing", "--model", ckpt, "--data", path("d.mhws"),
                 "--ratios", "0.2", "--out", path("r.csv")}),
            0);
  EXPECT_EQ(run({"report", "--in", path("r.csv")}), 0);
}

TEST_F(CliTest, PaperProtocolFlagAccepted) {
  make_data();
  const std::string cfg = make_config(
      R"({"filters": 4, "levels": 2, "max_epochs": 2, "patience": 1,
          "batch_size": 16})");
  EXPECT_EQ(run({"--seed", "7", "--config", cfg, "train", "--data",
                 path("d.mhws"), "--out", path("mp.ckpt"),
                 "--paper-protocol"}),
            0);
  EXPECT_TRUE(fs::exists(path("mp.ckpt")));
}

TEST_F(CliTest, Precision64TrainsAndEvals) {
  make_data();
  const std::string cfg = make_config(
      R"({"filters": 4, "levels": 2, "max_epochs": 2, "patience": 1,
          "batch_size": 16, "precision": 64})");
  ASSERT_EQ(run({"--seed", "7", "--config", cfg, "train", "--data",
                 path("d.mhws"), "--out", path("m64.ckpt")}),
            0);
  EXPECT_EQ(run({"--precision", "64", "eval", "--model", path("m64.ckpt"),
                 "--data", path("d.mhws")}),
            0);
}
