#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ssmspike/data/binned.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const fs::path& dir) {
  const auto log = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + SSMSPIKE_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("ssmspike_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& extra = "") {
    const auto p = dir_ / "run.yaml";
    std::ofstream f(p);
    f << "profile: synthetic\n"
         "output_dir: "
      << (dir_ / "run").string()
      << "\n"
         "dataset: {steps: 16, c_in: 4, train_per_class: 8, test_per_class: 4}\n"
         "network: {c_in: 4, h: 4, n: 2, n_out: 2}\n"
         "training: {epochs: 2, batch_size: 8, seed: 3}\n"
      << extra;
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, CostReport) {
  const auto r = run("cost --n 8 --nout 4 --h 32 --csv " + (dir_ / "cost.csv").string(), dir_);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("params per neuron (p)      99"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("reset MACs per neuron      65"), std::string::npos) << r.out;
  EXPECT_NE(slurp(dir_ / "cost.csv").find("\n8,4,32,99,3168,17,48,65,"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("cost --n 0 --nout 4 --h 1", dir_).code, 2);
  EXPECT_EQ(run("cost --nout 4", dir_).code, 2);
  EXPECT_EQ(run("frobnicate", dir_).code, 2);
  EXPECT_EQ(run("gen-data --classes 0 --output " + (dir_ / "x.bin").string(), dir_).code, 2);
  EXPECT_EQ(run("train --config " + (dir_ / "missing.yaml").string(), dir_).code, 2);
  EXPECT_EQ(run("--help", dir_).code, 0);
}

TEST_F(Cli, GenDataIsDeterministicAndReadable) {
  const auto a = dir_ / "a.bin", b = dir_ / "b.bin";
  const std::string args = "gen-data --classes 3 --steps 12 --c-in 5 --samples-per-class 4 --seed 8 --output ";
  ASSERT_EQ(run(args + a.string(), dir_).code, 0);
  ASSERT_EQ(run(args + b.string(), dir_).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  const auto ds = ssmspike::data::load_binned_spikes(a);
  EXPECT_EQ(ds.size(), 12u);
  EXPECT_EQ(ds.c_in, 5);
  EXPECT_EQ(ds.c_out, 3);
  EXPECT_EQ(ds.samples[0].values.rows(), 12);
}

TEST_F(Cli, TrainZeroEpochsWritesInitialCheckpoint) {
  const auto cfg = write_config();
  const auto r = run("train --config " + cfg.string() + " --epochs 0", dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"config.yaml", "metrics.csv", "timing.csv", "checkpoint_final.json", "summary.json", "spike_rates.csv"})
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  const auto metrics = slurp(dir_ / "run" / "metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 1);
}

TEST_F(Cli, TrainThenEvaluateReproducesTestAccuracy) {
  const auto cfg = write_config();
  ASSERT_EQ(run("train --config " + cfg.string(), dir_).code, 0);
  const auto metrics = slurp(dir_ / "run" / "metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);
  EXPECT_EQ(metrics.rfind("epoch,train_loss,train_acc,test_acc,spike_rate_l1,spike_rate_l2\n", 0), 0u);

  const auto ck = (dir_ / "run" / "checkpoint_final.json").string();
  const auto plain = run("eval --config " + cfg.string() + " --checkpoint " + ck, dir_);
  ASSERT_EQ(plain.code, 0) << plain.out;
  const auto last_row = metrics.substr(metrics.rfind('\n', metrics.size() - 2) + 1);
  std::vector<std::string> cols;
  std::stringstream ss(last_row);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  EXPECT_EQ(plain.out, "accuracy " + cols[3] + "\n");

  const auto none_dropped = run("eval --config " + cfg.string() + " --checkpoint " + ck + " --drop-channels first:0", dir_);
  EXPECT_EQ(none_dropped.out, plain.out);

  const auto prefix = run("eval --config " + cfg.string() + " --checkpoint " + ck + " --prefix-steps 0,8,16 --output " +
                              (dir_ / "ev").string(),
                          dir_);
  ASSERT_EQ(prefix.code, 0) << prefix.out;
  EXPECT_NE(prefix.out.find("t=16 accuracy " + cols[3] + "\n"), std::string::npos) << prefix.out;
  EXPECT_EQ(slurp(dir_ / "ev" / "accuracy_over_time.csv").rfind("t,accuracy\n0,", 0), 0u);

  EXPECT_EQ(run("eval --config " + cfg.string() + " --checkpoint " + ck + " --prefix-steps 17", dir_).code, 2);
  EXPECT_EQ(run("eval --config " + cfg.string() + " --checkpoint " + ck + " --drop-channels first:3", dir_).code, 2);

  const auto ablate = run("ablate --config " + cfg.string() + " --checkpoint " + ck, dir_);
  ASSERT_EQ(ablate.code, 0) << ablate.out;
  EXPECT_EQ(ablate.out.rfind("which,count,accuracy\nfirst,0,", 0), 0u) << ablate.out;
}

TEST_F(Cli, CorruptCheckpointExitsWithThree) {
  const auto cfg = write_config();
  {
    std::ofstream f(dir_ / "bad.json");
    f << "{\"format\": \"something else\"}";
  }
  EXPECT_EQ(run("eval --config " + cfg.string() + " --checkpoint " + (dir_ / "bad.json").string(), dir_).code, 3);
}

TEST_F(Cli, MissingDataExitsWithThree) {
  const auto p = dir_ / "mnist.yaml";
  {
    std::ofstream f(p);
    f << "profile: smnist\ndataset: {path: " << (dir_ / "nowhere").string() << "}\n";
  }
  EXPECT_EQ(run("train --config " + p.string() + " --epochs 0", dir_).code, 3);
}

TEST_F(Cli, SweepWritesOneRowPerCell) {
  const auto cfg = write_config();
  const auto r = run("sweep --config " + cfg.string() + " --epochs 1 --shapes 2:2:2,4:1:1 --cells stable-reset,unstable-noreset",
                     dir_);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(dir_ / "run" / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(csv.find("4,1,1,unstable,noreset,"), std::string::npos) << csv;
}
