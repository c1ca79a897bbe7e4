#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hokme/hokme.hpp"

namespace fs = std::filesystem;
using namespace hokme;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("hokme_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(HOKME_CLI) + " " + args + " 2>" + path("stderr.txt") + " >" + path("stdout.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void gen_fig3_pair() {
    ASSERT_EQ(run("gen --kind fig3-early --n 500000 --m 40 --seed 1 --out " + path("early.jsonl")), 0);
    ASSERT_EQ(run("gen --kind fig3-late --m 40 --seed 2 --out " + path("late.jsonl")), 0);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, Test2EmitsReport) {
  gen_fig3_pair();
  ASSERT_EQ(run("test2 --x " + path("early.jsonl") + " --y " + path("late.jsonl") +
                " --order 2 --lambda 1e-13 --time-scale 1 --permutations 50 --out " + path("r.json") + " --null-csv " +
                path("null.csv")),
            0);
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  ASSERT_TRUE(j.contains("reject"));
  EXPECT_TRUE(j["reject"].get<bool>());
  EXPECT_EQ(j["null_samples"].size(), 50u);
  const std::string csv = slurp(path("null.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 51);
}

TEST_F(Cli, MmdMatchesLibraryBitForBit) {
  gen_fig3_pair();
  const Ensemble X = read_dataset(path("early.jsonl"));
  const Ensemble Y = read_dataset(path("late.jsonl"));
  for (int order : {1, 2}) {
    ASSERT_EQ(run("mmd --x " + path("early.jsonl") + " --y " + path("late.jsonl") + " --order " +
                  std::to_string(order) + " --out " + path("m.json")),
              0);
    const auto j = nlohmann::json::parse(slurp(path("m.json")));
    HigherOrderConfig cfg;
    cfg.order = order;
    EXPECT_EQ(j["value_squared"].get<double>(), higher_order_mmd(X, Y, cfg).value_squared);
  }
}

TEST_F(Cli, MalformedInputExitsTwoWithoutOutput) {
  gen_fig3_pair();
  {
    std::ofstream bad(path("bad.jsonl"));
    bad << R"({"times":[0,1,2],"values":[[0],[1],[2]]})" << "\n{oops\n";
  }
  EXPECT_EQ(run("mmd --x " + path("bad.jsonl") + " --y " + path("late.jsonl") + " --out " + path("m.json")), 2);
  EXPECT_FALSE(fs::exists(path("m.json")));
  EXPECT_FALSE(fs::exists(path("m.json.tmp")));
  EXPECT_NE(slurp(path("stderr.txt")).find("line 2"), std::string::npos);
  EXPECT_TRUE(slurp(path("stdout.txt")).empty());

  EXPECT_EQ(run("mmd --x " + path("early.jsonl") + " --y " + path("late.jsonl") + " --order 0"), 2);
  EXPECT_EQ(run("test2 --x " + path("early.jsonl") + " --y " + path("late.jsonl") + " --permutations 5"), 2);
  EXPECT_EQ(run("mmd --x " + path("missing.jsonl") + " --y " + path("late.jsonl")), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("mmd --x " + path("early.jsonl")), 2);
}

TEST_F(Cli, NumericFailureExitsThree) {
  // Identical paths make every prefix Gram block rank one; a negligible ridge cannot rescue the factorization.
  std::ofstream out(path("same.jsonl"));
  for (int i = 0; i < 4; ++i) out << R"({"times":[0,1,2],"values":[[0],[1],[3]]})" << '\n';
  out.close();
  EXPECT_EQ(run("mmd --x " + path("same.jsonl") + " --y " + path("same.jsonl") + " --order 2 --lambda 1e-300"), 3);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  gen_fig3_pair();
  {
    std::ofstream cfg(path("run.ini"));
    cfg << "[mmd]\norder=2\nlambda=1e-13\ntime-scale=1\nvariant=biased\nx=" << path("early.jsonl")
        << "\ny=" << path("late.jsonl") << "\n";
  }
  ASSERT_EQ(run("--config " + path("run.ini") + " mmd --out " + path("a.json")), 0);
  auto j = nlohmann::json::parse(slurp(path("a.json")));
  EXPECT_EQ(j["order"], 2);
  EXPECT_EQ(j["variant"], "biased");
  ASSERT_EQ(run("--config " + path("run.ini") + " mmd --order 1 --out " + path("b.json")), 0);
  j = nlohmann::json::parse(slurp(path("b.json")));
  EXPECT_EQ(j["order"], 1);
}

TEST_F(Cli, EveryCommandIsByteIdenticalOnRerun) {
  gen_fig3_pair();
  const std::string e = path("early.jsonl"), l = path("late.jsonl");
  ASSERT_EQ(run("gen --kind spring --bodies 3 --edges 0-1,1-2 --episodes 20 --seed 4 --out " + path("spring")), 0);
  const std::string b0 = path("spring/body_0.jsonl"), b1 = path("spring/body_1.jsonl"), b2 = path("spring/body_2.jsonl");
  {
    std::ofstream m(path("bags.csv"));
    m << "dataset,label\n";
    for (int b = 0; b < 6; ++b) {
      const std::string f = "bag" + std::to_string(b) + ".jsonl";
      ASSERT_EQ(run("gen --kind fbm --hurst " + std::to_string(0.2 + 0.1 * b) + " --m 10 --points 6 --seed " +
                    std::to_string(b) + " --out " + path(f)),
                0);
      m << f << ',' << 0.2 + 0.1 * b << '\n';
    }
  }
  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen --kind fbm --hurst 0.3 --m 5 --seed 3 --out ", "gen.jsonl"},
      {"gram --x " + e + " --y " + l + " --order 2 --out ", "g.bin"},
      {"gram --x " + e + " --format csv --out ", "g.csv"},
      {"mmd --x " + e + " --y " + l + " --order 2 --out ", "mmd.json"},
      {"test2 --x " + e + " --y " + l + " --permutations 30 --seed 4 --out ", "t.json"},
      {"ci --x " + b0 + " --y " + b2 + " --z " + b1 + " --permutations 30 --out ", "ci.json"},
      {"kpc --data " + b0 + " --data " + b1 + " --data " + b2 + " --alpha 1e-3 --out ", "kpc.json"},
      {"dr-fit --bags " + path("bags.csv") + " --sigma 0.1 --sigma 1 --ridge 1e-3 --folds 3 --time-scale 1 --out ",
       "model.json"},
  };
  for (const auto& [args, file] : commands) {
    ASSERT_EQ(run("--threads 3 " + args + path(file + ".1")), 0) << args << "\n" << slurp(path("stderr.txt"));
    ASSERT_EQ(run("--threads 1 " + args + path(file + ".2")), 0) << args;
    EXPECT_EQ(slurp(path(file + ".1")), slurp(path(file + ".2"))) << args;
    EXPECT_FALSE(slurp(path(file + ".1")).empty()) << args;
  }
  for (int k = 1; k <= 2; ++k)
    ASSERT_EQ(run("dr-predict --model " + path("model.json.1") + " --bags " + path("bags.csv") + " --out " +
                  path("pred.csv." + std::to_string(k))),
              0)
        << slurp(path("stderr.txt"));
  EXPECT_EQ(slurp(path("pred.csv.1")), slurp(path("pred.csv.2")));
}

TEST_F(Cli, GramCacheReadsBack) {
  gen_fig3_pair();
  ASSERT_EQ(run("gram --x " + path("early.jsonl") + " --y " + path("late.jsonl") + " --out " + path("g.bin")), 0);
  std::ifstream in(path("g.bin"), std::ios::binary);
  const GramField g = read_gram_binary(in);
  const GramField direct = first_order_gram(read_dataset(path("early.jsonl")), read_dataset(path("late.jsonl")));
  EXPECT_EQ(g.data(), direct.data());
}

TEST_F(Cli, DrPredictDetectsChangedTrainingData) {
  {
    std::ofstream m(path("bags.csv"));
    m << "dataset,label\n";
    for (int b = 0; b < 4; ++b) {
      const std::string f = "bag" + std::to_string(b) + ".jsonl";
      ASSERT_EQ(run("gen --kind brownian --m 6 --points 4 --seed " + std::to_string(b) + " --out " + path(f)), 0);
      m << f << ',' << b << '\n';
    }
  }
  ASSERT_EQ(run("dr-fit --bags " + path("bags.csv") + " --out " + path("model.json")), 0);
  ASSERT_EQ(run("dr-predict --model " + path("model.json") + " --bags " + path("bags.csv")), 0);
  ASSERT_EQ(run("gen --kind brownian --m 6 --points 4 --seed 99 --out " + path("bag0.jsonl")), 0);
  EXPECT_EQ(run("dr-predict --model " + path("model.json") + " --bags " + path("bags.csv")), 2);
}
