#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lfl/serialization.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run_cli(const std::string& args) {
  const std::string cmd = std::string(LFL_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lfl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, TrainHappyPath) {
  ASSERT_EQ(run_cli("synth --n 30 --rank 2 --seed 1 --out " + path("s")).code, 0);
  auto r = run_cli("train --data " + path("s/train.tsv") +
               " --rank 5 --objective nll --optimizer sgd --epochs 50 --lr 0.05 --l2 0.1 --seed 7 --out " +
               path("m.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("final objective"), std::string::npos);
  EXPECT_NE(r.out.find("\"lfl-manifest\""), std::string::npos);
  auto f = lfl::model_file_from_json(lfl::read_json_file(path("m.json")));
  EXPECT_EQ(f.model.shape().rank, 5u);
  EXPECT_EQ(f.row_ids.size(), 30u);
  auto man = lfl::read_json_file(path("m.json.manifest.json"));
  EXPECT_EQ(man["config"]["seed"], 7);
  EXPECT_EQ(man["inputs"][0]["sha256"].get<std::string>().size(), 64u);
}

TEST_F(Cli, MaeOnNominalLabelsIsAFlagError) {
  write("d.tsv", "a\tx\tred\nb\ty\tblue\n");
  auto r = run_cli("train --data " + path("d.tsv") + " --objective mae --out " + path("m.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("mae"), std::string::npos);
  EXPECT_NE(r.out.find("nominal"), std::string::npos);
}

TEST_F(Cli, ExitCodeTaxonomy) {
  EXPECT_EQ(run_cli("train --rank 3").code, 2);  // missing --data/--out
  EXPECT_EQ(run_cli("train --data " + path("missing.tsv") + " --out " + path("m.json")).code, 3);
  write("bad.tsv", "a\tb\n");
  EXPECT_EQ(run_cli("train --data " + path("bad.tsv") + " --out " + path("m.json")).code, 3);
  write("d.tsv", "a\tx\t1\nb\ty\t2\na\ty\t1\n");
  EXPECT_EQ(run_cli("train --data " + path("d.tsv") + " --lr 1e150 --epochs 3 --out " + path("m.json")).code, 4);
  EXPECT_EQ(run_cli("train --data " + path("d.tsv") + " --task link-sym --bias --out " + path("m.json")).code, 2);
}

TEST_F(Cli, SameFlagsGiveByteIdenticalModels) {
  ASSERT_EQ(run_cli("synth --n 25 --rank 2 --seed 4 --out " + path("s")).code, 0);
  for (const char* opt : {"sgd", "batch"}) {
    const std::string flags = "train --data " + path("s/train.tsv") + " --rank 3 --epochs 10 --max-iters 30 --seed 3 --optimizer " + opt;
    ASSERT_EQ(run_cli(flags + " --out " + path("a.json")).code, 0);
    ASSERT_EQ(run_cli(flags + " --out " + path("b.json")).code, 0);
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json"))) << opt;
  }
}

TEST_F(Cli, SynthTrainPredictEvalCompose) {
  ASSERT_EQ(run_cli("synth --n 40 --rank 2 --labels 3 --retention 0.8 --seed 5 --out " + path("s")).code, 0);
  ASSERT_EQ(run_cli("train --data " + path("s/train.tsv") + " --rank 2 --out " + path("m.json")).code, 0);
  ASSERT_EQ(run_cli("predict --model " + path("m.json") + " --data " + path("s/test.tsv") + " --out " + path("p.tsv")).code, 0);
  auto r = run_cli("eval --predictions " + path("p.tsv") + " --truth " + path("s/test.tsv") + " --format json --out " + path("e.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto records = lfl::read_json_file(path("e.json"));
  ASSERT_EQ(records[0]["metric"], "zero_one");
  EXPECT_EQ(records[0]["count"], 320);
  EXPECT_LT(records[0]["value"].get<double>(), 2.0 / 3.0);
}

TEST_F(Cli, OrdinalFallbackForUnseenIds) {
  write("d.tsv", "u1\tm1\t1\nu1\tm2\t5\nu2\tm1\t3\n");
  write("q.tsv", "u1\tm1\nnew\tm1\nnew\tnew\n");
  ASSERT_EQ(run_cli("train --data " + path("d.tsv") + " --kind ordinal --rank 1 --out " + path("m.json")).code, 0);
  ASSERT_EQ(run_cli("predict --model " + path("m.json") + " --data " + path("q.tsv") + " --out " + path("p.tsv")).code, 0);
  const std::string p = slurp(path("p.tsv"));
  EXPECT_NE(p.find("rule=mean"), std::string::npos);
  std::istringstream in(p);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_NE(line.find("\tmodel"), std::string::npos);
  std::getline(in, line);
  EXPECT_NE(line.find("\tfallback"), std::string::npos);
  // A nominal model has no fallback for unknown ids.
  ASSERT_EQ(run_cli("train --data " + path("d.tsv") + " --rank 1 --out " + path("n.json")).code, 0);
  EXPECT_EQ(run_cli("predict --model " + path("n.json") + " --data " + path("q.tsv")).code, 3);
}

TEST_F(Cli, CheckGrad) {
  ASSERT_EQ(run_cli("synth --n 12 --rank 2 --seed 2 --out " + path("s")).code, 0);
  auto r = run_cli("check-grad --data " + path("s/train.tsv") + " --rank 2 --seed 1");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("max rel diff"), std::string::npos);
  // An absurd step makes central differences wrong, so the check must fail.
  EXPECT_NE(run_cli("check-grad --data " + path("s/train.tsv") + " --rank 2 --step 3").code, 0);
}

TEST_F(Cli, Cluster) {
  ASSERT_EQ(run_cli("synth --n 20 --rank 2 --seed 3 --out " + path("s")).code, 0);
  ASSERT_EQ(run_cli("train --data " + path("s/train.tsv") + " --rank 2 --epochs 5 --out " + path("m.json")).code, 0);
  ASSERT_EQ(run_cli("cluster --model " + path("m.json") + " --k 4 --which cols --label 1 --out " + path("c.tsv")).code, 0);
  std::istringstream in(slurp(path("c.tsv")));
  std::string id;
  std::size_t cluster = 0, prev = 0, n = 0;
  while (in >> id >> cluster) {
    EXPECT_EQ(id[0], 'c');
    EXPECT_LT(cluster, 4u);
    EXPECT_GE(cluster, prev);  // grouped by cluster
    prev = cluster;
    ++n;
  }
  EXPECT_EQ(n, 20u);
  EXPECT_EQ(run_cli("cluster --model " + path("m.json") + " --k 4 --label 3").code, 2);  // base label
  EXPECT_EQ(run_cli("cluster --model " + path("m.json") + " --k 40").code, 2);
}

TEST_F(Cli, CrossValidationPicksFromTheGrid) {
  ASSERT_EQ(run_cli("synth --n 20 --rank 2 --seed 6 --out " + path("s")).code, 0);
  auto r = run_cli("cv --data " + path("s/train.tsv") + " --rank 2 --epochs 5 --grid 0.01,1,100 --out " + path("cv.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto j = lfl::read_json_file(path("cv.json"));
  EXPECT_EQ(j["folds"], 3);
  EXPECT_EQ(j["grid"].size(), 3u);
  const double best = j["best_l2"];
  EXPECT_TRUE(best == 0.01 || best == 1 || best == 100);
}

TEST_F(Cli, ReplayReproducesOutputs) {
  ASSERT_EQ(run_cli("synth --n 20 --rank 2 --seed 8 --out " + path("s")).code, 0);
  ASSERT_EQ(run_cli("train --data " + path("s/train.tsv") + " --rank 2 --epochs 5 --out " + path("m.json")).code, 0);
  const std::string first = slurp(path("m.json"));
  fs::remove(path("m.json"));
  ASSERT_EQ(run_cli("replay " + path("m.json.manifest.json")).code, 0);
  EXPECT_EQ(slurp(path("m.json")), first);
  write("s/train.tsv", "r0\tc0\t1\n");
  EXPECT_EQ(run_cli("replay " + path("m.json.manifest.json")).code, 3);
}
