#include "brep/cli.hpp"

#include "golden_transcripts.hpp"

#include <gtest/gtest.h>

#include <signal.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace brep;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "brep_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> csv_rows(const fs::path& p) {
  std::vector<std::string> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("brep_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_spec(const Json& j, const std::string& name = "spec.json") {
    const auto p = dir_ / name;
    write_text_file(p.string(), dump_json(j));
    return p.string();
  }

  static Json small_spec() {
    return Json::parse(R"({
      "name": "tiny", "seed": 2,
      "dataset": {"num_classes": 4, "dim": 6, "separation": 8.0, "spread": 1.0, "samples_per_class": 60},
      "target": {"kind": "linear"},
      "evaluator": {"kind": "mlp", "hidden": [8]},
      "generator": {"kind": "affine", "latent_dim": 4},
      "attack": {"max_iters": 40},
      "seeds": [0],
      "budgets": [1024, 2048, 4096, 8192, 16384, 32768, 65536],
      "n_grid": [4, 32],
      "n_budget": 512
    })");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpAndVersion) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  const auto v = run_cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, "0.1.0\n");
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"attack", "--spec", "x.json"}).code, 2);
}

TEST_F(CliTest, AttackWritesEveryArtifact) {
  const auto spec = write_spec(small_spec());
  const auto out = dir_ / "run";
  const auto r = run_cli({"attack", "--spec", spec, "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("accuracy ", 0), 0u);
  for (const char* f : {"manifest.json", "traces.csv", "report.csv", "target_model.json", "models.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const Json m = read_json_file((out / "manifest.json").string());
  EXPECT_EQ(m["runs"].size(), 2u);
  EXPECT_EQ(m["invocation"][1], "attack");
  EXPECT_EQ(slurp(out / "traces.csv").rfind("# brep_cli 0.1.0: brep_cli attack", 0), 0u);
  EXPECT_EQ(csv_rows(out / "traces.csv")[0], "target_class,seed,radius,iters_to_clear,cumulative_queries");

  // The saved target answers like the one the attack used.
  const Json target_doc = read_json_file((out / "target_model.json").string());
  EXPECT_EQ(target_doc["tool_version"], "0.1.0");
  EXPECT_EQ(input_dim(model_from_json(target_doc)), 6u);
  const Json models = read_json_file((out / "models.json").string());
  EXPECT_EQ(models["target_class_ids"], Json({2, 3}));
  EXPECT_EQ(models["invocation"], m["invocation"]);
}

TEST_F(CliTest, AttackRerunIsIdenticalExceptWallClock) {
  const auto spec = write_spec(small_spec());
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run_cli({"attack", "--spec", spec, "--out", a.string()}).code, 0);
  ASSERT_EQ(run_cli({"attack", "--spec", spec, "--out", a.string()}).code, 0);
  ASSERT_EQ(run_cli({"attack", "--spec", spec, "--out", b.string()}).code, 0);
  Json ja = strip_wall_clock(read_json_file((a / "manifest.json").string()));
  Json jb = strip_wall_clock(read_json_file((b / "manifest.json").string()));
  ja.erase("invocation");
  jb.erase("invocation");
  EXPECT_EQ(dump_json(ja), dump_json(jb));
  Json ta = read_json_file((a / "target_model.json").string());
  Json tb = read_json_file((b / "target_model.json").string());
  ta.erase("invocation");
  tb.erase("invocation");
  EXPECT_EQ(dump_json(ta), dump_json(tb));
}

TEST_F(CliTest, SeedOverrideChangesTheWorld) {
  const auto spec = write_spec(small_spec());
  ASSERT_EQ(run_cli({"attack", "--spec", spec, "--out", (dir_ / "a").string()}).code, 0);
  ASSERT_EQ(run_cli({"attack", "--spec", spec, "--out", (dir_ / "b").string(), "--seed", "9"}).code, 0);
  const Json b = read_json_file((dir_ / "b" / "manifest.json").string());
  EXPECT_EQ(b["spec"]["seed"], 9);
  EXPECT_NE(slurp(dir_ / "a" / "target_model.json"), slurp(dir_ / "b" / "target_model.json"));
}

TEST_F(CliTest, MalformedSpecWritesNothing) {
  Json j = small_spec();
  j["evaluator"] = j["target"];
  const auto out = dir_ / "bad";
  const auto r = run_cli({"attack", "--spec", write_spec(j), "--out", out.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("evaluator"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));

  write_text_file((dir_ / "broken.json").string(), "{\"seed\": ");
  EXPECT_EQ(run_cli({"attack", "--spec", (dir_ / "broken.json").string(), "--out", out.string()}).code, 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, IoFailures) {
  EXPECT_EQ(run_cli({"attack", "--spec", (dir_ / "missing.json").string(), "--out", (dir_ / "o").string()}).code, 3);
  // Output "directory" is an existing file.
  write_text_file((dir_ / "file").string(), "x");
  const auto r = run_cli({"attack", "--spec", write_spec(small_spec()), "--out", (dir_ / "file").string()});
  EXPECT_EQ(r.code, 3);
}

TEST_F(CliTest, VerifyTheoryLinearTestbed) {
  const auto csv = dir_ / "lin.csv";
  const auto r = run_cli({"verify-theory", "--testbed", "linear", "--out", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(csv);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "rho,mean_cos,stderr,trials,bound,per_batch_cos,per_batch_stderr");
  double prev = -2.0, prev_batch = -2.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double rho, cos, se, bound, bcos, bse;
    int trials;
    ASSERT_EQ(std::sscanf(rows[i].c_str(), "%lf,%lf,%lf,%d,%lf,%lf,%lf", &rho, &cos, &se, &trials, &bound, &bcos,
                          &bse),
              7);
    EXPECT_GE(cos, prev);
    EXPECT_GE(bcos, prev_batch);
    EXPECT_GE(cos, bound - 3.0 * se);
    EXPECT_EQ(trials, 100);
    prev = cos;
    prev_batch = bcos;
  }
  EXPECT_GE(prev, 0.9);
  EXPECT_GE(prev_batch, 0.9);
}

TEST_F(CliTest, VerifyTheoryCurvedHasInteriorMaximum) {
  const auto csv = dir_ / "curved.csv";
  ASSERT_EQ(run_cli({"verify-theory", "--testbed", "curved", "--out", csv.string()}).code, 0);
  const auto rows = csv_rows(csv);
  ASSERT_EQ(rows.size(), 13u);
  std::vector<double> cos;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double rho, c;
    ASSERT_EQ(std::sscanf(rows[i].c_str(), "%lf,%lf", &rho, &c), 2);
    cos.push_back(c);
  }
  const auto k = static_cast<std::size_t>(std::max_element(cos.begin(), cos.end()) - cos.begin());
  EXPECT_GT(k, 0u);
  EXPECT_LT(k, cos.size() - 1);
}

TEST_F(CliTest, VerifyTheoryErrors) {
  const auto csv = (dir_ / "t.csv").string();
  EXPECT_EQ(run_cli({"verify-theory", "--testbed", "linear", "--trials", "0", "--out", csv}).code, 2);
  EXPECT_EQ(run_cli({"verify-theory", "--testbed", "linear", "--radii", "4,2", "--out", csv}).code, 2);
  EXPECT_EQ(run_cli({"verify-theory", "--testbed", "wobbly", "--out", csv}).code, 2);
  EXPECT_EQ(run_cli({"verify-theory", "--out", csv}).code, 2);

  // The ball's center is a critical point of the margin.
  const auto model = (dir_ / "ball.json").string();
  write_text_file(model, dump_json(model_to_json(QuadraticBallClassifier(Vector::Zero(3)))));
  const auto zero = run_cli({"verify-theory", "--model", model, "--point", "0,0,0", "--out", csv});
  EXPECT_EQ(zero.code, 4) << zero.err;
  EXPECT_EQ(run_cli({"verify-theory", "--model", model, "--point", "0.5,0,0", "--out", csv}).code, 0);
  EXPECT_EQ(run_cli({"verify-theory", "--model", model, "--point", "0.5,0", "--out", csv}).code, 2);
  EXPECT_EQ(run_cli({"verify-theory", "--model", model, "--point", "0.5,x,0", "--out", csv}).code, 2);
}

TEST_F(CliTest, SweepBudgetOneRowPerBudget) {
  Json j = small_spec();
  const auto r = run_cli({"sweep-budget", "--spec", write_spec(j), "--out", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(dir_ / "sweep_budget.csv");
  ASSERT_EQ(rows.size(), 8u);
  for (int k = 10; k <= 16; ++k) {
    EXPECT_EQ(rows[static_cast<std::size_t>(k - 9)].rfind(std::to_string(1 << k) + "," + std::to_string(k) + ".0000,", 0),
              0u);
  }
  EXPECT_EQ(run_cli({"sweep-budget", "--spec", write_spec(j), "--out", dir_.string(), "--budgets", "8,4"}).code, 2);
}

TEST_F(CliTest, SweepN) {
  const auto spec = write_spec(small_spec());
  ASSERT_EQ(run_cli({"sweep-n", "--spec", spec, "--out", dir_.string()}).code, 0);
  const auto rows = csv_rows(dir_ / "sweep_n.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].rfind("512,9.0000,4,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("512,9.0000,32,", 0), 0u);
  EXPECT_EQ(run_cli({"sweep-n", "--spec", spec, "--out", dir_.string(), "--budget", "16", "--n-grid", "32"}).code, 2);
}

TEST_F(CliTest, ReportFromManifests) {
  const auto spec = write_spec(small_spec());
  ASSERT_EQ(run_cli({"attack", "--spec", spec, "--out", (dir_ / "a").string()}).code, 0);
  const auto m = (dir_ / "a" / "manifest.json").string();
  const auto r = run_cli({"report", "--manifest", m, "--manifest", m, "--out", (dir_ / "rep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(dir_ / "rep" / "report.csv");
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], "radius,reach_percent,min_iters,max_iters,avg_iters,success_percent,halted,halted_success_percent");
  EXPECT_EQ(rows[1].rfind("2.00,", 0), 0u);
  EXPECT_EQ(csv_rows(dir_ / "a" / "report.csv").size(), rows.size());
  EXPECT_EQ(run_cli({"report", "--manifest", (dir_ / "nope.json").string(), "--out", dir_.string()}).code, 3);
  EXPECT_EQ(run_cli({"report", "--manifest", spec, "--out", dir_.string()}).code, 2);
}

TEST_F(CliTest, ServeOracleBadModel) {
  write_text_file((dir_ / "m.json").string(), "{}");
  EXPECT_EQ(run_cli({"serve-oracle", "--model", (dir_ / "m.json").string(), "--stdio"}).code, 2);
  EXPECT_EQ(run_cli({"serve-oracle", "--model", (dir_ / "none.json").string(), "--stdio"}).code, 3);
}

TEST_F(CliTest, ServeOracleOverStdioSubprocess) {
  const auto model = (dir_ / "m.json").string();
  write_text_file(model, dump_json(model_to_json(golden::example_model())));
  const auto in = (dir_ / "in.txt").string();
  std::string input, expected;
  for (const auto& [req, resp] : golden::transcript()) {
    input += req;
    expected += resp;
  }
  write_text_file(in, input);
  const std::string cmd = std::string(BREP_CLI_PATH) + " serve-oracle --stdio --model " + model + " < " + in;
  FILE* p = ::popen(cmd.c_str(), "r");
  ASSERT_NE(p, nullptr);
  std::string got;
  char buf[256];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) got.append(buf, n);
  EXPECT_EQ(::pclose(p), 0);
  EXPECT_EQ(got, expected);
}

TEST_F(CliTest, ServeOracleOverTcpSubprocess) {
  const auto model = (dir_ / "m.json").string();
  write_text_file(model, dump_json(model_to_json(golden::example_model())));
  const auto log = (dir_ / "log.txt").string();
  const std::string cmd = std::string(BREP_CLI_PATH) + " serve-oracle --model " + model +
                          " --listen 127.0.0.1:0 > " + log + " 2>&1 & echo $!";
  FILE* p = ::popen(cmd.c_str(), "r");
  ASSERT_NE(p, nullptr);
  long pid = 0;
  ASSERT_EQ(std::fscanf(p, "%ld", &pid), 1);
  ::pclose(p);

  std::string line;
  for (int i = 0; i < 100 && line.empty(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    std::ifstream f(log);
    std::getline(f, line);
  }
  ASSERT_EQ(line.rfind("LISTENING ", 0), 0u) << line;
  {
    RemoteOracle client(Endpoint::parse(line.substr(10)), 2);
    EXPECT_TRUE(client.ping());
    EXPECT_EQ(client.query(vec::from({-3.0, 1.0})), 1u);
  }
  ::kill(static_cast<pid_t>(pid), SIGTERM);
  std::string tail;
  for (int i = 0; i < 100 && tail.find("served 1") == std::string::npos; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    tail = slurp(log);
  }
  EXPECT_NE(tail.find("served 1"), std::string::npos) << tail;
}
