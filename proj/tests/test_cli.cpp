#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "apgp/tools/config.hpp"
#include "apgp/tools/runner.hpp"
#include "apgp/tools/serialize.hpp"

namespace apgp::tools {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("apgp_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(APGP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_EQ(c.batch_size, 1000);
  EXPECT_EQ(c.probes, 15);
  EXPECT_EQ(c.train_min_epochs, 11);
  EXPECT_DOUBLE_EQ(c.test_tolerance, 0.01);
  const ExperimentConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(config_from_json({{"batchsize", 10}}), InvalidInput);
  EXPECT_THROW(config_from_json({{"batch_size", "ten"}}), InvalidInput);
  EXPECT_THROW(config_from_json({{"batch_size", -1}}), InvalidInput);
  EXPECT_THROW(config_from_json({{"solver", "lu"}}), InvalidInput);
  EXPECT_THROW(config_from_json({{"train_tolerance", 0.0}}), InvalidInput);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), InvalidInput);
  const ExperimentConfig c = config_from_json({{"batch_size", 10}, {"seed", 3}});
  EXPECT_EQ(c.batch_size, 10);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_NE(config_hash(c), config_hash(ExperimentConfig{}));
}

TEST(Config, MethodNames) {
  const ExperimentConfig c;
  EXPECT_EQ(c.method_config("cg").kind, SolverKind::Cg);
  EXPECT_EQ(c.method_config("ap-cyclic").rule.name(), "cyclic");
  EXPECT_THROW(c.method_config("ap-best"), InvalidInput);
  EXPECT_THROW(c.method_config("lu"), InvalidInput);
}

TEST(Metrics, Validation) {
  nlohmann::json m = {{"rmse", 0.5}, {"nll", nullptr}, {"train_epochs_total", 12},
                      {"train_wall_time", 1.0}, {"predict_wall_time", 0.1}};
  EXPECT_NO_THROW(validate_metrics(m));
  m["rmse"] = -1.0;
  EXPECT_THROW(validate_metrics(m), InvalidInput);
  m["rmse"] = 0.5;
  m["train_epochs_total"] = 1.5;
  EXPECT_THROW(validate_metrics(m), InvalidInput);
  m.erase("train_epochs_total");
  EXPECT_THROW(validate_metrics(m), InvalidInput);
}

TEST(Serialize, SpecRoundTrip) {
  KernelSpec s = KernelSpec::isotropic(KernelFamily::Matern32, 2, 0.3, 1.2, 0.01, -0.5);
  s.lengthscales[1] = 0.7;
  EXPECT_EQ(spec_from_json(spec_to_json(s)).fingerprint(), s.fingerprint());
  EXPECT_THROW(spec_from_json({{"family", "laplace"}}), InvalidInput);
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.synth_n = 150;
  c.synth_d = 2;
  c.batch_size = 30;
  c.precond_rank = 10;
  c.train_steps = 3;
  c.probes = 4;
  c.check_n = 60;
  c.check_batch_size = 12;
  c.deterministic = true;
  c.output_dir = out.string();
  c.seed = 7;
  return c;
}

TEST(Runner, DeterministicOutputs) {
  for (const std::string cmd : {"solve", "train"}) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = scratch(cmd + std::to_string(rep));
      const ExperimentConfig c = small_config(out);
      if (cmd == "solve") run_solver_benchmark(c);
      else run_training(c);
      std::map<std::string, std::string> files;
      for (const auto& e : fs::directory_iterator(out))
        if (e.path().filename() != "manifest.json") files[e.path().filename()] = slurp(e.path());
      runs.push_back(files);
    }
    EXPECT_FALSE(runs[0].empty());
    EXPECT_EQ(runs[0], runs[1]) << cmd;
  }
}

TEST(Runner, TrainThenPredictAgree) {
  const fs::path out = scratch("predict");
  ExperimentConfig c = small_config(out);
  const nlohmann::json trained = run_training(c);
  c.model_path = (out / "model.json").string();
  const nlohmann::json predicted = run_predict(c);
  EXPECT_DOUBLE_EQ(trained["rmse"].get<double>(), predicted["rmse"].get<double>());
  validate_metrics(read_json(out / "metrics.json"));
}

TEST(Runner, CheckPasses) {
  const nlohmann::json r = run_check(small_config(scratch("check")));
  EXPECT_TRUE(r["passed"].get<bool>()) << r.dump(2);
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("cli");
  const std::string base = "--output_dir " + out.string() + " --synth_n 80 --check_n 40 --check_batch_size 8";
  EXPECT_EQ(run_cli("check " + base), 0);
  EXPECT_EQ(run_cli("check " + base + " --no_such_flag 1"), 2);
  EXPECT_EQ(run_cli("check " + base + " --batch_size zero"), 2);
  EXPECT_EQ(run_cli("solve " + base + " --data_path /nonexistent.csv"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("--version"), 0);
}

}  // namespace
}  // namespace apgp::tools
