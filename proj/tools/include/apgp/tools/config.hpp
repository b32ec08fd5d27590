#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "apgp/gp.hpp"

namespace apgp::tools {

/// Flat experiment configuration. Every field is one JSON key and one
/// command-line flag of the same name.
struct ExperimentConfig {
  // Data. An empty data_path selects the synthetic generator.
  std::string data_path;
  double split_ratio = 0.8;
  bool standardize_features = true;
  Index synth_n = 2000;
  Index synth_d = 5;
  std::string synth_family = "matern52";
  double synth_lengthscale = 0.5;
  double synth_outputscale = 1.0;
  double synth_noise = 0.05;

  // Initial hyperparameters, softplus(0) as in GPyTorch.
  std::string kernel_family = "matern52";
  double lengthscale = 0.6931471805599453;
  double outputscale = 0.6931471805599453;
  double noise_variance = 0.6932471805599453;
  double mean_constant = 0.0;
  double noise_floor = 1e-4;

  // Solvers.
  std::string solver = "ap";  // ap | cg
  Index batch_size = 1000;
  std::string selection_rule = "gs";
  Index precond_rank = 500;
  std::vector<std::string> methods = {"ap-gs", "cg"};  // solve benchmark
  double train_tolerance = 1.0;
  int train_max_epochs = 1000;
  int train_min_epochs = 11;
  double test_tolerance = 0.01;
  int test_max_epochs = 1000;
  int test_min_epochs = 11;
  std::string precision = "f64";
  std::string storage = "lazy";

  // Training.
  int train_steps = 50;
  double step_size = 0.1;
  Index probes = 15;
  std::string probe_kind = "rademacher";
  std::string transform = "softplus";

  // Evaluation and output.
  Index exact_metrics_limit = 5000;
  Index check_n = 200;
  Index check_batch_size = 20;
  std::string model_path;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  bool deterministic = false;
  int jobs = 1;

  /// Throws InvalidInput on an out-of-domain value.
  void validate() const;

  KernelSpec initial_spec(Index dim) const;
  KernelSpec synth_spec() const;
  SolverConfig solver_config(bool test_time) const;
  SolverConfig method_config(const std::string& method) const;
  TrainConfig train_config() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Rejects unknown keys and mistyped values.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON dump of the config, minus output_dir and jobs.
std::string config_hash(const ExperimentConfig& config);

}  // namespace apgp::tools
