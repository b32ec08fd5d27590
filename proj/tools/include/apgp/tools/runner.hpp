#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "apgp/dataset.hpp"
#include "apgp/tools/config.hpp"

namespace apgp::tools {

/// Dataset from `data_path`, or a synthetic GP draw when it is empty.
Dataset prepare_dataset(const ExperimentConfig& config);

/// manifest.json: command, config, config hash, seed, version, precision.
void write_manifest(const ExperimentConfig& config, const std::string& command);

/// Writes dataset.csv (raw units) from the synthetic generator.
nlohmann::json run_synth(const ExperimentConfig& config);

/// Solves K W = [y - mean, probes] with every configured method on the
/// training split. Writes trace_<method>.csv and summary.json. A failing
/// method is recorded in the summary and the others still run.
nlohmann::json run_solver_benchmark(const ExperimentConfig& config);

/// Trains, predicts the test split and writes train_log.jsonl, model.json
/// and metrics.json.
nlohmann::json run_training(const ExperimentConfig& config);

/// Predicts the test split with the model in `model_path`. Writes
/// predictions.csv and metrics.json.
nlohmann::json run_predict(const ExperimentConfig& config);

/// Invariant suite on the first `check_n` training points. Writes
/// check.json; the returned object has "passed": bool.
nlohmann::json run_check(const ExperimentConfig& config);

}  // namespace apgp::tools
