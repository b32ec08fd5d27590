#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "apgp/dataset.hpp"
#include "apgp/gp.hpp"

namespace apgp::tools {

nlohmann::json spec_to_json(const KernelSpec& spec);
KernelSpec spec_from_json(const nlohmann::json& j);

/// {step, hyperparameters, solver_epochs_or_iters, avg_rel_residual_at_stop,
///  cumulative_flops, wall_time_s}
nlohmann::json train_record_to_json(const TrainLogRecord& record);

/// Throws InvalidInput unless `j` has the metrics layout written by
/// `train` and `predict`.
void validate_metrics(const nlohmann::json& j);

/// {"error": kind, "message": what}
nlohmann::json error_json(const std::exception& e);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);
void write_trace(const std::filesystem::path& path, const Trace& trace);

}  // namespace apgp::tools
