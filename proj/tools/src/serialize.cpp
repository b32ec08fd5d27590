#include "apgp/tools/serialize.hpp"

#include <fstream>
#include <vector>

namespace apgp::tools {

using nlohmann::json;

json spec_to_json(const KernelSpec& spec) {
  std::vector<double> ls(spec.lengthscales.data(),
                         spec.lengthscales.data() + spec.lengthscales.size());
  return {{"family", std::string(to_string(spec.family))},
          {"lengthscales", ls},
          {"outputscale", spec.outputscale},
          {"noise_variance", spec.noise_variance},
          {"mean_constant", spec.mean_constant},
          {"noise_floor", spec.noise_floor}};
}

KernelSpec spec_from_json(const json& j) {
  try {
    KernelSpec spec;
    spec.family = kernel_family_from_string(j.at("family").get<std::string>());
    const auto ls = j.at("lengthscales").get<std::vector<double>>();
    spec.lengthscales = Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Index>(ls.size()));
    spec.outputscale = j.at("outputscale").get<double>();
    spec.noise_variance = j.at("noise_variance").get<double>();
    spec.mean_constant = j.at("mean_constant").get<double>();
    spec.noise_floor = j.value("noise_floor", spec.noise_floor);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("model: ") + e.what());
  }
}

json train_record_to_json(const TrainLogRecord& r) {
  json hp = spec_to_json(r.spec);
  hp.erase("family");
  hp.erase("noise_floor");
  return {{"step", r.step},
          {"hyperparameters", hp},
          {"solver_epochs_or_iters", r.solver_iterations},
          {"avg_rel_residual_at_stop", r.avg_rel_residual},
          {"cumulative_flops", r.cumulative_flops},
          {"wall_time_s", r.wall_time_s}};
}

void validate_metrics(const json& j) {
  if (!j.is_object()) throw InvalidInput("metrics: not an object");
  for (const char* key : {"rmse", "train_epochs_total", "train_wall_time", "predict_wall_time"}) {
    if (!j.contains(key) || !j.at(key).is_number())
      throw InvalidInput(std::string("metrics: '") + key + "' must be a number");
  }
  if (!j.contains("nll") || !(j.at("nll").is_number() || j.at("nll").is_null()))
    throw InvalidInput("metrics: 'nll' must be a number or null");
  if (!(j.at("rmse").get<double>() >= 0.0)) throw InvalidInput("metrics: 'rmse' is negative");
  if (!j.at("train_epochs_total").is_number_integer() ||
      j.at("train_epochs_total").get<long long>() < 0)
    throw InvalidInput("metrics: 'train_epochs_total' must be a non-negative integer");
}

json error_json(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  return {{"error", err != nullptr ? err->kind() : "internal_error"}, {"message", e.what()}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("'" + path.string() + "': " + e.what());
  }
}

void write_trace(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  write_trace_csv(out, trace);
}

}  // namespace apgp::tools
