#include "apgp/tools/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "apgp/tools/serialize.hpp"
#include "apgp/version.hpp"

namespace apgp::tools {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path output_dir(const ExperimentConfig& config) {
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  return dir;
}

json optional_number(const std::optional<int>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

Dataset prepare_dataset(const ExperimentConfig& config) {
  if (!config.data_path.empty())
    return load_dataset(config.data_path, config.split_ratio, config.seed,
                        config.standardize_features);
  return synth_dataset(config.synth_n, config.synth_d, config.synth_spec(), config.seed,
                       config.split_ratio, config.standardize_features);
}

void write_manifest(const ExperimentConfig& config, const std::string& command) {
  const json manifest = {{"command", command},
                         {"config", to_json(config)},
                         {"config_hash", config_hash(config)},
                         {"seed", config.seed},
                         {"version", std::string(kVersion)},
                         {"precision", config.precision},
                         {"deterministic", config.deterministic},
                         {"jobs", config.jobs}};
  write_json(output_dir(config) / "manifest.json", manifest);
}

json run_synth(const ExperimentConfig& config) {
  const RawData raw = synth_raw(config.synth_n, config.synth_d, config.synth_spec(), config.seed);
  const fs::path path = output_dir(config) / "dataset.csv";
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  write_csv(out, raw);
  write_manifest(config, "synth");
  return {{"dataset", path.string()}, {"n", raw.X.rows()}, {"d", raw.X.cols()}};
}

json run_solver_benchmark(const ExperimentConfig& config) {
  const Dataset ds = prepare_dataset(config);
  const PointMatrix<double> X = ds.train_X();
  const Eigen::VectorXd y = ds.train_y();
  const KernelSpec spec = config.initial_spec(X.cols());
  const TraceProbeSet probes =
      make_probes(y, spec.mean_constant, config.probes, ProbeKind::Rademacher, config.seed);
  const fs::path dir = output_dir(config);

  const auto& methods = config.methods;
  std::vector<json> rows(methods.size());
  auto run_one = [&](std::size_t i) {
    const std::string& method = methods[i];
    const SolverConfig solver = config.method_config(method);
    json row = {{"method", method}};
    const Stopwatch clock(!config.deterministic);
    Trace trace;
    try {
      BatchedSolve result = solve_kernel_system(spec, X, probes.B, solver);
      trace = std::move(result.trace);
      row["status"] = "ok";
      row["converged"] = result.converged;
      row["iterations"] = result.iterations;
    } catch (const SolverError& e) {
      trace = e.trace();
      row["status"] = "error";
      row["error"] = error_json(e);
    } catch (const std::exception& e) {
      row["status"] = "error";
      row["error"] = error_json(e);
    }
    const std::optional<int> hit = epochs_to_tolerance(trace, solver.stop.tolerance);
    row["iterations_to_tolerance"] = optional_number(hit);
    row["flops_to_tolerance"] =
        hit ? json(trace[static_cast<std::size_t>(*hit)].cumulative_flops) : json(nullptr);
    row["final_avg_rel_residual"] = trace.empty() ? json(nullptr) : json(trace.back().avg_rel_residual);
    row["total_flops"] = trace.empty() ? 0.0 : trace.back().cumulative_flops;
    row["wall_time_s"] = clock.seconds();
    row["trace"] = "trace_" + method + ".csv";
    write_trace(dir / ("trace_" + method + ".csv"), trace);
    rows[i] = std::move(row);
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), methods.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < methods.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < methods.size(); i = next++) run_one(i);
      });
    for (auto& t : pool) t.join();
  }

  json summary = {{"n", X.rows()},
                  {"columns", probes.B.cols()},
                  {"tolerance", config.train_tolerance},
                  {"spec", spec_to_json(spec)},
                  {"methods", rows}};
  write_json(dir / "summary.json", summary);
  write_manifest(config, "solve");
  return summary;
}

namespace {

json evaluate(const ExperimentConfig& config, const Dataset& ds, const KernelSpec& spec,
              double train_wall, long train_epochs, const fs::path& dir) {
  const PointMatrix<double> X = ds.train_X();
  const PointMatrix<double> Xte = ds.test_X();
  const Eigen::VectorXd y = ds.train_y();
  const Eigen::VectorXd yte = ds.test_y();

  const Stopwatch clock(!config.deterministic);
  BatchedSolve info;
  const Eigen::VectorXd mean = predict_mean(spec, X, y, Xte, config.solver_config(true), &info);
  const double predict_wall = clock.seconds();

  json metrics = {{"rmse", rmse(mean, yte)},
                  {"nll", nullptr},
                  {"train_epochs_total", train_epochs},
                  {"train_wall_time", train_wall},
                  {"predict_wall_time", predict_wall},
                  {"predict_iterations", info.iterations},
                  {"predict_avg_rel_residual", info.avg_rel_residual()},
                  {"n_train", X.rows()},
                  {"n_test", Xte.rows()}};
  if (Xte.rows() > 0 && X.rows() <= config.exact_metrics_limit)
    metrics["nll"] = exact_predict_variance_nll(spec, X, Xte, yte, mean).mean_nll;
  validate_metrics(metrics);
  write_json(dir / "metrics.json", metrics);

  std::ofstream out(dir / "predictions.csv");
  out << "index,mean,mean_original_units,target\n";
  char buf[128];
  for (Index i = 0; i < Xte.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(ds.test[static_cast<std::size_t>(i)]), mean[i],
                  mean[i] * ds.label_std + ds.label_mean, yte[i]);
    out << buf;
  }
  return metrics;
}

}  // namespace

json run_training(const ExperimentConfig& config) {
  const Dataset ds = prepare_dataset(config);
  const PointMatrix<double> X = ds.train_X();
  const Eigen::VectorXd y = ds.train_y();
  const fs::path dir = output_dir(config);
  write_manifest(config, "train");

  std::ofstream log(dir / "train_log.jsonl");
  long epochs = 0;
  const auto on_step = [&](const TrainLogRecord& r) {
    log << train_record_to_json(r).dump() << '\n';
    log.flush();
    epochs += r.solver_iterations;
  };
  const Stopwatch clock(!config.deterministic);
  const TrainResult trained = train(X, y, config.initial_spec(X.cols()), config.train_config(), on_step);
  const double train_wall = clock.seconds();

  json model = {{"spec", spec_to_json(trained.spec)},
                {"label_mean", ds.label_mean},
                {"label_std", ds.label_std},
                {"config_hash", config_hash(config)}};
  write_json(dir / "model.json", model);
  return evaluate(config, ds, trained.spec, train_wall, epochs, dir);
}

json run_predict(const ExperimentConfig& config) {
  if (config.model_path.empty()) throw InvalidInput("predict needs model_path");
  const json model = read_json(config.model_path);
  if (!model.contains("spec")) throw InvalidInput("model: missing 'spec'");
  const KernelSpec spec = spec_from_json(model.at("spec"));
  const Dataset ds = prepare_dataset(config);
  if (spec.dim() != ds.dim())
    throw InvalidInput("model dimension " + std::to_string(spec.dim()) +
                       " does not match dataset dimension " + std::to_string(ds.dim()));
  const fs::path dir = output_dir(config);
  write_manifest(config, "predict");
  return evaluate(config, ds, spec, 0.0, 0, dir);
}

}  // namespace apgp::tools
