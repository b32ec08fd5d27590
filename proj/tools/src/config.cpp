#include "apgp/tools/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace apgp::tools {

using nlohmann::json;

namespace {

#define APGP_CONFIG_FIELDS(X)                                                 \
  X(data_path) X(split_ratio) X(standardize_features) X(synth_n) X(synth_d)   \
  X(synth_family) X(synth_lengthscale) X(synth_outputscale) X(synth_noise)    \
  X(kernel_family) X(lengthscale) X(outputscale) X(noise_variance)            \
  X(mean_constant) X(noise_floor) X(solver) X(batch_size) X(selection_rule)   \
  X(precond_rank) X(methods) X(train_tolerance) X(train_max_epochs)           \
  X(train_min_epochs) X(test_tolerance) X(test_max_epochs) X(test_min_epochs) \
  X(precision) X(storage) X(train_steps) X(step_size) X(probes)               \
  X(probe_kind) X(transform) X(exact_metrics_limit) X(check_n)                \
  X(check_batch_size) X(model_path) X(output_dir) X(seed) X(deterministic)    \
  X(jobs)

bool same_type(const json& want, const json& got) {
  if (want.is_boolean()) return got.is_boolean();
  if (want.is_number_integer()) return got.is_number_integer();
  if (want.is_number()) return got.is_number();
  if (want.is_string()) return got.is_string();
  if (want.is_array()) {
    if (!got.is_array()) return false;
    for (const auto& item : got)
      if (!item.is_string()) return false;
    return true;
  }
  return false;
}

const char* type_name(const json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array of strings";
  return "unknown";
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput("config: " + message);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(split_ratio > 0.0 && split_ratio <= 1.0, "split_ratio must be in (0, 1]");
  require(synth_n > 0 && synth_d > 0, "synth_n and synth_d must be positive");
  (void)kernel_family_from_string(synth_family);
  (void)kernel_family_from_string(kernel_family);
  require(synth_lengthscale > 0 && lengthscale > 0, "lengthscales must be positive");
  require(synth_outputscale >= 0 && outputscale >= 0, "outputscales must be >= 0");
  require(synth_noise > 0 && noise_variance > 0, "noise variances must be positive");
  require(noise_floor >= 0 && noise_variance >= noise_floor,
          "noise_variance must be >= noise_floor >= 0");
  require(solver == "ap" || solver == "cg", "solver must be 'ap' or 'cg'");
  require(batch_size > 0, "batch_size must be positive");
  (void)SelectionRule::from_string(selection_rule, seed);
  require(precond_rank >= 0, "precond_rank must be >= 0");
  require(!methods.empty(), "methods must not be empty");
  for (const auto& m : methods) (void)method_config(m);
  train_config().validate();
  solver_config(true).stop.validate();
  require(precision == "f32" || precision == "f64", "precision must be 'f32' or 'f64'");
  require(storage == "lazy" || storage == "dense", "storage must be 'lazy' or 'dense'");
  require(probe_kind == "rademacher" || probe_kind == "gaussian",
          "probe_kind must be 'rademacher' or 'gaussian'");
  require(transform == "softplus" || transform == "log",
          "transform must be 'softplus' or 'log'");
  require(exact_metrics_limit >= 0, "exact_metrics_limit must be >= 0");
  require(check_n >= 2 && check_batch_size > 0, "check_n >= 2 and check_batch_size > 0");
  require(!output_dir.empty(), "output_dir must not be empty");
  require(jobs >= 1, "jobs must be >= 1");
}

KernelSpec ExperimentConfig::initial_spec(Index dim) const {
  KernelSpec spec = KernelSpec::isotropic(kernel_family_from_string(kernel_family), dim,
                                          lengthscale, outputscale, noise_variance,
                                          mean_constant);
  spec.noise_floor = noise_floor;
  spec.validate();
  return spec;
}

KernelSpec ExperimentConfig::synth_spec() const {
  return KernelSpec::isotropic(kernel_family_from_string(synth_family), synth_d,
                               synth_lengthscale, synth_outputscale, synth_noise);
}

SolverConfig ExperimentConfig::solver_config(bool test_time) const {
  SolverConfig c;
  c.kind = solver == "cg" ? SolverKind::Cg : SolverKind::AltProj;
  c.batch_size = batch_size;
  c.rule = SelectionRule::from_string(selection_rule, seed);
  c.precond_rank = precond_rank;
  c.stop = test_time ? StoppingCriteria{test_tolerance, test_max_epochs, test_min_epochs}
                     : StoppingCriteria{train_tolerance, train_max_epochs, train_min_epochs};
  c.precision = precision == "f32" ? Precision::F32 : Precision::F64;
  c.storage = storage == "dense" ? Storage::Dense : Storage::Lazy;
  c.wall_clock = !deterministic;
  return c;
}

SolverConfig ExperimentConfig::method_config(const std::string& method) const {
  SolverConfig c = solver_config(false);
  if (method == "cg") {
    c.kind = SolverKind::Cg;
  } else if (method.rfind("ap-", 0) == 0) {
    c.kind = SolverKind::AltProj;
    c.rule = SelectionRule::from_string(method.substr(3), seed);
  } else {
    throw InvalidInput("config: unknown method '" + method +
                       "' (expected ap-gs, ap-cyclic, ap-random or cg)");
  }
  return c;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.steps = train_steps;
  t.step_size = step_size;
  t.num_probes = probes;
  t.probe_kind = probe_kind == "gaussian" ? ProbeKind::GaussianPreconditioned
                                          : ProbeKind::Rademacher;
  t.solver = solver_config(false);
  t.seed = seed;
  t.transform = transform == "log" ? Transform::Log : Transform::Softplus;
  return t;
}

json to_json(const ExperimentConfig& c) {
  json j;
#define X(name) j[#name] = c.name;
  APGP_CONFIG_FIELDS(X)
#undef X
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("config: top level must be an object");
  const json defaults = to_json(ExperimentConfig{});
  for (const auto& [key, value] : j.items()) {
    const auto it = defaults.find(key);
    if (it == defaults.end()) throw InvalidInput("config: unknown key '" + key + "'");
    if (!same_type(*it, value))
      throw InvalidInput("config: key '" + key + "' must be a " + type_name(*it));
    if (it->is_number_unsigned() && value.is_number_integer() && value.get<long long>() < 0 &&
        !value.is_number_unsigned())
      throw InvalidInput("config: key '" + key + "' must be non-negative");
  }
  ExperimentConfig c;
#define X(name) \
  if (j.contains(#name)) j.at(#name).get_to(c.name);
  APGP_CONFIG_FIELDS(X)
#undef X
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InvalidInput("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
  // Where results go and how many threads compute them do not change them.
  nlohmann::json j = to_json(config);
  j.erase("output_dir");
  j.erase("jobs");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace apgp::tools
