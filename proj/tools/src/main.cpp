// apgp: command-line experiment runner.
//
//   apgp solve   [--config file.json] [--key value ...]
//   apgp train   ...
//   apgp predict --model_path out/model.json ...
//   apgp synth   ...
//   apgp check   ...
//
// Every config key is also a flag of the same name. Precedence: defaults,
// then the config file, then APGP_OUTPUT_DIR, then flags. Results go to
// stdout as JSON; failures print {"error", "message"} JSON on stderr.

#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "apgp/tools/runner.hpp"
#include "apgp/tools/serialize.hpp"
#include "apgp/version.hpp"

namespace {

using nlohmann::json;
using apgp::tools::ExperimentConfig;

json parse_flag_value(const std::string& key, const json& like, const std::string& text) {
  auto bad = [&] {
    return apgp::InvalidInput("--" + key + ": cannot parse '" + text + "'");
  };
  if (like.is_array()) {
    json out = json::array();
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) out.push_back(item);
    return out;
  }
  if (like.is_string()) return text;
  std::size_t used = 0;
  try {
    if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') throw bad();
      const unsigned long long v = std::stoull(text, &used);
      if (used == text.size()) return v;
    } else if (like.is_number_integer()) {
      const long long v = std::stoll(text, &used);
      if (used == text.size()) return v;
    } else {
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    }
  } catch (const std::logic_error&) {
  }
  throw bad();
}

struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> options;
};

void add_config_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  const json defaults = apgp::tools::to_json(ExperimentConfig{});
  for (const auto& [key, value] : defaults.items()) {
    if (value.is_boolean())
      o.options[key] = cmd->add_flag("--" + key, o.flags[key], "default: " + value.dump());
    else
      o.options[key] = cmd->add_option("--" + key, o.values[key], "default: " + value.dump());
  }
}

ExperimentConfig resolve(const Overrides& o) {
  json merged = o.config_path.empty() ? json::object()
                                      : apgp::tools::read_json(o.config_path);
  if (!merged.is_object()) throw apgp::InvalidInput("config: top level must be an object");
  if (const char* env = std::getenv("APGP_OUTPUT_DIR"); env != nullptr && *env != '\0')
    merged["output_dir"] = env;
  const json defaults = apgp::tools::to_json(ExperimentConfig{});
  for (const auto& [key, opt] : o.options) {
    if (opt->count() == 0) continue;
    const json& like = defaults.at(key);
    merged[key] = like.is_boolean() ? json(o.flags.at(key))
                                    : parse_flag_value(key, like, o.values.at(key));
  }
  return apgp::tools::config_from_json(merged);
}

int fail(const json& error, int code) {
  std::cerr << error.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alternating projection and CG solvers for Gaussian process regression"};
  app.set_version_flag("--version", std::string(apgp::kVersion));
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"solve", "Benchmark the configured solvers on one training system"},
      {"train", "Train hyperparameters, then predict the test split"},
      {"predict", "Predict the test split with a saved model"},
      {"synth", "Write a synthetic GP dataset as CSV"},
      {"check", "Run the invariant suite on a small system"},
  };
  std::map<std::string, Overrides> overrides;
  for (const auto& c : commands) add_config_options(app.add_subcommand(c.name, c.help), overrides[c.name]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail({{"error", "usage"}, {"message", e.what()}}, 2);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const ExperimentConfig config = resolve(overrides.at(name));
    json result;
    if (name == "solve") result = apgp::tools::run_solver_benchmark(config);
    else if (name == "train") result = apgp::tools::run_training(config);
    else if (name == "predict") result = apgp::tools::run_predict(config);
    else if (name == "synth") result = apgp::tools::run_synth(config);
    else result = apgp::tools::run_check(config);
    std::cout << result.dump(2) << '\n';
    if (name == "check" && !result.at("passed").get<bool>())
      return fail({{"error", "check_failed"}, {"message", "one or more invariants failed"}}, 1);
    return 0;
  } catch (const apgp::InvalidInput& e) {
    return fail(apgp::tools::error_json(e), 2);
  } catch (const std::exception& e) {
    return fail(apgp::tools::error_json(e), 1);
  }
}
