#include "nlgrad/runner.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

const std::vector<std::string> kKinds{"check",    "solve-state", "solve-control",  "sweep-s",
                                      "sweep-delta", "poincare", "operator-probe", "validate"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal gradient state and control solver"};
  std::string kind;
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("kind", kind, "Experiment kind")->required()->check(CLI::IsMember(kKinds));
  app.add_option("--config", config_path, "INI experiment file")->check(CLI::ExistingFile);
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides output.dir)");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  nlgrad::ExperimentConfig config;
  try {
    if (!config_path.empty()) {
      config = nlgrad::load_config(config_path);
    } else if (kind != "check") {
      std::cerr << "--config is required for " << kind << '\n';
      return nlgrad::kExitValidation;
    }
  } catch (const nlgrad::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return nlgrad::kExitValidation;
  }

  if (kind == "validate") {
    const auto violations = nlgrad::config_violations(config);
    for (const auto& v : violations) std::cout << v << '\n';
    if (violations.empty()) std::cout << "valid " << nlgrad::to_string(config.kind) << " configuration\n";
    return violations.empty() ? nlgrad::kExitSuccess : nlgrad::kExitValidation;
  }
  config.kind = nlgrad::parse_experiment_kind(kind);

  nlgrad::RunOptions options;
  options.config_path = config_path;
  if (*out_opt) options.out = out;
  if (*seed_opt) options.seed = seed;
  if (*threads_opt) options.threads = threads;
  return nlgrad::run_experiment(std::move(config), options);
}
