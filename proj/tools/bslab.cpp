// Command-line front end: run, validate, list-scenarios, coeffs-table.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "bslab/bslab.hpp"

namespace {

using namespace bslab;
using namespace bslab::experiment;

ExperimentConfig resolve(const std::string& source) {
  constexpr std::string_view prefix = "builtin:";
  if (source.rfind(prefix, 0) == 0) return builtin_config(source.substr(prefix.size()));
  return load_config(source);
}

void print_error(std::string_view stage, const std::string& message) {
  std::cerr << "bslab: " << stage << ": " << message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Birman-Schwinger spectral laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--threads", threads, "worker threads (default: BSLAB_THREADS or hardware)")
      ->check(CLI::PositiveNumber);

  std::string config_source;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config or builtin:<id>");
  run->add_option("config", config_source, "config path or builtin:<id>")->required();
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", config_source, "config path or builtin:<id>")->required();
  app.add_subcommand("list-scenarios", "list measure scenarios and builtin experiments");
  int max_dim = 4;
  auto* table = app.add_subcommand("coeffs-table", "print the surface coefficients Z(d, codim) as CSV");
  table->add_option("--max-dim", max_dim, "largest d and codim")->check(CLI::Range(1, 16));

  CLI11_PARSE(app, argc, argv);
  if (threads) set_thread_count(*threads);

  if (app.got_subcommand("list-scenarios")) {
    std::cout << "measure scenarios:\n";
    for (const auto& s : scenario_catalog())
      std::cout << "  " << s.name << " [requires: " << s.required << "]\n      " << s.description << "\n";
    std::cout << "builtin experiments (run with builtin:<id>):\n";
    for (const auto& b : builtin_experiments())
      std::cout << "  " << b.id << "\n      reference: " << b.reference << "\n      expected verdict: " << b.expected
                << "\n      " << b.note << "\n";
    return exit_pass;
  }
  if (app.got_subcommand("coeffs-table")) {
    std::cout << coefficient_table_csv(max_dim);
    return exit_pass;
  }

  ExperimentConfig config;
  try {
    config = resolve(config_source);
    if (out_dir) config.output.dir = *out_dir;
    if (seed) config.seed = *seed;
    validate_config(config);
  } catch (const Error& e) {
    print_error("validate", e.what());
    return exit_config;
  }
  if (app.got_subcommand("validate")) {
    std::cout << config_json(config).dump(2) << "\n";
    return exit_pass;
  }

  const auto report = run_experiment(config);
  if (!report.failed_stage.empty()) print_error(report.failed_stage, report.failure);
  for (const auto& v : report.verdicts) {
    std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.quantity << " = "
              << (v.value ? format_double(*v.value) : "null") << " " << v.op << " "
              << (v.target ? format_double(*v.target) : "null");
    if (v.op == "rel" || v.op == "abs") std::cout << " (tol " << v.tol << ")";
    std::cout << "\n";
  }
  std::cout << "outputs: " << config.output.dir << "\n";
  return report.exit_code;
}
