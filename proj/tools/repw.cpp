// repw: run, validate and report balancing-weight experiments.

#include "repw/config.hpp"
#include "repw/pipeline.hpp"
#include "repw/report.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kAllFailed = 2;

std::string output_dir(const repw::RunConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("REPW_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

int cmd_run(const std::string& path, const std::string& out_flag, bool quiet) {
  repw::RunConfig cfg;
  try {
    cfg = repw::load_config(path);
  } catch (const repw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  cfg.output_dir = output_dir(cfg, out_flag);
  repw::RunResult result;
  try {
    repw::check_data(cfg);
  } catch (const repw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    result = repw::run_pipeline(cfg, quiet ? nullptr : &std::cerr);
  } catch (const std::exception& e) {
    // Input data that cannot be read is a configuration problem.
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  repw::write_outputs(cfg, result, cfg.output_dir);
  std::cout << repw::format_table(result.records);
  std::cout << "results written to " << cfg.output_dir << '\n';
  if (result.all_failed()) {
    std::cerr << "every cell failed\n";
    return kAllFailed;
  }
  return kOk;
}

int cmd_validate(const std::string& path) {
  try {
    const auto cfg = repw::load_config(path);
    const auto tasks = repw::check_data(cfg);
    std::cout << "config ok: task " << repw::framing_name(cfg.task) << " (" << tasks.size() << " weighting task(s)), "
              << cfg.methods.size() << " method(s), " << cfg.seeds.size() << " seed(s), "
              << (cfg.synthetic ? "synthetic data" : "csv " + cfg.csv->path) << '\n';
  } catch (const repw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}

int cmd_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open '" << path << "'\n";
    return kConfigError;
  }
  try {
    std::cout << repw::format_table(repw::read_results_tsv(in));
  } catch (const std::exception& e) {
    std::cerr << "report error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-based balancing weights with learned representations"};
  app.require_subcommand(1);

  std::string config_path, out_flag, results_path;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run every seed x method cell of a config");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("-o,--output-dir", out_flag, "Output directory (overrides REPW_OUTPUT_DIR and the config)");
  run->add_flag("-q,--quiet", quiet, "No progress lines");

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config_path, "JSON config file")->required();

  auto* report = app.add_subcommand("report", "Print the summary table of a results file");
  report->add_option("results", results_path, "results.tsv written by run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (*run) return cmd_run(config_path, out_flag, quiet);
  if (*validate) return cmd_validate(config_path);
  return cmd_report(results_path);
}
