#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "gevlab/config.hpp"
#include "gevlab/errors.hpp"
#include "gevlab/harness.hpp"

using namespace gev;

int main(int argc, char** argv) {
  CLI::App app{"gevlab: quasi-periodic operators with Gevrey hopping"};
  std::string config_path, out_dir, command, axis;
  int workers = 0;
  bool print_default = false;
  app.add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides GEVLAB_OUT and the config)");
  app.add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--command", command, "command to run")->check(CLI::IsMember(command_names()));
  app.add_option("--axis", axis, "sweep axis: theta, E, lambda or omega_t");
  app.add_flag("--print-default-config", print_default, "print the default config and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << nlohmann::json{{"error", "VALIDATION"}, {"message", e.what()}, {"exit_status", 2}}.dump() << "\n";
    return 2;
  }
  if (print_default) {
    std::cout << default_config().dump(2) << "\n";
    return 0;
  }

  try {
    const ExperimentConfig cfg = config_path.empty() ? ExperimentConfig(default_config())
                                                     : ExperimentConfig::load(config_path);
    if (workers == 0) workers = cfg.workers();
    if (out_dir.empty()) {
      const char* env = std::getenv("GEVLAB_OUT");
      out_dir = env && *env ? env : cfg.output_dir();
    }
    if (axis.empty()) axis = cfg.json().at("sweep").at("axis").get<std::string>();
    RunReport rep;
    if (axis != "none") {
      if (command.empty()) command = cfg.json().at("sweep").at("command").get<std::string>();
      rep = run_sweep(cfg, command, axis, workers);
    } else {
      if (command.empty()) throw Error(ErrorCode::Validation, "--command is required outside a sweep");
      rep = run_command(command, cfg, thread_mapper(workers));
    }
    write_report(rep, out_dir, workers);
    std::cout << rep.results_document().dump(2) << "\n";
    return rep.status;
  } catch (const Error& e) {
    std::cerr << error_payload(e).dump() << "\n";
    return exit_status(e);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "INTERNAL"}, {"message", e.what()}, {"exit_status", 3}}.dump() << "\n";
    return 3;
  }
}
