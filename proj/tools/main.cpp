#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "iit/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"informed importance tempering toolkit"};
  app.require_subcommand(1);

  iit::cli::GlobalOptions options;
  auto add_common = [&options](CLI::App* cmd) {
    cmd->add_option("--config", options.config_path, "JSON config path")->required();
    cmd->add_option("--out", options.out_dir, "output directory");
    cmd->add_option("--workers", options.workers, "worker threads for replicates");
    cmd->add_option("--cap", options.cap, "dense state-space cap");
  };

  auto* sample = app.add_subcommand("sample", "run one chain, write CSV + estimate JSON");
  auto* exact = app.add_subcommand("exact", "dense verification sweep, write JSON");
  auto* experiment =
      app.add_subcommand("experiment", "replicated runs at matched budgets, write CSV/JSON");
  add_common(sample);
  add_common(exact);
  add_common(experiment);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sample->parsed()) return iit::cli::cmd_sample(options);
    if (exact->parsed()) return iit::cli::cmd_exact(options);
    if (experiment->parsed()) return iit::cli::cmd_experiment(options);
  } catch (const iit::config_error& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const iit::resource_error& err) {
    std::cerr << "resource error: " << err.what() << " (see --cap)\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
