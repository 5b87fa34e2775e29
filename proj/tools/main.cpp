#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nnadapt/commands.hpp"
#include "nnadapt/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nearest-neighborhood deep-clustering adaptation of a source classifier "
               "to unlabeled target data"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode;
  uint64_t seed = 0;
  CLI::Option* config_opt =
      app.add_option("--config", config_path, "json config file (defaults cover the standard task)");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "master seed override");
  CLI::Option* out_opt = app.add_option("--out", out_dir, "output directory override");
  CLI::Option* mode_opt =
      app.add_option("--mode", mode, "neighborhood mode override: nnh or shnnh");

  for (const char* name : {"gen-data", "pretrain", "adapt", "eval", "ablate"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->fallthrough();  // shared flags may appear after the subcommand
  }
  app.get_subcommand("gen-data")->description("write the synthetic source/target csv pair");
  app.get_subcommand("pretrain")->description("train the source classifier");
  app.get_subcommand("adapt")->description("adapt the source checkpoint to unlabeled target data");
  app.get_subcommand("eval")->description("score a checkpoint against a labeled csv");
  app.get_subcommand("ablate")->description("run the config-toggle comparison suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  }

  try {
    nnadapt::CliOverrides overrides;
    if (config_opt->count() == 0) config_path.clear();
    if (seed_opt->count() > 0) overrides.seed = seed;
    if (out_opt->count() > 0) overrides.out_dir = out_dir;
    if (mode_opt->count() > 0) overrides.mode = mode;
    const nnadapt::RunConfig cfg = nnadapt::load_run_config(config_path, overrides);

    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "gen-data") return nnadapt::cmd_gen_data(cfg);
    if (sub == "pretrain") return nnadapt::cmd_pretrain(cfg);
    if (sub == "adapt") return nnadapt::cmd_adapt(cfg);
    if (sub == "eval") return nnadapt::cmd_eval(cfg);
    if (sub == "ablate") return nnadapt::cmd_ablate(cfg);
    std::cerr << "error: unknown subcommand " << sub << "\n";
    return 2;
  } catch (const nnadapt::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nnadapt::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const nnadapt::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
