// Command-line driver: one subcommand per run mode, shared flags, exit codes
//   0 success / 1 failed verification assertion / 2 configuration error /
//   3 solver failure.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "tdt/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Topological derivatives of tracking-type costs under quasi-linear "
      "transmission problems: state/adjoint solves, corrector fields, "
      "derivative evaluation, and verification studies."};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  int threads = 1;
  std::uint64_t seed = 1;
  bool deterministic = false;
  bool threads_given = false;
  bool seed_given = false;
  std::string chosen;

  for (const auto& name : tdt::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (default: out)");
    CLI::Option* t = sub->add_option("--threads", threads, "worker thread count");
    sub->add_flag("--deterministic", deterministic,
                  "force single-threaded, reproducible output");
    CLI::Option* s = sub->add_option("--seed", seed, "random seed override");
    sub->callback([&chosen, &threads_given, &seed_given, name, t, s]() {
      chosen = name;
      threads_given = t->count() > 0;
      seed_given = s->count() > 0;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  tdt::RunOptions opts;
  if (threads_given) opts.threads = threads;
  if (seed_given) opts.seed = seed;
  opts.deterministic = deterministic;

  try {
    return tdt::run_command(chosen, config_path, out_dir, opts);
  } catch (const tdt::SolverError& err) {
    std::cerr << "solver error: " << err.what() << "\n";
    return 3;
  } catch (const tdt::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const tdt::VerifyError& err) {
    std::cerr << "verification error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  }
}
