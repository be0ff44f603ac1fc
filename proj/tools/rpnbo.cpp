// Command-line front end: configure, run, repeat and aggregate experiments.
#include "rpnbo/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimization with randomized-prior network ensembles"};
  app.require_subcommand(1);

  std::string config_file;
  std::string glob;
  std::string out_csv;

  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_file, "experiment config file")->required();

  CLI::App* baseline =
      app.add_subcommand("baseline-random", "Random-search baseline with the same budget");
  baseline->add_option("config", config_file, "experiment config file")->required();

  CLI::App* aggregate =
      app.add_subcommand("aggregate", "Merge record files into a convergence summary");
  aggregate->add_option("glob", glob, "record file glob, e.g. 'runs/env_*.jsonl'")->required();
  aggregate->add_option("-o,--out", out_csv, "summary CSV path (default: stdout)");

  app.add_subcommand("list-problems", "List the built-in problem ids");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return rpnbo::cmd_run(config_file);
    if (baseline->parsed()) return rpnbo::cmd_baseline_random(config_file);
    if (aggregate->parsed()) return rpnbo::cmd_aggregate(glob, out_csv);
    return rpnbo::cmd_list_problems();
  } catch (const rpnbo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
