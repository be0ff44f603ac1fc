#ifndef RPNBO_EXPERIMENT_HPP
#define RPNBO_EXPERIMENT_HPP

#include "rpnbo/bo.hpp"
#include "rpnbo/problems.hpp"
#include "rpnbo/runio.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rpnbo {

/// Flat key = value experiment description; see README for the key list.
struct ExperimentConfig {
  std::string problem = "env";
  int grid_n = 16;

  std::string acquisition = "lcb";
  double kappa = 2.0;
  int q = 1;
  double epsilon = 1e-3;
  double delta = 3.0;
  double sigmoid_steepness = 10.0;
  int n_gmm = 2;
  int n_probe = 256;

  int n_init = 5;
  int n_init_low = 0;
  int budget = 30;
  std::vector<std::uint64_t> seeds;  // explicit list
  int seed_count = 10;               // used when the list is empty
  std::uint64_t seed_base = 0;

  int ensemble_size = 32;
  std::string arch = "mlp";
  std::vector<int> hidden = {64, 64};
  std::vector<int> trunk_hidden = {64, 64};
  int latent = 64;
  std::string activation = "tanh";
  int iterations = 5000;
  double bootstrap_fraction = 0.8;
  double learning_rate = 1e-3;
  double lr_decay = 0.999;
  int workers = 0;

  bool multi_fidelity = false;
  std::string fidelity_schedule = "HL";
  double lf_kappa = 1.0;
  std::vector<int> hidden_low;    // empty: same as hidden
  int iterations_low = 0;         // 0: same as iterations

  int restarts = 16;
  int opt_steps = 200;
  double opt_lr = 1e-2;

  std::string out_dir = "runs";

  std::vector<std::uint64_t> resolved_seeds() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);
/// Canonical form: every key in a fixed order, shortest exact numbers.
std::string canonical_config_text(const ExperimentConfig& config);
/// FNV-1a hash of the canonical text, 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// The problem/BO configuration pair an experiment config denotes.
Problem experiment_problem(const ExperimentConfig& config);
BoConfig experiment_bo_config(const ExperimentConfig& config);

/// Exit codes: 0 success, 2 config error, 3 runtime failure,
/// 4 no feasible incumbent in at least one run.
int cmd_run(const std::filesystem::path& config_file);
int cmd_baseline_random(const std::filesystem::path& config_file);
int cmd_aggregate(const std::string& glob, const std::filesystem::path& out_csv);
int cmd_list_problems();

/// One optimization run per seed; records land in out_dir. Exposed for
/// harnesses that already hold a parsed config.
int run_experiment(const ExperimentConfig& config, bool random_baseline);

}  // namespace rpnbo

#endif
