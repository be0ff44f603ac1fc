#include "rpnbo/experiment.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace rpnbo {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string token;
  while (is >> token) out.push_back(token);
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const std::string& token : split_tokens(value))
    out.push_back(static_cast<int>(parse_int(key, token)));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double parsed = 0.0;
  std::sscanf(buf, "%lg", &parsed);
  if (parsed == v) {
    // Prefer the shortest representation that round-trips.
    for (int prec = 1; prec <= 16; ++prec) {
      char shorter[64];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lg", &parsed);
      if (parsed == v) return shorter;
    }
  }
  return buf;
}

}  // namespace

std::vector<std::uint64_t> ExperimentConfig::resolved_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (int i = 0; i < seed_count; ++i) out.push_back(seed_base + static_cast<std::uint64_t>(i));
  return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line is not 'key = value': '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError("config key '" + key + "': empty value");

    if (key == "problem") c.problem = value;
    else if (key == "grid_n") c.grid_n = static_cast<int>(parse_int(key, value));
    else if (key == "acquisition") c.acquisition = value;
    else if (key == "kappa") c.kappa = parse_double(key, value);
    else if (key == "q") c.q = static_cast<int>(parse_int(key, value));
    else if (key == "epsilon") c.epsilon = parse_double(key, value);
    else if (key == "delta") c.delta = parse_double(key, value);
    else if (key == "sigmoid_steepness") c.sigmoid_steepness = parse_double(key, value);
    else if (key == "n_gmm") c.n_gmm = static_cast<int>(parse_int(key, value));
    else if (key == "n_probe") c.n_probe = static_cast<int>(parse_int(key, value));
    else if (key == "n_init") c.n_init = static_cast<int>(parse_int(key, value));
    else if (key == "n_init_low") c.n_init_low = static_cast<int>(parse_int(key, value));
    else if (key == "budget") c.budget = static_cast<int>(parse_int(key, value));
    else if (key == "seeds") {
      const auto tokens = split_tokens(value);
      if (tokens.size() == 1) {
        c.seed_count = static_cast<int>(parse_int(key, tokens[0]));
        c.seeds.clear();
      } else {
        c.seeds.clear();
        for (const auto& t : tokens)
          c.seeds.push_back(static_cast<std::uint64_t>(parse_int(key, t)));
      }
    } else if (key == "seed_base") c.seed_base = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "ensemble_size") c.ensemble_size = static_cast<int>(parse_int(key, value));
    else if (key == "arch") c.arch = value;
    else if (key == "hidden") c.hidden = parse_int_list(key, value);
    else if (key == "trunk_hidden") c.trunk_hidden = parse_int_list(key, value);
    else if (key == "latent") c.latent = static_cast<int>(parse_int(key, value));
    else if (key == "activation") c.activation = value;
    else if (key == "iterations") c.iterations = static_cast<int>(parse_int(key, value));
    else if (key == "bootstrap_fraction") c.bootstrap_fraction = parse_double(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_double(key, value);
    else if (key == "lr_decay") c.lr_decay = parse_double(key, value);
    else if (key == "workers") c.workers = static_cast<int>(parse_int(key, value));
    else if (key == "multi_fidelity") c.multi_fidelity = parse_bool(key, value);
    else if (key == "fidelity_schedule") c.fidelity_schedule = value;
    else if (key == "lf_kappa") c.lf_kappa = parse_double(key, value);
    else if (key == "hidden_low") c.hidden_low = parse_int_list(key, value);
    else if (key == "iterations_low") c.iterations_low = static_cast<int>(parse_int(key, value));
    else if (key == "restarts") c.restarts = static_cast<int>(parse_int(key, value));
    else if (key == "opt_steps") c.opt_steps = static_cast<int>(parse_int(key, value));
    else if (key == "opt_lr") c.opt_lr = parse_double(key, value);
    else if (key == "out_dir") c.out_dir = value;
    else throw ConfigError("unknown config key: '" + key + "'");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file: " + file.string());
  std::ostringstream text;
  text << is.rdbuf();
  return parse_config_text(text.str());
}

std::string canonical_config_text(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto put = [&os](const std::string& key, const std::string& value) {
    os << key << " = " << value << "\n";
  };
  const auto put_ints = [&put](const std::string& key, const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    put(key, s);
  };
  put("problem", c.problem);
  put("grid_n", std::to_string(c.grid_n));
  put("acquisition", c.acquisition);
  put("kappa", format_double(c.kappa));
  put("q", std::to_string(c.q));
  put("epsilon", format_double(c.epsilon));
  put("delta", format_double(c.delta));
  put("sigmoid_steepness", format_double(c.sigmoid_steepness));
  put("n_gmm", std::to_string(c.n_gmm));
  put("n_probe", std::to_string(c.n_probe));
  put("n_init", std::to_string(c.n_init));
  put("n_init_low", std::to_string(c.n_init_low));
  put("budget", std::to_string(c.budget));
  if (!c.seeds.empty()) {
    std::string s;
    for (std::size_t i = 0; i < c.seeds.size(); ++i)
      s += (i ? " " : "") + std::to_string(c.seeds[i]);
    put("seeds", s);
  } else {
    put("seeds", std::to_string(c.seed_count));
    put("seed_base", std::to_string(c.seed_base));
  }
  put("ensemble_size", std::to_string(c.ensemble_size));
  put("arch", c.arch);
  put_ints("hidden", c.hidden);
  put_ints("trunk_hidden", c.trunk_hidden);
  put("latent", std::to_string(c.latent));
  put("activation", c.activation);
  put("iterations", std::to_string(c.iterations));
  put("bootstrap_fraction", format_double(c.bootstrap_fraction));
  put("learning_rate", format_double(c.learning_rate));
  put("lr_decay", format_double(c.lr_decay));
  put("workers", std::to_string(c.workers));
  put("multi_fidelity", c.multi_fidelity ? "true" : "false");
  put("fidelity_schedule", c.fidelity_schedule);
  put("lf_kappa", format_double(c.lf_kappa));
  if (!c.hidden_low.empty()) put_ints("hidden_low", c.hidden_low);
  if (c.iterations_low > 0) put("iterations_low", std::to_string(c.iterations_low));
  put("restarts", std::to_string(c.restarts));
  put("opt_steps", std::to_string(c.opt_steps));
  put("opt_lr", format_double(c.opt_lr));
  put("out_dir", c.out_dir);
  return os.str();
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = canonical_config_text(config);
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

Problem experiment_problem(const ExperimentConfig& config) {
  problems::ProblemOptions options;
  options.grid_n = config.grid_n;
  return problems::make_problem(config.problem, options);
}

BoConfig experiment_bo_config(const ExperimentConfig& c) {
  BoConfig bo;
  bo.n_init = c.n_init;
  bo.n_init_low = c.n_init_low;
  bo.budget = c.budget;

  const auto family = family_from_name(c.acquisition);
  if (!family) throw ConfigError("config key 'acquisition': unknown family '" + c.acquisition + "'");
  bo.acq.family = *family;
  bo.acq.kappa = c.kappa;
  bo.acq.q = c.q;
  bo.acq.epsilon = c.epsilon;
  bo.acq.delta = c.delta;
  bo.acq.sigmoid_steepness = c.sigmoid_steepness;
  bo.acq.n_gmm = c.n_gmm;
  bo.acq.n_probe = c.n_probe;
  bo.lf_acq.kappa = c.lf_kappa;
  bo.lf_acq.epsilon = c.epsilon;

  EnsembleConfig& ens = bo.ens;
  ens.n_members = c.ensemble_size;
  if (c.arch == "mlp")
    ens.arch = Arch::Mlp;
  else if (c.arch == "deeponet")
    ens.arch = Arch::DeepOnet;
  else
    throw ConfigError("config key 'arch': expected mlp or deeponet, got '" + c.arch + "'");
  ens.hidden = c.hidden;
  ens.trunk_hidden = c.trunk_hidden;
  ens.latent = c.latent;
  if (c.activation == "tanh")
    ens.activation = Activation::Tanh;
  else if (c.activation == "relu")
    ens.activation = Activation::Relu;
  else
    throw ConfigError("config key 'activation': expected tanh or relu, got '" + c.activation + "'");
  ens.iterations = c.iterations;
  ens.bootstrap_fraction = c.bootstrap_fraction;
  ens.adam.base_lr = c.learning_rate;
  ens.adam.decay = c.lr_decay;
  ens.workers = c.workers;

  bo.ens_low = ens;
  if (!c.hidden_low.empty()) bo.ens_low.hidden = c.hidden_low;
  if (c.iterations_low > 0) bo.ens_low.iterations = c.iterations_low;

  bo.opt.restarts = c.restarts;
  bo.opt.steps = c.opt_steps;
  bo.opt.lr = c.opt_lr;
  bo.fidelity_schedule = c.fidelity_schedule;
  return bo;
}

int run_experiment(const ExperimentConfig& config, bool random_baseline) {
  const Problem problem = experiment_problem(config);
  BoConfig bo = experiment_bo_config(config);
  const std::string hash = config_hash(config);
  const std::filesystem::path out_dir(config.out_dir);

  std::vector<RunRecord> records;
  int exit_code = 0;
  for (const std::uint64_t seed : config.resolved_seeds()) {
    bo.seed = seed;
    RunRecord record;
    if (random_baseline)
      record = run_random_baseline(problem, bo);
    else if (config.multi_fidelity)
      record = run_constrained_mf_bo(problem, bo);
    else
      record = run_bo(problem, bo);
    record.config_hash = hash;
    const std::string name = config.problem + "_" + hash.substr(0, 8) +
                             (random_baseline ? "_random" : "") + "_seed" + std::to_string(seed) +
                             ".jsonl";
    write_run_record(record, out_dir / name);
    if (record.status == RunStatus::Aborted) exit_code = 3;
    if (record.status == RunStatus::NoFeasibleIncumbent && exit_code == 0) exit_code = 4;
    records.push_back(std::move(record));
  }
  const std::string summary_name =
      std::string(random_baseline ? "summary_random_" : "summary_") + hash.substr(0, 8) + ".csv";
  write_summary_csv(aggregate_records(records), out_dir / summary_name);
  return exit_code;
}

int cmd_run(const std::filesystem::path& config_file) {
  return run_experiment(load_config(config_file), false);
}

int cmd_baseline_random(const std::filesystem::path& config_file) {
  return run_experiment(load_config(config_file), true);
}

int cmd_aggregate(const std::string& glob, const std::filesystem::path& out_csv) {
  const auto files = expand_glob(glob);
  if (files.empty()) throw ConfigError("aggregate: no record files match '" + glob + "'");
  std::vector<RunRecord> records;
  for (const auto& file : files) records.push_back(read_run_record(file));
  const auto rows = aggregate_records(records);
  if (out_csv.empty()) {
    std::cout << "iteration,n_evals_hf,n_evals_lf,median,q25,q75\n";
    for (const auto& row : rows) {
      std::cout << row.iteration << "," << row.n_evals_hf << "," << row.n_evals_lf << ","
                << row.median << "," << row.q25 << "," << row.q75 << "\n";
    }
  } else {
    write_summary_csv(rows, out_csv);
  }
  return 0;
}

int cmd_list_problems() {
  for (const std::string& id : problems::list_problems()) std::cout << id << "\n";
  return 0;
}

}  // namespace rpnbo
