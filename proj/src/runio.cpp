#include "rpnbo/runio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>

namespace rpnbo {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double from_number_or_null(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number_or_null(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, Eigen::Index cols_hint = 0) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = cols_hint;
  if (rows > 0) cols = static_cast<Eigen::Index>(j.at(0).size());
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = from_number_or_null(j.at(i).at(c));
  return m;
}

}  // namespace

void write_run_record(const RunRecord& record, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw SerializationError("write_run_record: cannot open " + file.string());

  json header;
  header["type"] = "header";
  header["problem"] = record.problem_id;
  header["seed"] = record.seed;
  header["config_hash"] = record.config_hash;
  header["n_init"] = record.n_init;
  header["budget"] = record.budget;
  header["q"] = record.q;
  header["acquisition"] = record.acquisition;
  header["status"] = static_cast<int>(record.status);
  header["n_evals_hf"] = record.n_evals_h;
  header["n_evals_lf"] = record.n_evals_l;
  header["ensembles_trained"] = record.total_ensembles_trained;
  os << header.dump() << "\n";

  for (const IterationLog& it : record.iterations) {
    json row;
    row["type"] = "iteration";
    row["iteration"] = it.iteration;
    row["fidelity"] = std::string(1, it.fidelity);
    row["x"] = matrix_to_json(it.x);
    row["y"] = matrix_to_json(it.y);
    json f = json::array();
    for (Eigen::Index i = 0; i < it.f_values.size(); ++i) f.push_back(number_or_null(it.f_values[i]));
    row["f"] = std::move(f);
    row["c"] = matrix_to_json(it.c_values);
    row["failed"] = it.failed;
    row["best_feasible"] = number_or_null(it.best_feasible);
    row["ensembles_trained"] = it.ensembles_trained;
    os << row.dump() << "\n";
  }
  if (!os) throw SerializationError("write_run_record: write failed for " + file.string());

  std::ofstream times(file.string() + ".times.csv");
  times << "iteration,fidelity,train_seconds,acq_seconds\n";
  for (const IterationLog& it : record.iterations)
    times << it.iteration << "," << it.fidelity << "," << it.train_seconds << ","
          << it.acq_seconds << "\n";
}

RunRecord read_run_record(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw SerializationError("read_run_record: cannot open " + file.string());
  RunRecord record;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.value("type", "");
    if (type == "header") {
      record.problem_id = j.at("problem").get<std::string>();
      record.seed = j.at("seed").get<std::uint64_t>();
      record.config_hash = j.value("config_hash", "");
      record.n_init = j.at("n_init").get<int>();
      record.budget = j.at("budget").get<int>();
      record.q = j.at("q").get<int>();
      record.acquisition = j.value("acquisition", "");
      record.status = static_cast<RunStatus>(j.at("status").get<int>());
      record.n_evals_h = j.at("n_evals_hf").get<int>();
      record.n_evals_l = j.at("n_evals_lf").get<int>();
      record.total_ensembles_trained = j.value("ensembles_trained", 0);
      have_header = true;
    } else if (type == "iteration") {
      IterationLog it;
      it.iteration = j.at("iteration").get<int>();
      it.fidelity = j.at("fidelity").get<std::string>().at(0);
      it.x = matrix_from_json(j.at("x"));
      it.y = matrix_from_json(j.at("y"));
      const json& f = j.at("f");
      it.f_values.resize(static_cast<Eigen::Index>(f.size()));
      for (Eigen::Index i = 0; i < it.f_values.size(); ++i)
        it.f_values[i] = from_number_or_null(f.at(static_cast<std::size_t>(i)));
      it.c_values = matrix_from_json(j.at("c"));
      it.failed = j.at("failed").get<std::vector<std::uint8_t>>();
      it.best_feasible = from_number_or_null(j.at("best_feasible"));
      it.ensembles_trained = j.value("ensembles_trained", 0);
      record.iterations.push_back(std::move(it));
    }
  }
  if (!have_header) throw SerializationError("read_run_record: no header line in " + file.string());
  return record;
}

double quantile(std::vector<double> values, double p) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return !std::isfinite(v); }),
               values.end());
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> aggregate_records(const std::vector<RunRecord>& records) {
  if (records.empty()) return {};
  // Collapse each record to one row per iteration index (the last event of
  // the iteration carries the incumbent after all its evaluations).
  struct PerIteration {
    std::vector<double> best;
    std::vector<double> evals_h;
    std::vector<double> evals_l;
  };
  std::map<int, PerIteration> table;
  for (const RunRecord& record : records) {
    std::map<int, double> best_at;
    std::map<int, std::pair<int, int>> evals_at;
    int h = 0, l = 0;
    for (const IterationLog& it : record.iterations) {
      for (std::size_t i = 0; i < it.failed.size(); ++i)
        if (!it.failed[i]) (it.fidelity == 'L' ? l : h) += 1;
      best_at[it.iteration] = it.best_feasible;
      evals_at[it.iteration] = {h, l};
    }
    for (const auto& [iteration, best] : best_at) {
      PerIteration& row = table[iteration];
      row.best.push_back(best);
      row.evals_h.push_back(static_cast<double>(evals_at[iteration].first));
      row.evals_l.push_back(static_cast<double>(evals_at[iteration].second));
    }
  }
  std::vector<SummaryRow> rows;
  for (const auto& [iteration, data] : table) {
    SummaryRow row;
    row.iteration = iteration;
    row.n_evals_hf = quantile(data.evals_h, 0.5);
    row.n_evals_lf = quantile(data.evals_l, 0.5);
    row.median = quantile(data.best, 0.5);
    row.q25 = quantile(data.best, 0.25);
    row.q75 = quantile(data.best, 0.75);
    rows.push_back(row);
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw SerializationError("write_summary_csv: cannot open " + file.string());
  os << "iteration,n_evals_hf,n_evals_lf,median,q25,q75\n";
  os.precision(17);
  const auto cell = [&os](double v) {
    if (std::isfinite(v)) os << v;
  };
  for (const SummaryRow& row : rows) {
    os << row.iteration << "," << row.n_evals_hf << "," << row.n_evals_lf << ",";
    cell(row.median);
    os << ",";
    cell(row.q25);
    os << ",";
    cell(row.q75);
    os << "\n";
  }
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  const std::filesystem::path p(pattern);
  const std::filesystem::path dir = p.has_parent_path() ? p.parent_path() : ".";
  const std::string name = p.filename().string();
  std::string rx;
  for (const char c : name) {
    if (c == '*')
      rx += ".*";
    else if (c == '?')
      rx += '.';
    else if (std::string("\\^$.|+()[]{}").find(c) != std::string::npos)
      rx += std::string("\\") + c;
    else
      rx += c;
  }
  const std::regex re(rx);
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::exists(dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && std::regex_match(entry.path().filename().string(), re))
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rpnbo
