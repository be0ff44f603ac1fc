#ifndef RPNBO_RUNIO_HPP
#define RPNBO_RUNIO_HPP

#include "rpnbo/bo.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rpnbo {

/// Record file layout: line-delimited JSON, one header object on the first
/// line and one object per evaluation event after it. All content is
/// deterministic for a fixed (seed, config, problem); wall-clock timings go
/// to a separate "<file>.times.csv" sidecar so records can be compared
/// byte for byte.
void write_run_record(const RunRecord& record, const std::filesystem::path& file);
RunRecord read_run_record(const std::filesystem::path& file);

struct SummaryRow {
  int iteration = 0;
  double n_evals_hf = 0;  // median cumulative evaluations at this iteration
  double n_evals_lf = 0;
  double median = std::numeric_limits<double>::quiet_NaN();
  double q25 = std::numeric_limits<double>::quiet_NaN();
  double q75 = std::numeric_limits<double>::quiet_NaN();
};

/// Linear-interpolation quantile of the values (NaN entries are skipped;
/// all-NaN yields NaN).
double quantile(std::vector<double> values, double p);

/// Best-feasible-so-far statistics per iteration across records.
std::vector<SummaryRow> aggregate_records(const std::vector<RunRecord>& records);

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& file);

/// Expands a glob pattern whose final component may contain '*' and '?'.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

}  // namespace rpnbo

#endif
