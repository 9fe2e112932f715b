/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace derisk {

/// mean +- std cells keyed by (divergence row, scenario column).
struct SummaryCell {
  std::string divergence;
  std::string scenario;
  int count = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Aggregates run_summary JSONL lines (final test accuracy, in percent).
std::vector<SummaryCell> summarize_runs(const std::vector<nlohmann::json>& lines);

/// Aligned text table: one row per divergence (generator-table order), one
/// column per scenario, cells "mean +- std".
std::string format_table(const std::vector<SummaryCell>& cells);

/// Deterministic CSV (max-precision doubles; reparsing yields bit-identical
/// values): divergence,scenario,seeds,mean,std.
std::string format_csv(const std::vector<SummaryCell>& cells);

}  // namespace derisk
