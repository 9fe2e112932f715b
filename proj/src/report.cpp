/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "derisk/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace derisk {

namespace {

// generator-table row order, then scenario column order
int divergence_rank(const std::string& name) {
  static const std::vector<std::string> order = {"kl", "tv", "chi2", "power", "js", "lecam", "renyi"};
  for (std::size_t i = 0; i < order.size(); ++i)
    if (name.rfind(order[i], 0) == 0) return static_cast<int>(i);
  return static_cast<int>(order.size());
}

int scenario_rank(const std::string& name) {
  static const std::vector<std::string> order = {"sl", "dp-ssl", "dem-ssl", "fsl"};
  for (std::size_t i = 0; i < order.size(); ++i)
    if (name == order[i]) return static_cast<int>(i);
  return static_cast<int>(order.size());
}

}  // namespace

std::vector<SummaryCell> summarize_runs(const std::vector<nlohmann::json>& lines) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& line : lines) {
    if (!line.contains("type") || line.at("type") != "run_summary") continue;
    if (!line.contains("final_test_accuracy") || line.at("final_test_accuracy").is_null()) continue;
    groups[{line.at("divergence").get<std::string>(), line.at("scenario").get<std::string>()}]
        .push_back(line.at("final_test_accuracy").get<double>() * 100.0);
  }
  if (groups.empty()) throw std::runtime_error("no run_summary records found");
  std::vector<SummaryCell> cells;
  for (auto& [key, values] : groups) {
    SummaryCell cell;
    cell.divergence = key.first;
    cell.scenario = key.second;
    cell.count = static_cast<int>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.size();
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    cell.mean = mean;
    cell.stddev = values.size() > 1 ? std::sqrt(var / (values.size() - 1)) : 0.0;
    cells.push_back(cell);
  }
  std::sort(cells.begin(), cells.end(), [](const SummaryCell& a, const SummaryCell& b) {
    if (divergence_rank(a.divergence) != divergence_rank(b.divergence))
      return divergence_rank(a.divergence) < divergence_rank(b.divergence);
    if (a.divergence != b.divergence) return a.divergence < b.divergence;
    if (scenario_rank(a.scenario) != scenario_rank(b.scenario))
      return scenario_rank(a.scenario) < scenario_rank(b.scenario);
    return a.scenario < b.scenario;
  });
  return cells;
}

std::string format_table(const std::vector<SummaryCell>& cells) {
  std::vector<std::string> rows, cols;
  for (const auto& c : cells) {
    if (std::find(rows.begin(), rows.end(), c.divergence) == rows.end()) rows.push_back(c.divergence);
    if (std::find(cols.begin(), cols.end(), c.scenario) == cols.end()) cols.push_back(c.scenario);
  }
  auto cell_text = [&](const std::string& d, const std::string& s) -> std::string {
    for (const auto& c : cells)
      if (c.divergence == d && c.scenario == s) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f +- %.2f", c.mean, c.stddev);
        return buf;
      }
    return "-";
  };

  std::size_t name_w = 3;
  for (const auto& r : rows) name_w = std::max(name_w, r.size());
  std::size_t cell_w = 14;

  std::ostringstream out;
  out << std::string(name_w, ' ');
  for (const auto& s : cols) {
    out << "  ";
    out << s << std::string(cell_w > s.size() ? cell_w - s.size() : 0, ' ');
  }
  out << "\n";
  for (const auto& d : rows) {
    out << d << std::string(name_w - d.size(), ' ');
    for (const auto& s : cols) {
      std::string text = cell_text(d, s);
      out << "  " << text << std::string(cell_w > text.size() ? cell_w - text.size() : 0, ' ');
    }
    out << "\n";
  }
  return out.str();
}

std::string format_csv(const std::vector<SummaryCell>& cells) {
  std::ostringstream out;
  out << "divergence,scenario,seeds,mean,std\n";
  char buf[128];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.17g,%.17g\n", c.divergence.c_str(),
                  c.scenario.c_str(), c.count, c.mean, c.stddev);
    out << buf;
  }
  return out.str();
}

}  // namespace derisk
