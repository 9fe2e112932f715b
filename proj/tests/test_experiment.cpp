#include <doctest.h>

#include <sstream>

#include "derisk/experiment.hpp"
#include "derisk/report.hpp"

using namespace derisk;
using nlohmann::json;

namespace {
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.dataset.synthetic = {4, 3, 120, 0.3, 11};
  cfg.dataset.n_labeled = 12;
  cfg.dataset.n_test = 80;
  cfg.dataset.split_seed = 5;
  cfg.scenario = Scenario::DpSsl;
  cfg.divergence = DivergenceSpec::kl();
  cfg.iterations = 2;
  cfg.epochs = 15;
  cfg.batch_size = 128;
  cfg.hidden = 16;
  cfg.dropout = 0.0;
  cfg.seeds = {1, 2};
  return cfg;
}
}  // namespace

TEST_CASE("config json round trip and validation") {
  auto cfg = tiny_config();
  auto j = cfg.to_json();
  auto back = ExperimentConfig::from_json(j);
  CHECK(back.to_json() == j);

  json bad = j;
  bad["thresholds"]["tau_p"] = 1.5;
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(bad), doctest::Contains("thresholds.tau_p"),
                       std::invalid_argument);
  bad = j;
  bad["iterations"] = 0;
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(bad), doctest::Contains("iterations"),
                       std::invalid_argument);
  bad = j;
  bad["divergence"] = "renyi:1.0";
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), std::invalid_argument);
}

TEST_CASE("config hash is stable under field reordering and sensitive to values") {
  auto cfg = tiny_config();
  std::string h1 = cfg.hash();

  // reordering: parse from a json with keys in a different insertion order
  json reordered;
  auto j = cfg.to_json();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  for (auto it = keys.rbegin(); it != keys.rend(); ++it) reordered[*it] = j.at(*it);
  CHECK(ExperimentConfig::from_json(reordered).hash() == h1);

  auto changed = cfg;
  changed.epochs = 16;
  CHECK(changed.hash() != h1);
  auto changed2 = cfg;
  changed2.thresholds.kappa_p = 0.05;
  CHECK(changed2.hash() != h1);
}

TEST_CASE("scenario names round trip") {
  for (auto s : {Scenario::SL, Scenario::FSL, Scenario::DpSsl, Scenario::DemSsl})
    CHECK(parse_scenario(scenario_name(s)) == s);
  CHECK_THROWS_AS(parse_scenario("nope"), std::invalid_argument);
}

TEST_CASE("dp-ssl with one iteration matches sl run for the same seed") {
  auto cfg = tiny_config();
  cfg.seeds = {3};
  cfg.iterations = 1;
  auto dataset = prepare_dataset(cfg);
  auto dp = run_experiment(cfg, dataset);
  cfg.scenario = Scenario::SL;
  auto sl = run_experiment(cfg, dataset);
  REQUIRE(dp.size() == 1);
  REQUIRE(sl.size() == 1);
  CHECK(dp[0].final_test_accuracy == sl[0].final_test_accuracy);
}

TEST_CASE("jsonl metrics are byte-identical across reruns") {
  auto cfg = tiny_config();
  auto dataset = prepare_dataset(cfg);
  auto once = run_experiment(cfg, dataset);
  auto twice = run_experiment(cfg, dataset);
  std::ostringstream a, b;
  write_jsonl(once, a);
  write_jsonl(twice, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("wall") == std::string::npos);  // wall time stays out of the metrics
}

TEST_CASE("fsl scenario trains on all true labels and beats sl here") {
  auto cfg = tiny_config();
  cfg.seeds = {1};
  cfg.iterations = 1;
  cfg.epochs = 40;
  auto dataset = prepare_dataset(cfg);
  cfg.scenario = Scenario::SL;
  auto sl = run_experiment(cfg, dataset);
  cfg.scenario = Scenario::FSL;
  auto fsl = run_experiment(cfg, dataset);
  CHECK(fsl[0].final_test_accuracy >= sl[0].final_test_accuracy);
}

TEST_CASE("summarize and format tables from jsonl") {
  auto cfg = tiny_config();
  cfg.seeds = {1, 2, 3};
  cfg.scenario = Scenario::SL;
  cfg.iterations = 1;
  auto dataset = prepare_dataset(cfg);
  auto records = run_experiment(cfg, dataset);
  cfg.divergence = DivergenceSpec::jensen_shannon();
  auto js_records = run_experiment(cfg, dataset);
  records.insert(records.end(), js_records.begin(), js_records.end());

  std::ostringstream out;
  write_jsonl(records, out);
  std::istringstream in(out.str());
  auto lines = read_jsonl(in);
  auto cells = summarize_runs(lines);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].divergence == "kl");  // generator-table order
  CHECK(cells[1].divergence == "js");
  CHECK(cells[0].count == 3);

  std::string table = format_table(cells);
  CHECK(table.find("kl") != std::string::npos);
  CHECK(table.find("sl") != std::string::npos);
  CHECK(table.find("+-") != std::string::npos);

  // CSV reparse reproduces the values bit-exactly
  std::string csv = format_csv(cells);
  std::istringstream csv_in(csv);
  std::string header;
  std::getline(csv_in, header);
  CHECK(header == "divergence,scenario,seeds,mean,std");
  for (const auto& cell : cells) {
    std::string line;
    REQUIRE(std::getline(csv_in, line));
    auto last_comma = line.rfind(',');
    auto second_last = line.rfind(',', last_comma - 1);
    double mean = std::stod(line.substr(second_last + 1, last_comma - second_last - 1));
    double sd = std::stod(line.substr(last_comma + 1));
    CHECK(mean == cell.mean);
    CHECK(sd == cell.stddev);
  }
}

TEST_CASE("label noise flows into training") {
  auto cfg = tiny_config();
  cfg.scenario = Scenario::SL;
  cfg.seeds = {1};
  cfg.epochs = 40;
  auto dataset = prepare_dataset(cfg);
  auto clean = run_experiment(cfg, dataset);
  cfg.label_noise_rate = 0.8;
  auto noisy = run_experiment(cfg, dataset);
  CHECK(noisy[0].final_test_accuracy < clean[0].final_test_accuracy);
}

TEST_CASE("imbalanced unlabeled pool configuration") {
  auto cfg = tiny_config();
  cfg.dataset.unlabeled_keep_fraction = {1.0, 0.1, 0.1, 0.1};
  auto dataset = prepare_dataset(cfg);
  CHECK(dataset.unlabeled_count() < 300);
  cfg.dataset.unlabeled_keep_fraction = {1.0, 2.0, 0.1, 0.1};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
