/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "derisk/data.hpp"
#include "derisk/selftrain.hpp"

namespace derisk {

enum class Scenario { SL, FSL, DpSsl, DemSsl };

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);

struct SyntheticParams {
  Eigen::Index k = 26;
  Eigen::Index d = 16;
  Eigen::Index per_class = 770;
  double spread = 0.30;
  std::uint64_t seed = 7;
};

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" or a file path
  SyntheticParams synthetic;
  Eigen::Index n_labeled = 104;
  Eigen::Index n_test = 2000;
  bool stratified = true;
  std::uint64_t split_seed = 7;
  bool normalize = true;
  std::vector<double> unlabeled_keep_fraction;  // empty: balanced pool
};

struct ExperimentConfig {
  DatasetConfig dataset;
  Scenario scenario = Scenario::SL;
  DivergenceSpec divergence = DivergenceSpec::kl();
  std::optional<DivergenceSpec> reg_divergence;  // defaults to `divergence`
  std::optional<double> beta;                    // empty: n / (n + m)
  SelectionThresholds thresholds;
  RegularizationWeights reg{0.4, 0.8};
  Eigen::Index hidden = 128;
  double dropout = 0.1;
  SgdOptions sgd;
  int iterations = 5;
  int epochs = 64;
  int batch_size = 512;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool balance = true;
  int mc_passes = 10;
  double label_noise_rate = 0.0;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;  // canonical (sorted keys via nlohmann)
  std::string hash() const;        // stable under field reordering
  void validate() const;           // throws with the offending field path
};

struct RunRecord {
  std::string config_hash;
  Scenario scenario;
  std::string divergence;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> iterations;
  double final_test_accuracy = 0.0;
  double wall_seconds = 0.0;  // excluded from JSONL
};

/// Builds the split (and normalized) dataset the config describes.
SslDataset prepare_dataset(const ExperimentConfig& config);

/// Runs the configured scenario once per seed.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const SslDataset& dataset);
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

/// One JSON line per iteration plus one run-summary line per seed; values are
/// byte-deterministic for a fixed config and seed (wall time is kept out).
void write_jsonl(const std::vector<RunRecord>& records, std::ostream& out);
std::vector<nlohmann::json> read_jsonl(std::istream& in);

}  // namespace derisk
