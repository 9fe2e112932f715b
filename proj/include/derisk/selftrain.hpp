/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "derisk/data.hpp"
#include "derisk/model.hpp"

namespace derisk {

/// The pseudo-label gate: keep a sample iff its max-class probability is at
/// least tau_p and, when use_uncertainty is set, its MC-dropout uncertainty
/// is at most kappa_p.
struct SelectionThresholds {
  double tau_p = 0.7;
  double kappa_p = 0.005;
  bool use_uncertainty = false;
};

struct PseudoLabel {
  Eigen::Index pool_index;  // row in the unlabeled pool
  Eigen::Index cls;         // argmax class
  double confidence;        // Q(j), the max-class probability
  double uncertainty;       // U(Q(j)); 0 when the gate is confidence-only
  int iteration;            // provenance
};

/// At most one entry per pool index, kept sorted by pool index.
struct PseudoLabeledSet {
  std::vector<PseudoLabel> entries;

  Eigen::Index size() const { return static_cast<Eigen::Index>(entries.size()); }
  bool empty() const { return entries.empty(); }
  std::vector<Eigen::Index> class_counts(Eigen::Index k) const;
};

/// Runs the gate over every row of the pool. Deterministic given the seed
/// (which drives the MC-dropout passes).
PseudoLabeledSet select_pseudo_labels(const ClassifierModel& model,
                                      const Eigen::Ref<const Eigen::MatrixXd>& pool,
                                      const SelectionThresholds& thresholds, int mc_passes,
                                      std::uint64_t seed, int iteration);

/// Under-samples every represented class down to the minimum represented
/// class count, uniformly without replacement; deterministic given the seed.
PseudoLabeledSet balance(const PseudoLabeledSet& set, Eigen::Index k, std::uint64_t seed);

/// Union with newest-wins replacement: a re-selected pool index takes the
/// fresh label and drops the old entry.
void merge_replacing(PseudoLabeledSet& accumulated, const PseudoLabeledSet& fresh);

/// Flips each hard label to a uniformly random *different* class with
/// probability `rate`; deterministic given the seed.
std::vector<Eigen::Index> inject_label_noise(std::vector<Eigen::Index> labels, double rate,
                                             Eigen::Index k, std::uint64_t seed);

struct SelfTrainConfig {
  int max_iterations = 5;  // includes the warm-up as iteration 1
  SelectionThresholds thresholds;
  std::optional<double> beta;  // empty: beta = n / (n + |pseudo set|)
  ObjectiveSpec objective;     // divergence, optional separate regularizer spec, lambdas
  int epochs_per_iteration = 64;
  int batch_size = 512;
  SgdOptions sgd;
  Eigen::Index hidden = 128;
  double model_dropout = 0.1;
  int mc_passes = 10;
  bool balance_enabled = true;
  std::uint64_t seed = 1;
};

struct IterationRecord {
  int iteration = 0;
  Eigen::Index selected_before_balance = 0;  // |pseudo set| after accumulation
  Eigen::Index selected_after_balance = 0;
  double pseudo_precision = std::numeric_limits<double>::quiet_NaN();
  double train_accuracy = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();  // final-epoch mean
  bool labeled_only_fallback = false;  // empty pseudo set; trained on labeled rows alone
};

/// Evaluation hooks. The loops never see test data or unlabeled true labels;
/// the harness supplies accuracy / precision oracles through these.
struct SelfTrainHooks {
  std::function<double(const ClassifierModel&)> train_accuracy;
  std::function<double(const ClassifierModel&)> test_accuracy;
  std::function<double(const PseudoLabeledSet&)> pseudo_precision;
  std::function<void(const IterationRecord&)> on_iteration;
};

struct SelfTrainResult {
  ClassifierModel model;
  std::vector<IterationRecord> iterations;
};

/// Pseudo-labeling self-training: warm-up on labeled rows, then per
/// iteration select over the whole pool, accumulate (newest label wins),
/// re-initialize the model, balance, and retrain on the beta-mixture of
/// labeled and pseudo-labeled rows.
SelfTrainResult dp_ssl(const SslDataset::LabeledView& labeled,
                       const SslDataset::UnlabeledView& unlabeled, const SelfTrainConfig& config,
                       const SelfTrainHooks& hooks = {});

/// Entropy-minimization self-training: warm-up, then per iteration the
/// previous model's Eval predictions become soft labels for every unlabeled
/// row (no gate, no balancing) and training adds the D-entropy and
/// mean-prediction regularizers.
SelfTrainResult dem_ssl(const SslDataset::LabeledView& labeled,
                        const SslDataset::UnlabeledView& unlabeled, const SelfTrainConfig& config,
                        const SelfTrainHooks& hooks = {});

/// Supervised baseline with the same budget as one warm-up.
SelfTrainResult sl_train(const SslDataset::LabeledView& labeled, const SelfTrainConfig& config,
                         const SelfTrainHooks& hooks = {});

}  // namespace derisk
