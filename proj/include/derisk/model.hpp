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
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "derisk/risk.hpp"

namespace derisk {

/// Two-hidden-layer feedforward softmax classifier: d -> hidden -> hidden -> k
/// with ReLU activations and inverted dropout on both hidden activations.
struct ClassifierModel {
  Eigen::MatrixXd w1, w2, w3;  // hidden x d, hidden x hidden, k x hidden
  Eigen::VectorXd b1, b2, b3;
  double dropout = 0.0;

  Eigen::Index input_dim() const { return w1.cols(); }
  Eigen::Index hidden_dim() const { return w1.rows(); }
  Eigen::Index classes() const { return w3.rows(); }
};

/// Deterministic initialization: weights uniform on [-1/sqrt(fan_in),
/// 1/sqrt(fan_in)], biases zero.
ClassifierModel init_model(Eigen::Index d, Eigen::Index k, Eigen::Index hidden, double dropout,
                           std::uint64_t seed);

enum class ForwardMode { Eval, Train };

/// Batched forward pass; rows of `x` are samples. Train mode draws dropout
/// masks from `rng` (required when dropout > 0).
Eigen::MatrixXd forward_logits(const ClassifierModel& model,
                               const Eigen::Ref<const Eigen::MatrixXd>& x, ForwardMode mode,
                               std::mt19937_64* rng = nullptr);

Eigen::MatrixXd forward_probs(const ClassifierModel& model,
                              const Eigen::Ref<const Eigen::MatrixXd>& x, ForwardMode mode,
                              std::mt19937_64* rng = nullptr);

/// Single-sample forward: (logits, softmax distribution).
std::pair<Eigen::VectorXd, Categorical> forward(const ClassifierModel& model,
                                                const Eigen::Ref<const Eigen::VectorXd>& x,
                                                ForwardMode mode, std::mt19937_64* rng = nullptr);

/// Activations and dropout masks cached for backpropagation.
struct ForwardCache {
  Eigen::MatrixXd input;    // batch x d
  Eigen::MatrixXd z1, h1;   // pre-activation, post-relu+dropout
  Eigen::MatrixXd z2, h2;
  Eigen::MatrixXd mask1, mask2;  // inverted-dropout masks ({0, 1/(1-rate)}); empty in Eval
  Eigen::MatrixXd logits;
};

ForwardCache forward_cached(const ClassifierModel& model,
                            const Eigen::Ref<const Eigen::MatrixXd>& x, ForwardMode mode,
                            std::mt19937_64* rng = nullptr);

struct ModelGradients {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
};

/// Backpropagates d(objective)/d(logits) to parameter gradients.
ModelGradients backward(const ClassifierModel& model, const ForwardCache& cache,
                        const Eigen::Ref<const Eigen::MatrixXd>& dlogits);

struct SgdOptions {
  double learning_rate = 0.03;
  double momentum = 0.9;
  bool nesterov = true;
};

/// SGD with (Nesterov) momentum and a per-epoch cosine-annealed learning
/// rate: lr(e) = lr0 * (1 + cos(pi * e / E)) / 2 over E scheduled epochs.
class SgdOptimizer {
 public:
  SgdOptimizer(const ClassifierModel& shape, SgdOptions options, int scheduled_epochs);

  double epoch_learning_rate(int epoch) const;
  void step(ClassifierModel& model, const ModelGradients& grads, double learning_rate);

 private:
  SgdOptions options_;
  int scheduled_epochs_;
  ModelGradients velocity_;
};

/// The rows a training run sees: features, per-row targets, nonnegative DER
/// weight numerators (renormalized within each mini-batch; rows with weight 0
/// enter only the regularizers), and a flag marking rows that feed the
/// entropy / mean-prediction regularizers.
struct TrainRowSet {
  Eigen::MatrixXd features;
  std::vector<LabelAssignment> targets;
  Eigen::VectorXd der_weight;
  std::vector<char> regularized;  // empty means "no row regularized"

  Eigen::Index rows() const { return features.rows(); }
};

TrainRowSet make_sl_rows(const Eigen::MatrixXd& features, const std::vector<Eigen::Index>& labels);

struct ObjectiveSpec {
  DivergenceSpec spec = DivergenceSpec::kl();
  std::optional<DivergenceSpec> reg_spec;  // defaults to `spec`
  RegularizationWeights reg;

  const DivergenceSpec& regularizer_spec() const { return reg_spec ? *reg_spec : spec; }
};

struct TrainOptions {
  int epochs = 64;
  int batch_size = 512;
  std::uint64_t seed = 1;
  SgdOptions sgd;
};

struct TrainTrace {
  std::vector<double> epoch_objective;  // mean over the epoch's batches
};

/// Thrown when the objective returns the Infinite outcome mid-training.
struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, Eigen::Index row, std::string spec_name)
      : std::runtime_error(what), sample_row(row), spec(std::move(spec_name)) {}
  Eigen::Index sample_row;
  std::string spec;
};

/// Mini-batch training; deterministic given the seed (per-epoch shuffling and
/// dropout masks derive from it). 0 epochs leaves the model untouched.
TrainTrace train_epochs(ClassifierModel& model, const TrainRowSet& data,
                        const ObjectiveSpec& objective, const TrainOptions& options);

/// MC-dropout uncertainty: sample standard deviation of the max-class
/// probability across `passes` dropout-enabled forward passes, clipped to
/// [0, 1]. Requires passes >= 2; dropout = 0 gives 0.
double mc_uncertainty(const ClassifierModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                      int passes, std::uint64_t seed);

/// Batched variant: one value per row of `x`.
Eigen::VectorXd mc_uncertainty_batch(const ClassifierModel& model,
                                     const Eigen::Ref<const Eigen::MatrixXd>& x, int passes,
                                     std::uint64_t seed);

double accuracy(const ClassifierModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const std::vector<Eigen::Index>& labels);

/// Versioned binary checkpoint; round-trips bit-exactly.
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace derisk
