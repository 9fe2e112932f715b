/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "derisk/divergence.hpp"

namespace derisk {

/// Per-sample target distribution over k classes: Hard(class index), which is
/// semantically the one-hot distribution, or Soft(probability vector).
class LabelAssignment {
 public:
  static LabelAssignment hard(Eigen::Index cls);
  static LabelAssignment soft(Eigen::VectorXd probs);  // entries must sum to 1 within 1e-9

  bool is_hard() const { return cls_ >= 0; }
  Eigen::Index hard_class() const;
  const Eigen::VectorXd& soft_probs() const;

  /// Target probability of class `cls` in a k-class problem.
  double prob(Eigen::Index cls, Eigen::Index k) const;
  Eigen::VectorXd dense(Eigen::Index k) const;

 private:
  LabelAssignment(Eigen::Index cls, Eigen::VectorXd soft) : cls_(cls), soft_(std::move(soft)) {}
  Eigen::Index cls_ = -1;  // >= 0 for hard labels
  Eigen::VectorXd soft_;
};

/// A weighted collection of (prediction, target) rows. Predictions are model
/// softmax outputs, one distribution per row; weights are the mixture weights
/// of the empirical joint and must sum to 1 within 1e-9 (individual rows may
/// carry weight 0).
struct WeightedBatch {
  Eigen::MatrixXd predictions;           // rows x k
  std::vector<LabelAssignment> targets;  // size rows
  Eigen::VectorXd weights;               // size rows

  Eigen::Index rows() const { return predictions.rows(); }
  Eigen::Index classes() const { return predictions.cols(); }
  void validate() const;
};

WeightedBatch make_uniform_batch(Eigen::MatrixXd predictions, std::vector<LabelAssignment> targets);

/// The beta-mixture batch of the SSL joints: weight beta/n on each labeled
/// row and (1-beta)/m on each pseudo row. An empty pseudo block falls back to
/// beta = 1 (labeled rows only).
WeightedBatch make_ssl_batch(const Eigen::MatrixXd& labeled_predictions,
                             const std::vector<LabelAssignment>& labeled_targets,
                             const Eigen::MatrixXd& pseudo_predictions,
                             const std::vector<LabelAssignment>& pseudo_targets, double beta);

/// Flattens weighted targets into the empirical joint distribution over
/// rows x classes outcomes: entry (r, i) = w_r * target_r(i).
Eigen::VectorXd joint_vector(const std::vector<LabelAssignment>& targets,
                             const Eigen::Ref<const Eigen::VectorXd>& weights, Eigen::Index k);

/// Same flattening for the prediction side: entry (r, i) = w_r * pred(r, i).
Eigen::VectorXd joint_vector(const Eigen::Ref<const Eigen::MatrixXd>& predictions,
                             const Eigen::Ref<const Eigen::VectorXd>& weights);

/// Divergence-based empirical risk: D(joint targets || joint predictions).
/// f-divergences decompose across rows (the mixture weights cancel inside
/// the generator), Renyi is evaluated through its joint log-sum form.
/// Returns +infinity when the divergence is infinite.
double der(const DivergenceSpec& spec, const WeightedBatch& batch);

double der_sl(const DivergenceSpec& spec, const Eigen::MatrixXd& predictions,
              const std::vector<LabelAssignment>& targets);

double der_ssl(const DivergenceSpec& spec, const Eigen::MatrixXd& labeled_predictions,
               const std::vector<LabelAssignment>& labeled_targets,
               const Eigen::MatrixXd& pseudo_predictions,
               const std::vector<LabelAssignment>& pseudo_targets, double beta);

/// Table-1 closed forms for hard-label batches with uniform weights;
/// true_class_probs[i] is the predicted probability of sample i's true class.
double der_closed_form(const DivergenceSpec& spec,
                       const Eigen::Ref<const Eigen::VectorXd>& true_class_probs);

/// Coordinate-wise average of softmax outputs.
Categorical mean_prediction(const Eigen::Ref<const Eigen::MatrixXd>& predictions);

/// (1/m) sum_j H_D(prediction row j); the entropy regularizer of the
/// entropy-minimization objective.
double mean_d_entropy(const DivergenceSpec& spec,
                      const Eigen::Ref<const Eigen::MatrixXd>& predictions);

struct RegularizationWeights {
  double lambda_h = 0.0;
  double lambda_u = 0.0;
};

/// der(labeled) + lambda_h * mean_d_entropy(unlabeled) +
/// lambda_u * D(mean_prediction(unlabeled) || Unif(k)).  The labeled-term
/// divergence and the regularizer divergence are independently configurable;
/// the single-spec overload uses the same spec for both. Empty unlabeled
/// block contributes nothing.
double regularized_risk(const DivergenceSpec& spec, const DivergenceSpec& reg_spec,
                        const WeightedBatch& labeled,
                        const Eigen::Ref<const Eigen::MatrixXd>& unlabeled_predictions,
                        const RegularizationWeights& reg);

double regularized_risk(const DivergenceSpec& spec, const WeightedBatch& labeled,
                        const Eigen::Ref<const Eigen::MatrixXd>& unlabeled_predictions,
                        const RegularizationWeights& reg);

/// Full training objective evaluated from logits:
///   DER(softmax(logits), targets, weights)
///   + lambda_h * (1/|U|) sum_{r in U} H_D'(softmax(logits_r))
///   + lambda_u * D'(mean_{r in U} softmax(logits_r) || Unif(k))
/// where U = regularized_rows. Returns the value, its three components and
/// the exact gradient with respect to every logit.
struct ObjectiveResult {
  double value = 0.0;
  double der_term = 0.0;
  double entropy_term = 0.0;      // lambda_h included
  double mean_pred_term = 0.0;    // lambda_u included
  Eigen::MatrixXd dlogits;        // rows x k
  Eigen::Index infinite_row = -1; // first row that drove the value to +inf, if any
};

ObjectiveResult der_objective(const DivergenceSpec& spec, const DivergenceSpec& reg_spec,
                              const Eigen::Ref<const Eigen::MatrixXd>& logits,
                              const std::vector<LabelAssignment>& targets,
                              const Eigen::Ref<const Eigen::VectorXd>& weights,
                              const std::vector<Eigen::Index>& regularized_rows,
                              const RegularizationWeights& reg);

ObjectiveResult der_objective(const DivergenceSpec& spec,
                              const Eigen::Ref<const Eigen::MatrixXd>& logits,
                              const std::vector<LabelAssignment>& targets,
                              const Eigen::Ref<const Eigen::VectorXd>& weights,
                              const std::vector<Eigen::Index>& regularized_rows = {},
                              const RegularizationWeights& reg = {});

/// Numerically stable row-wise softmax.
Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& logits);
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

}  // namespace derisk
