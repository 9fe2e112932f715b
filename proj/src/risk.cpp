/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "derisk/risk.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace derisk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogFloor = 1e-300;

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

// d/dq [ q f(t/q) ] expressed through the ratio r = t/q:  f(r) - r f'(r).
// Closed per-kind forms avoid the cancellation of computing f and f'
// separately at extreme ratios; r = 0 reproduces f(0).
double generator_gradient_term(const DivergenceSpec& spec, double r) {
  switch (spec.kind()) {
    case DivergenceKind::KL:
      return -r;
    case DivergenceKind::TotalVariation:
      if (r == 1.0) return 0.0;
      return r > 1.0 ? -0.5 : 0.5;
    case DivergenceKind::ChiSquared:
      return 1.0 - r * r;
    case DivergenceKind::Power: {
      double p = spec.power_exponent();
      return (1.0 - p) * std::pow(r, p) - 1.0;
    }
    case DivergenceKind::JensenShannon:
      return safe_log(2.0 / (1.0 + r));
    case DivergenceKind::LeCam: {
      double u = 1.0 + r;
      return (1.0 - r) * (1.0 + 3.0 * r) / (2.0 * u * u);
    }
    case DivergenceKind::Renyi:
      throw std::logic_error("no generator gradient for Renyi");
  }
  throw std::logic_error("unreachable");
}

}  // namespace

LabelAssignment LabelAssignment::hard(Eigen::Index cls) {
  if (cls < 0) throw std::invalid_argument("hard label class must be >= 0");
  return {cls, {}};
}

LabelAssignment LabelAssignment::soft(Eigen::VectorXd probs) {
  if ((probs.array() < 0.0).any()) throw std::invalid_argument("soft label entries must be >= 0");
  if (std::abs(probs.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("soft label entries must sum to 1 within 1e-9");
  return {-1, std::move(probs)};
}

Eigen::Index LabelAssignment::hard_class() const {
  if (!is_hard()) throw std::logic_error("not a hard label");
  return cls_;
}

const Eigen::VectorXd& LabelAssignment::soft_probs() const {
  if (is_hard()) throw std::logic_error("not a soft label");
  return soft_;
}

double LabelAssignment::prob(Eigen::Index cls, Eigen::Index k) const {
  if (is_hard()) {
    if (cls_ >= k) throw std::invalid_argument("hard label class out of range");
    return cls == cls_ ? 1.0 : 0.0;
  }
  if (soft_.size() != k) throw std::invalid_argument("soft label dimension mismatch");
  return soft_[cls];
}

Eigen::VectorXd LabelAssignment::dense(Eigen::Index k) const {
  if (is_hard()) {
    if (cls_ >= k) throw std::invalid_argument("hard label class out of range");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
    v[cls_] = 1.0;
    return v;
  }
  if (soft_.size() != k) throw std::invalid_argument("soft label dimension mismatch");
  return soft_;
}

void WeightedBatch::validate() const {
  if (static_cast<Eigen::Index>(targets.size()) != rows() || weights.size() != rows())
    throw std::invalid_argument("batch rows, targets and weights must have equal length");
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("batch weights must be >= 0");
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("batch weights must sum to 1 within 1e-9");
}

WeightedBatch make_uniform_batch(Eigen::MatrixXd predictions, std::vector<LabelAssignment> targets) {
  Eigen::Index n = predictions.rows();
  if (n == 0) throw std::invalid_argument("empty batch");
  WeightedBatch b{std::move(predictions), std::move(targets),
                  Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
  b.validate();
  return b;
}

WeightedBatch make_ssl_batch(const Eigen::MatrixXd& labeled_predictions,
                             const std::vector<LabelAssignment>& labeled_targets,
                             const Eigen::MatrixXd& pseudo_predictions,
                             const std::vector<LabelAssignment>& pseudo_targets, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  Eigen::Index n = labeled_predictions.rows();
  Eigen::Index m = pseudo_predictions.rows();
  if (n == 0) throw std::invalid_argument("labeled block must be nonempty");
  if (m == 0) return make_uniform_batch(labeled_predictions, labeled_targets);  // beta = 1 fallback

  if (labeled_predictions.cols() != pseudo_predictions.cols())
    throw std::invalid_argument("labeled and pseudo class counts differ");
  WeightedBatch b;
  b.predictions.resize(n + m, labeled_predictions.cols());
  b.predictions.topRows(n) = labeled_predictions;
  b.predictions.bottomRows(m) = pseudo_predictions;
  b.targets = labeled_targets;
  b.targets.insert(b.targets.end(), pseudo_targets.begin(), pseudo_targets.end());
  b.weights.resize(n + m);
  b.weights.head(n).setConstant(beta / static_cast<double>(n));
  b.weights.tail(m).setConstant((1.0 - beta) / static_cast<double>(m));
  b.validate();
  return b;
}

Eigen::VectorXd joint_vector(const std::vector<LabelAssignment>& targets,
                             const Eigen::Ref<const Eigen::VectorXd>& weights, Eigen::Index k) {
  Eigen::Index n = static_cast<Eigen::Index>(targets.size());
  if (weights.size() != n) throw std::invalid_argument("joint_vector: size mismatch");
  Eigen::VectorXd joint(n * k);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index i = 0; i < k; ++i) joint[r * k + i] = weights[r] * targets[r].prob(i, k);
  return joint;
}

Eigen::VectorXd joint_vector(const Eigen::Ref<const Eigen::MatrixXd>& predictions,
                             const Eigen::Ref<const Eigen::VectorXd>& weights) {
  Eigen::Index n = predictions.rows(), k = predictions.cols();
  if (weights.size() != n) throw std::invalid_argument("joint_vector: size mismatch");
  Eigen::VectorXd joint(n * k);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index i = 0; i < k; ++i) joint[r * k + i] = weights[r] * predictions(r, i);
  return joint;
}

double der(const DivergenceSpec& spec, const WeightedBatch& batch) {
  batch.validate();
  Eigen::Index k = batch.classes();
  if (spec.is_f_divergence()) {
    // The mixture weights cancel inside the generator, so the joint
    // divergence decomposes into a weighted sum of per-row divergences.
    double f0 = generator_at_zero(spec);
    double limit_slope = generator_limit_slope(spec);
    double acc = 0.0;
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
      double w = batch.weights[r];
      if (w == 0.0) continue;
      for (Eigen::Index i = 0; i < k; ++i) {
        double t = batch.targets[r].prob(i, k);
        double q = batch.predictions(r, i);
        if (q > 0.0) {
          acc += t == 0.0 ? w * q * f0 : w * q * generator_value(spec, t / q);
        } else if (t > 0.0) {
          if (std::isinf(limit_slope)) return kInf;
          acc += w * t * limit_slope;
        }
      }
    }
    return acc;
  }
  // Renyi: joint log-sum form, (w t)^a (w q)^{1-a} = w t^a q^{1-a}.
  double alpha = spec.alpha();
  double max_term = -kInf;
  std::vector<double> terms;
  terms.reserve(batch.rows() * k);
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    double w = batch.weights[r];
    if (w == 0.0) continue;
    for (Eigen::Index i = 0; i < k; ++i) {
      double t = batch.targets[r].prob(i, k);
      if (t == 0.0) continue;
      double q = batch.predictions(r, i);
      if (q == 0.0) {
        if (alpha > 1.0) return kInf;
        continue;
      }
      double ell = safe_log(w) + alpha * safe_log(t) + (1.0 - alpha) * safe_log(q);
      terms.push_back(ell);
      max_term = std::max(max_term, ell);
    }
  }
  if (terms.empty()) return kInf;
  double sum = 0.0;
  for (double ell : terms) sum += std::exp(ell - max_term);
  return (max_term + std::log(sum)) / (alpha - 1.0);
}

double der_sl(const DivergenceSpec& spec, const Eigen::MatrixXd& predictions,
              const std::vector<LabelAssignment>& targets) {
  return der(spec, make_uniform_batch(predictions, targets));
}

double der_ssl(const DivergenceSpec& spec, const Eigen::MatrixXd& labeled_predictions,
               const std::vector<LabelAssignment>& labeled_targets,
               const Eigen::MatrixXd& pseudo_predictions,
               const std::vector<LabelAssignment>& pseudo_targets, double beta) {
  return der(spec, make_ssl_batch(labeled_predictions, labeled_targets, pseudo_predictions,
                                  pseudo_targets, beta));
}

double der_closed_form(const DivergenceSpec& spec,
                       const Eigen::Ref<const Eigen::VectorXd>& true_class_probs) {
  Eigen::Index n = true_class_probs.size();
  if (n == 0) throw std::invalid_argument("empty batch");
  const auto& P = true_class_probs.array();
  if ((P <= 0.0).any() && spec.kind() != DivergenceKind::TotalVariation &&
      spec.kind() != DivergenceKind::JensenShannon && spec.kind() != DivergenceKind::LeCam)
    return kInf;
  switch (spec.kind()) {
    case DivergenceKind::KL:
      return -P.log().mean();
    case DivergenceKind::TotalVariation:
      return (1.0 - P).mean();
    case DivergenceKind::ChiSquared:
      return (P.inverse() - 1.0).mean();
    case DivergenceKind::Power:
      return (P.pow(1.0 - spec.power_exponent()) - 1.0).mean();
    case DivergenceKind::JensenShannon:
      // per-sample: P log P - (1+P) log(1+P) + 2 log 2
      return (P * P.log() - (1.0 + P) * (1.0 + P).log()).mean() + 2.0 * std::log(2.0);
    case DivergenceKind::LeCam:
      return ((1.0 - P) * (1.0 - P / (1.0 + P))).mean();
    case DivergenceKind::Renyi: {
      double alpha = spec.alpha();
      return std::log(P.pow(1.0 - alpha).mean()) / (alpha - 1.0);
    }
  }
  throw std::logic_error("unreachable");
}

Categorical mean_prediction(const Eigen::Ref<const Eigen::MatrixXd>& predictions) {
  if (predictions.rows() == 0) throw std::invalid_argument("mean_prediction: empty list");
  return Categorical(predictions.colwise().mean());
}

double mean_d_entropy(const DivergenceSpec& spec,
                      const Eigen::Ref<const Eigen::MatrixXd>& predictions) {
  if (predictions.rows() == 0) throw std::invalid_argument("mean_d_entropy: empty list");
  double acc = 0.0;
  for (Eigen::Index r = 0; r < predictions.rows(); ++r)
    acc += d_entropy(spec, predictions.row(r).transpose());
  return acc / static_cast<double>(predictions.rows());
}

double regularized_risk(const DivergenceSpec& spec, const DivergenceSpec& reg_spec,
                        const WeightedBatch& labeled,
                        const Eigen::Ref<const Eigen::MatrixXd>& unlabeled_predictions,
                        const RegularizationWeights& reg) {
  double value = der(spec, labeled);
  if (unlabeled_predictions.rows() == 0) return value;
  if (reg.lambda_h != 0.0) value += reg.lambda_h * mean_d_entropy(reg_spec, unlabeled_predictions);
  if (reg.lambda_u != 0.0) {
    Categorical mean = mean_prediction(unlabeled_predictions);
    value += reg.lambda_u * divergence(reg_spec, mean, Categorical::uniform(mean.size()));
  }
  return value;
}

double regularized_risk(const DivergenceSpec& spec, const WeightedBatch& labeled,
                        const Eigen::Ref<const Eigen::MatrixXd>& unlabeled_predictions,
                        const RegularizationWeights& reg) {
  return regularized_risk(spec, spec, labeled, unlabeled_predictions, reg);
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  Eigen::VectorXd shifted = (logits.array() - logits.maxCoeff()).exp();
  return shifted / shifted.sum();
}

Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::ArrayXd shifted = (logits.row(r).array() - logits.row(r).maxCoeff()).exp();
    out.row(r) = shifted / shifted.sum();
  }
  return out;
}

ObjectiveResult der_objective(const DivergenceSpec& spec, const DivergenceSpec& reg_spec,
                              const Eigen::Ref<const Eigen::MatrixXd>& logits,
                              const std::vector<LabelAssignment>& targets,
                              const Eigen::Ref<const Eigen::VectorXd>& weights,
                              const std::vector<Eigen::Index>& regularized_rows,
                              const RegularizationWeights& reg) {
  const Eigen::Index rows = logits.rows(), k = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != rows || weights.size() != rows)
    throw std::invalid_argument("der_objective: size mismatch");
  if (!logits.allFinite()) throw std::invalid_argument("der_objective: non-finite logits");
  double wsum = weights.sum();
  if (wsum != 0.0 && std::abs(wsum - 1.0) > 1e-6)
    throw std::invalid_argument("der_objective: weights must sum to 1 (or all be 0)");

  ObjectiveResult res;
  res.dlogits = Eigen::MatrixXd::Zero(rows, k);
  Eigen::MatrixXd Q = softmax_rows(logits);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows, k);  // d(objective)/d(softmax probs)

  // --- DER term ---
  if (wsum > 0.0) {
    if (spec.is_f_divergence()) {
      double limit_slope = generator_limit_slope(spec);
      for (Eigen::Index r = 0; r < rows; ++r) {
        double w = weights[r];
        if (w == 0.0) continue;
        for (Eigen::Index i = 0; i < k; ++i) {
          double t = targets[r].prob(i, k);
          double q = Q(r, i);
          double ratio = t / std::max(q, kLogFloor);
          if (q > 0.0) {
            res.der_term += t == 0.0 ? w * q * generator_at_zero(spec)
                                     : w * q * generator_value(spec, ratio);
          } else if (t > 0.0) {
            // softmax underflow; infinite for generators with unbounded slope
            if (std::isinf(limit_slope)) {
              res.value = kInf;
              res.der_term = kInf;
              res.infinite_row = r;
              return res;
            }
            res.der_term += w * t * limit_slope;
          }
          G(r, i) += w * generator_gradient_term(spec, ratio);
        }
        if (!std::isfinite(res.der_term)) {
          res.value = kInf;
          res.der_term = kInf;
          res.infinite_row = r;
          return res;
        }
      }
    } else {
      const double alpha = spec.alpha();
      double max_term = -kInf;
      // log-domain joint sum; remember (row, class, log-term) for the ratios
      std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> entries;
      entries.reserve(rows * 2);
      for (Eigen::Index r = 0; r < rows; ++r) {
        double w = weights[r];
        if (w == 0.0) continue;
        for (Eigen::Index i = 0; i < k; ++i) {
          double t = targets[r].prob(i, k);
          if (t == 0.0) continue;
          double q = Q(r, i);
          if (q == 0.0 && alpha > 1.0) {
            res.value = kInf;
            res.der_term = kInf;
            res.infinite_row = r;
            return res;
          }
          double ell = safe_log(w) + alpha * safe_log(t) + (1.0 - alpha) * safe_log(q);
          entries.emplace_back(r, i, ell);
          max_term = std::max(max_term, ell);
        }
      }
      if (entries.empty()) {  // disjoint support after softmax underflow
        res.value = kInf;
        res.der_term = kInf;
        return res;
      }
      double sum = 0.0;
      for (auto& [r, i, ell] : entries) sum += std::exp(ell - max_term);
      double log_sum = max_term + std::log(sum);
      res.der_term = log_sum / (alpha - 1.0);
      for (auto& [r, i, ell] : entries) {
        double ratio = std::exp(ell - log_sum);
        G(r, i) += -ratio / std::max(Q(r, i), kLogFloor);
      }
    }
  }

  // --- regularizers over the unlabeled rows ---
  if (!regularized_rows.empty() && (reg.lambda_h != 0.0 || reg.lambda_u != 0.0)) {
    const double m = static_cast<double>(regularized_rows.size());
    const double kd = static_cast<double>(k);

    if (reg.lambda_h != 0.0) {
      double h_acc = 0.0;
      for (Eigen::Index r : regularized_rows) {
        if (reg_spec.is_f_divergence()) {
          double div = 0.0;
          for (Eigen::Index i = 0; i < k; ++i) {
            double q = Q(r, i);
            div += generator_value(reg_spec, kd * q) / kd;
            G(r, i) += reg.lambda_h / m * (-generator_slope(reg_spec, kd * q));
          }
          h_acc += -div;
        } else {
          double a = reg_spec.alpha();
          double s = Q.row(r).array().pow(a).sum();
          h_acc += -(std::log(kd) + safe_log(s) / (a - 1.0));
          for (Eigen::Index i = 0; i < k; ++i)
            G(r, i) += reg.lambda_h / m *
                       (-(a / (a - 1.0)) * std::pow(std::max(Q(r, i), kLogFloor), a - 1.0) / s);
        }
      }
      res.entropy_term = reg.lambda_h * h_acc / m;
    }

    if (reg.lambda_u != 0.0) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
      for (Eigen::Index r : regularized_rows) mean += Q.row(r).transpose();
      mean /= m;
      Eigen::VectorXd dmean(k);
      double v = 0.0;
      if (reg_spec.is_f_divergence()) {
        for (Eigen::Index i = 0; i < k; ++i) {
          v += generator_value(reg_spec, kd * mean[i]) / kd;
          dmean[i] = generator_slope(reg_spec, kd * mean[i]);
        }
      } else {
        double a = reg_spec.alpha();
        double s = mean.array().pow(a).sum();
        v = std::log(kd) + safe_log(s) / (a - 1.0);
        for (Eigen::Index i = 0; i < k; ++i)
          dmean[i] = (a / (a - 1.0)) * std::pow(std::max(mean[i], kLogFloor), a - 1.0) / s;
      }
      res.mean_pred_term = reg.lambda_u * v;
      for (Eigen::Index r : regularized_rows)
        G.row(r) += (reg.lambda_u / m) * dmean.transpose();
    }
  }

  res.value = res.der_term + res.entropy_term + res.mean_pred_term;

  // chain rule through the row-wise softmax: dz_j = q_j (G_j - <G, q>)
  for (Eigen::Index r = 0; r < rows; ++r) {
    double dot = G.row(r).dot(Q.row(r));
    res.dlogits.row(r) = Q.row(r).array() * (G.row(r).array() - dot);
  }
  if (!res.dlogits.allFinite()) {
    // gradient overflow (e.g. chi^2 ratios beyond double range): surface as
    // the Infinite outcome so training aborts with a diagnostic
    res.value = kInf;
    for (Eigen::Index r = 0; r < rows && res.infinite_row < 0; ++r)
      if (!res.dlogits.row(r).allFinite()) res.infinite_row = r;
  }
  return res;
}

ObjectiveResult der_objective(const DivergenceSpec& spec,
                              const Eigen::Ref<const Eigen::MatrixXd>& logits,
                              const std::vector<LabelAssignment>& targets,
                              const Eigen::Ref<const Eigen::VectorXd>& weights,
                              const std::vector<Eigen::Index>& regularized_rows,
                              const RegularizationWeights& reg) {
  return der_objective(spec, spec, logits, targets, weights, regularized_rows, reg);
}

}  // namespace derisk
