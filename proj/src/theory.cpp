/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "derisk/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "derisk/random.hpp"
#include "derisk/selftrain.hpp"

namespace derisk {

std::array<MetricPair, 3> metric_pairs() {
  return {MetricPair{DivergenceSpec::total_variation(), MetricTransform::Identity, "tv/identity"},
          MetricPair{DivergenceSpec::jensen_shannon(), MetricTransform::Sqrt, "js/sqrt"},
          MetricPair{DivergenceSpec::le_cam(), MetricTransform::Sqrt, "lecam/sqrt"}};
}

AxiomReport check_metric_axioms(const DivergenceSpec& spec, MetricTransform transform, int trials,
                                Eigen::Index k, std::uint64_t seed) {
  AxiomReport report;
  report.pair_name = spec.name();
  report.trials = trials;
  report.min_triangle_slack = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(derive_seed(seed, "axioms"));
  constexpr double kTol = 1e-9;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd p1 = sample_simplex(k, rng);
    Eigen::VectorXd p2 = sample_simplex(k, rng);
    Eigen::VectorXd p3 = sample_simplex(k, rng);
    double d12 = apply_metric_transform(transform, divergence(spec, p1, p2));
    double d21 = apply_metric_transform(transform, divergence(spec, p2, p1));
    double d13 = apply_metric_transform(transform, divergence(spec, p1, p3));
    double d23 = apply_metric_transform(transform, divergence(spec, p2, p3));
    double gap = std::abs(d12 - d21);
    report.max_symmetry_gap = std::max(report.max_symmetry_gap, gap);
    if (gap > kTol) report.symmetry_violations++;
    double slack = d12 + d23 - d13;
    report.min_triangle_slack = std::min(report.min_triangle_slack, slack);
    if (slack < -kTol) report.triangle_violations++;
  }
  return report;
}

std::vector<LabelAssignment> TheoryInstance::true_assignments() const {
  std::vector<LabelAssignment> out;
  out.reserve(true_labels.size());
  for (Eigen::Index c : true_labels) out.push_back(LabelAssignment::hard(c));
  return out;
}

std::vector<LabelAssignment> TheoryInstance::pseudo_assignments() const {
  std::vector<LabelAssignment> out;
  out.reserve(pseudo_labels.size());
  for (Eigen::Index c : pseudo_labels) out.push_back(LabelAssignment::hard(c));
  return out;
}

TheoryInstance make_theory_instance(Eigen::Index k, Eigen::Index n, Eigen::Index m, double beta,
                                    double noise_rate, std::uint64_t seed) {
  if (k < 2 || n < 1 || m < 1) throw std::invalid_argument("make_theory_instance: bad sizes");
  TheoryInstance inst;
  inst.k = k;
  inst.n = n;
  inst.m = m;
  inst.beta = beta;
  std::mt19937_64 rng(derive_seed(seed, "instance"));
  std::uniform_int_distribution<Eigen::Index> cls(0, k - 1);
  inst.true_labels.reserve(n + m);
  for (Eigen::Index i = 0; i < n + m; ++i) inst.true_labels.push_back(cls(rng));
  // pseudo labels: true labels with the unlabeled block corrupted
  std::vector<Eigen::Index> unlabeled(inst.true_labels.begin() + n, inst.true_labels.end());
  unlabeled = inject_label_noise(std::move(unlabeled), noise_rate, k, derive_seed(seed, "pnoise"));
  inst.pseudo_labels = inst.true_labels;
  std::copy(unlabeled.begin(), unlabeled.end(), inst.pseudo_labels.begin() + n);
  inst.weights.resize(n + m);
  inst.weights.head(n).setConstant(beta / static_cast<double>(n));
  inst.weights.tail(m).setConstant((1.0 - beta) / static_cast<double>(m));
  return inst;
}

namespace {

// Minimizes the DER of `targets` over free per-row logits with momentum
// gradient descent. The theorem holds at any parameter value, so the budget
// only affects how tight the reported bound is.
Eigen::MatrixXd minimize_der_logits(const DivergenceSpec& spec, const TheoryInstance& inst,
                                    const std::vector<LabelAssignment>& targets,
                                    const OptimizationBudget& budget) {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(inst.n + inst.m, inst.k);
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(inst.n + inst.m, inst.k);
  for (int step = 0; step < budget.steps; ++step) {
    ObjectiveResult res = der_objective(spec, logits, targets, inst.weights);
    if (std::isinf(res.value)) break;
    velocity = budget.momentum * velocity + res.dlogits;
    logits -= budget.learning_rate * velocity;
  }
  return logits;
}

}  // namespace

BoundReport check_theorem1(const TheoryInstance& inst, const MetricPair& pair,
                           const OptimizationBudget& budget, double tol) {
  BoundReport report;
  report.pair_name = pair.name;
  auto true_t = inst.true_assignments();
  auto pseudo_t = inst.pseudo_assignments();

  Eigen::MatrixXd logits = minimize_der_logits(pair.spec, inst, pseudo_t, budget);
  Eigen::MatrixXd predictions = softmax_rows(logits);

  // the three joints share the beta-mixture weights
  Eigen::VectorXd joint_true = joint_vector(true_t, inst.weights, inst.k);
  Eigen::VectorXd joint_pseudo = joint_vector(pseudo_t, inst.weights, inst.k);
  Eigen::VectorXd joint_model = joint_vector(predictions, inst.weights);

  report.fsl_risk = apply_metric_transform(pair.transform, divergence(pair.spec, joint_true, joint_model));
  report.ssl_cost = apply_metric_transform(pair.transform, divergence(pair.spec, joint_true, joint_pseudo));
  report.ssl_risk = apply_metric_transform(pair.transform, divergence(pair.spec, joint_pseudo, joint_model));
  report.slack = report.ssl_cost + report.ssl_risk - report.fsl_risk;
  report.holds = report.slack >= -tol;
  return report;
}

Corollary1Report check_corollary1(Eigen::Index k, Eigen::Index n, Eigen::Index m, double beta,
                                  double noise_rate, const MetricPair& pair, int resamples,
                                  const OptimizationBudget& budget, std::uint64_t seed) {
  Corollary1Report report;
  report.pair_name = pair.name;
  report.resamples = resamples;

  Eigen::VectorXd fsl(resamples), rhs(resamples);
  for (int r = 0; r < resamples; ++r) {
    TheoryInstance inst =
        make_theory_instance(k, n, m, beta, noise_rate, derive_seed(seed, "resample", r));
    BoundReport one = check_theorem1(inst, pair, budget, 1e-6);
    // undo the transform: the corollary is stated on the raw risks
    auto untransform = [&](double g) {
      return pair.transform == MetricTransform::Identity ? g : g * g;
    };
    fsl[r] = untransform(one.fsl_risk);
    rhs[r] = 2.0 * untransform(one.ssl_cost) + 2.0 * untransform(one.ssl_risk);
  }
  if (resamples > 0) {
    report.mean_fsl = fsl.mean();
    report.mean_rhs = rhs.mean();
    Eigen::VectorXd diff = rhs - fsl;
    double diff_mean = diff.mean();
    double diff_sd = resamples > 1
                         ? std::sqrt((diff.array() - diff_mean).square().sum() / (resamples - 1))
                         : 0.0;
    double stderr_slack = 3.0 * diff_sd / std::sqrt(static_cast<double>(resamples));
    report.slack = diff_mean + stderr_slack;
    report.holds = report.slack >= -1e-9;
  } else {
    report.holds = true;
  }

  // scalar condition 2 G(t/2) <= G(2t) on a grid over (0, 4]
  report.scalar_max_violation = 0.0;
  for (int i = 1; i <= 400; ++i) {
    double t = static_cast<double>(i) / 100.0;
    double lhs = 2.0 * apply_metric_transform(pair.transform, t / 2.0);
    double rhs_s = apply_metric_transform(pair.transform, 2.0 * t);
    report.scalar_max_violation = std::max(report.scalar_max_violation, lhs - rhs_s);
  }
  report.scalar_holds = report.scalar_max_violation <= 1e-12;
  return report;
}

FinitenessReport check_proposition1(int trials, Eigen::Index k, Eigen::Index n,
                                    std::uint64_t seed) {
  FinitenessReport report;
  report.trials = trials;
  std::mt19937_64 rng(derive_seed(seed, "prop1"));
  std::uniform_int_distribution<Eigen::Index> cls(0, k - 1);

  const std::array<DivergenceSpec, 7> specs = {
      DivergenceSpec::kl(),           DivergenceSpec::total_variation(),
      DivergenceSpec::chi_squared(),  DivergenceSpec::power(1.2),
      DivergenceSpec::jensen_shannon(), DivergenceSpec::le_cam(),
      DivergenceSpec::renyi(0.6)};

  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd preds(n, k);
    std::vector<LabelAssignment> targets;
    for (Eigen::Index r = 0; r < n; ++r) {
      preds.row(r) = sample_simplex(k, rng).transpose();  // strictly positive a.s.
      targets.push_back(LabelAssignment::hard(cls(rng)));
    }
    for (const auto& spec : specs) {
      double value = der_sl(spec, preds, targets);
      if (std::isfinite(value) && value >= 0.0)
        report.finite_and_nonnegative++;
      else
        report.violations++;
    }
    // reverse KL f(t) = -log t has f(0) = +inf: hard labels force the
    // Infinite outcome (the Assumption-1 counterexample)
    auto batch = make_uniform_batch(preds, targets);
    Eigen::VectorXd jp = joint_vector(targets, batch.weights, k);
    Eigen::VectorXd jq = joint_vector(preds, batch.weights);
    double rkl = f_divergence_generic([](double x) { return -std::log(x); },
                                      std::numeric_limits<double>::infinity(),
                                      std::numeric_limits<double>::infinity(), jp, jq);
    if (t == 0) report.reverse_kl_infinite = std::isinf(rkl);
    if (!std::isinf(rkl)) {
      report.reverse_kl_infinite = false;
      report.violations++;
    }
  }
  return report;
}

InequalityReport check_der_inequalities(int trials, Eigen::Index k, Eigen::Index n,
                                        std::uint64_t seed) {
  InequalityReport report;
  report.trials = trials;
  std::mt19937_64 rng(derive_seed(seed, "ineq"));
  std::uniform_int_distribution<Eigen::Index> cls(0, k - 1);
  constexpr double kTol = 1e-9;
  const double two_log2 = 2.0 * std::log(2.0);
  const std::array<double, 5> alpha_grid = {0.3, 0.6, 0.9, 1.5, 2.0};

  auto note = [&](long& counter, double violation) {
    if (violation > kTol) {
      counter++;
      report.max_violation = std::max(report.max_violation, violation);
    }
  };

  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd preds(n, k);
    std::vector<LabelAssignment> targets;
    for (Eigen::Index r = 0; r < n; ++r) {
      preds.row(r) = sample_simplex(k, rng).transpose();
      targets.push_back(LabelAssignment::hard(cls(rng)));
    }
    double r_kl = der_sl(DivergenceSpec::kl(), preds, targets);
    double r_tv = der_sl(DivergenceSpec::total_variation(), preds, targets);
    double r_chi2 = der_sl(DivergenceSpec::chi_squared(), preds, targets);
    double r_js = der_sl(DivergenceSpec::jensen_shannon(), preds, targets);
    double r_lc = der_sl(DivergenceSpec::le_cam(), preds, targets);

    note(report.pinsker_violations, 2.0 * r_tv * r_tv - r_kl);
    note(report.kl_chi2_violations, r_kl - r_chi2);
    note(report.js_lecam_violations, r_js - two_log2 * r_lc);
    note(report.bound_violations, r_tv - 1.0);
    note(report.bound_violations, r_js - two_log2);
    note(report.bound_violations, r_lc - 1.0);

    double prev = -std::numeric_limits<double>::infinity();
    for (double alpha : alpha_grid) {
      double r_a = der_sl(DivergenceSpec::renyi(alpha), preds, targets);
      note(report.renyi_monotone_violations, prev - r_a);
      prev = r_a;
    }
    for (double alpha : {1.0 - 1e-5, 1.0 + 1e-5}) {
      double r_a = der_sl(DivergenceSpec::renyi(alpha), preds, targets);
      note(report.renyi_limit_violations, std::abs(r_a - r_kl) - 1e-3);
    }
  }
  return report;
}

}  // namespace derisk
