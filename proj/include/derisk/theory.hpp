/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "derisk/risk.hpp"

namespace derisk {

/// The divergence / transform pairs for which G(D_f) is a metric.
struct MetricPair {
  DivergenceSpec spec;
  MetricTransform transform;
  std::string name;
};
std::array<MetricPair, 3> metric_pairs();

struct AxiomReport {
  std::string pair_name;
  int trials = 0;
  long symmetry_violations = 0;
  long triangle_violations = 0;
  double max_symmetry_gap = 0.0;   // max |G(D(p||q)) - G(D(q||p))|
  double min_triangle_slack = 0.0; // min of G(D13) vs G(D12)+G(D23) margin
  bool passed() const { return symmetry_violations == 0 && triangle_violations == 0; }
};

/// Random-triple check of symmetry (tolerance 1e-9) and the triangle
/// inequality (slack >= -1e-9) for G(D(.||.)). Works for any spec; KL with
/// the Identity transform is expected to fail (it is not a metric).
AxiomReport check_metric_axioms(const DivergenceSpec& spec, MetricTransform transform, int trials,
                                Eigen::Index k, std::uint64_t seed);

/// A feature-free bound-checking instance: n labeled + m unlabeled abstract
/// rows with true labels, pseudo labels (true labels corrupted at
/// `noise_rate` on the unlabeled block), and the beta-mixture row weights.
/// Model predictions are parameterized by one free logit vector per row.
struct TheoryInstance {
  Eigen::Index k = 0, n = 0, m = 0;
  double beta = 0.5;
  std::vector<Eigen::Index> true_labels;    // size n + m
  std::vector<Eigen::Index> pseudo_labels;  // size n + m; equals true on the labeled block
  Eigen::VectorXd weights;                  // beta/n and (1-beta)/m blocks

  std::vector<LabelAssignment> true_assignments() const;
  std::vector<LabelAssignment> pseudo_assignments() const;
};

TheoryInstance make_theory_instance(Eigen::Index k, Eigen::Index n, Eigen::Index m, double beta,
                                    double noise_rate, std::uint64_t seed);

struct OptimizationBudget {
  int steps = 400;
  double learning_rate = 2.0;
  double momentum = 0.9;
};

struct BoundReport {
  std::string pair_name;
  double fsl_risk = 0.0;     // G(FSL risk at theta*)
  double ssl_cost = 0.0;     // G(D(P_t || P_hat))
  double ssl_risk = 0.0;     // G(SSL risk at theta*)
  double slack = 0.0;        // rhs - lhs
  bool holds = false;
};

/// Minimizes the SSL DER over free per-row logits (the bound holds for any
/// parameters, so approximate minimization cannot create a false violation),
/// then checks G(FSL) <= G(D(P_t||P_hat)) + G(SSL) + tol.
BoundReport check_theorem1(const TheoryInstance& instance, const MetricPair& pair,
                           const OptimizationBudget& budget, double tol = 1e-6);

struct Corollary1Report {
  std::string pair_name;
  int resamples = 0;
  double mean_fsl = 0.0;
  double mean_rhs = 0.0;   // 2 * mean cost + 2 * mean SSL risk
  double slack = 0.0;      // mean_rhs + 3 * stderr - mean_fsl
  bool holds = false;
  double scalar_max_violation = 0.0;  // max over the grid of 2G(t/2) - G(2t)
  bool scalar_holds = false;
};

/// Monte Carlo over resampled instances: mean FSL risk at the per-instance
/// SSL minimizer vs twice the mean cost plus twice the mean SSL risk, with a
/// 3-standard-error slack; plus the scalar condition 2G(t/2) <= G(2t) on a
/// grid over (0, 4].
Corollary1Report check_corollary1(Eigen::Index k, Eigen::Index n, Eigen::Index m, double beta,
                                  double noise_rate, const MetricPair& pair, int resamples,
                                  const OptimizationBudget& budget, std::uint64_t seed);

struct FinitenessReport {
  int trials = 0;
  long finite_and_nonnegative = 0;
  long violations = 0;
  bool reverse_kl_infinite = false;  // the Assumption-1 counterexample witness
  bool passed() const { return violations == 0 && reverse_kl_infinite; }
};

/// Hard-label batches with strictly positive predictions: every spec with
/// f(0) finite yields a finite nonnegative DER, while the reverse-KL
/// generator f(t) = -log t yields the Infinite outcome.
FinitenessReport check_proposition1(int trials, Eigen::Index k, Eigen::Index n,
                                    std::uint64_t seed);

struct InequalityReport {
  int trials = 0;
  long pinsker_violations = 0;       // 2 R_tv^2 <= R_kl
  long kl_chi2_violations = 0;       // R_kl <= R_chi2
  long js_lecam_violations = 0;      // R_js <= 2 log 2 * R_lc
  long bound_violations = 0;         // R_tv <= 1, R_js <= 2 log 2, R_lc <= 1
  long renyi_monotone_violations = 0;
  long renyi_limit_violations = 0;   // |R_alpha - R_kl| <= 1e-3 at alpha = 1 +- 1e-5
  double max_violation = 0.0;
  bool passed() const {
    return pinsker_violations + kl_chi2_violations + js_lecam_violations + bound_violations +
               renyi_monotone_violations + renyi_limit_violations ==
           0;
  }
};

InequalityReport check_der_inequalities(int trials, Eigen::Index k, Eigen::Index n,
                                        std::uint64_t seed);

}  // namespace derisk
