/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace derisk {

enum class DivergenceKind {
  KL,
  TotalVariation,
  ChiSquared,
  Power,
  JensenShannon,
  LeCam,
  Renyi,
};

/// Selects a divergence family: one of the f-divergences of the generator
/// table, or the alpha-Renyi divergence. Construction validates parameters
/// (Power needs p > 1 so the generator stays convex with f(0) finite; Renyi
/// needs alpha >= 0 and alpha != 1 -- alpha = 1 is served by KL explicitly).
class DivergenceSpec {
 public:
  static DivergenceSpec kl() { return {DivergenceKind::KL, 0.0}; }
  static DivergenceSpec total_variation() { return {DivergenceKind::TotalVariation, 0.0}; }
  static DivergenceSpec chi_squared() { return {DivergenceKind::ChiSquared, 0.0}; }
  static DivergenceSpec power(double p);
  static DivergenceSpec jensen_shannon() { return {DivergenceKind::JensenShannon, 0.0}; }
  static DivergenceSpec le_cam() { return {DivergenceKind::LeCam, 0.0}; }
  static DivergenceSpec renyi(double alpha);

  DivergenceKind kind() const { return kind_; }
  bool is_f_divergence() const { return kind_ != DivergenceKind::Renyi; }
  double power_exponent() const;
  double alpha() const;

  std::string name() const;
  /// Parses "kl", "tv", "chi2", "power:1.2", "js", "lecam", "renyi:0.6".
  static DivergenceSpec parse(const std::string& text);

  bool operator==(const DivergenceSpec&) const = default;

 private:
  DivergenceSpec(DivergenceKind kind, double param) : kind_(kind), param_(param) {}
  DivergenceKind kind_;
  double param_;
};

/// Probability vector over k >= 2 classes.  Entries must be nonnegative and
/// sum to 1 within 1e-9.
class Categorical {
 public:
  explicit Categorical(Eigen::VectorXd probs);
  static Categorical uniform(Eigen::Index k);
  static Categorical one_hot(Eigen::Index k, Eigen::Index cls);

  const Eigen::VectorXd& p() const { return probs_; }
  Eigen::Index size() const { return probs_.size(); }

 private:
  Eigen::VectorXd probs_;
};

// --- Generator interface (f-divergence kinds only) ---------------------------

/// f(t) for t >= 0, with f(0) taken as the right limit. Rejects Renyi specs.
double generator_value(const DivergenceSpec& spec, double t);

/// f'(t); the TotalVariation kink at t = 1 uses subgradient 0.
double generator_slope(const DivergenceSpec& spec, double t);

/// f(0+) (finite for every kind in the table).
double generator_at_zero(const DivergenceSpec& spec);

/// lim_{t->inf} f(t)/t; the weight of p-mass where q vanishes. May be +inf.
double generator_limit_slope(const DivergenceSpec& spec);

// --- Divergences --------------------------------------------------------------

/// D_f(p||q) = sum_i q_i f(p_i / q_i).  Terms with q_i > 0, p_i = 0 use
/// q_i * f(0); terms with q_i = 0, p_i > 0 use p_i * lim f(t)/t, which is
/// +infinity for KL / chi^2 / Power.  Infinite results are returned as the
/// IEEE +infinity sentinel, never thrown.
double f_divergence(const DivergenceSpec& spec,
                    const Eigen::Ref<const Eigen::VectorXd>& p,
                    const Eigen::Ref<const Eigen::VectorXd>& q);

/// Same computation with a caller-supplied generator; used for generators
/// outside the table (e.g. the reverse-KL finiteness counterexample).
double f_divergence_generic(const std::function<double(double)>& f, double f_at_zero,
                            double limit_slope,
                            const Eigen::Ref<const Eigen::VectorXd>& p,
                            const Eigen::Ref<const Eigen::VectorXd>& q);

/// (1/(alpha-1)) log sum_i p_i^alpha q_i^{1-alpha}, alpha >= 0, alpha != 1.
/// Terms with p_i = 0 are skipped; q_i = 0 under p_i > 0 yields +infinity for
/// alpha > 1 and contributes nothing for alpha < 1. Computed in the log
/// domain with max-subtraction.
double renyi_divergence(double alpha,
                        const Eigen::Ref<const Eigen::VectorXd>& p,
                        const Eigen::Ref<const Eigen::VectorXd>& q);

/// Dispatches to f_divergence or renyi_divergence.
double divergence(const DivergenceSpec& spec,
                  const Eigen::Ref<const Eigen::VectorXd>& p,
                  const Eigen::Ref<const Eigen::VectorXd>& q);

inline double divergence(const DivergenceSpec& spec, const Categorical& p, const Categorical& q) {
  return divergence(spec, p.p(), q.p());
}

/// D-entropy H_D(p) = -D(p || Unif(k)); always <= 0, zero iff p is uniform
/// (for strictly convex generators and Renyi alpha > 0).
double d_entropy(const DivergenceSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& p);

inline double d_entropy(const DivergenceSpec& spec, const Categorical& p) {
  return d_entropy(spec, p.p());
}

// --- Metric transforms --------------------------------------------------------

enum class MetricTransform { Identity, Sqrt };

/// Identity -> d, Sqrt -> sqrt(d). Rejects negative input.
double apply_metric_transform(MetricTransform g, double d);

/// The transform making G(D_f) a metric: Identity for TotalVariation, Sqrt
/// for JensenShannon and LeCam. Throws for every other kind.
MetricTransform metric_transform_for(DivergenceKind kind);

}  // namespace derisk
