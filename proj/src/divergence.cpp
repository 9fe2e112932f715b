/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "derisk/divergence.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace derisk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Floor applied before log in the generic path; keeps denormals out of log
// without perturbing anything above 1e-12 tolerance.
constexpr double kLogFloor = 1e-300;

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

}  // namespace

DivergenceSpec DivergenceSpec::power(double p) {
  if (!(p > 1.0)) throw std::invalid_argument("Power divergence requires p > 1");
  return {DivergenceKind::Power, p};
}

DivergenceSpec DivergenceSpec::renyi(double alpha) {
  if (!(alpha >= 0.0) || alpha == 1.0)
    throw std::invalid_argument("Renyi divergence requires alpha >= 0 and alpha != 1 (use kl() for alpha = 1)");
  return {DivergenceKind::Renyi, alpha};
}

double DivergenceSpec::power_exponent() const {
  if (kind_ != DivergenceKind::Power) throw std::logic_error("not a Power spec");
  return param_;
}

double DivergenceSpec::alpha() const {
  if (kind_ != DivergenceKind::Renyi) throw std::logic_error("not a Renyi spec");
  return param_;
}

std::string DivergenceSpec::name() const {
  switch (kind_) {
    case DivergenceKind::KL: return "kl";
    case DivergenceKind::TotalVariation: return "tv";
    case DivergenceKind::ChiSquared: return "chi2";
    case DivergenceKind::Power: return "power:" + std::to_string(param_);
    case DivergenceKind::JensenShannon: return "js";
    case DivergenceKind::LeCam: return "lecam";
    case DivergenceKind::Renyi: return "renyi:" + std::to_string(param_);
  }
  return "?";
}

DivergenceSpec DivergenceSpec::parse(const std::string& text) {
  auto colon = text.find(':');
  std::string head = text.substr(0, colon);
  if (head == "kl") return kl();
  if (head == "tv") return total_variation();
  if (head == "chi2") return chi_squared();
  if (head == "js") return jensen_shannon();
  if (head == "lecam") return le_cam();
  if (head == "power" || head == "renyi") {
    if (colon == std::string::npos)
      throw std::invalid_argument("'" + head + "' needs a parameter, e.g. '" + head + ":1.2'");
    double v = std::stod(text.substr(colon + 1));
    return head == "power" ? power(v) : renyi(v);
  }
  throw std::invalid_argument("unknown divergence '" + text + "'");
}

Categorical::Categorical(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw std::invalid_argument("categorical distribution needs k >= 2");
  if ((probs_.array() < 0.0).any()) throw std::invalid_argument("categorical entries must be >= 0");
  if (std::abs(probs_.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("categorical entries must sum to 1 within 1e-9");
}

Categorical Categorical::uniform(Eigen::Index k) {
  return Categorical(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
}

Categorical Categorical::one_hot(Eigen::Index k, Eigen::Index cls) {
  if (cls < 0 || cls >= k) throw std::invalid_argument("one_hot class out of range");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
  v[cls] = 1.0;
  return Categorical(std::move(v));
}

double generator_value(const DivergenceSpec& spec, double t) {
  if (t < 0.0) throw std::invalid_argument("generator argument must be >= 0");
  switch (spec.kind()) {
    case DivergenceKind::KL:
      return t == 0.0 ? 0.0 : t * safe_log(t);
    case DivergenceKind::TotalVariation:
      return 0.5 * std::abs(t - 1.0);
    case DivergenceKind::ChiSquared:
      return (1.0 - t) * (1.0 - t);
    case DivergenceKind::Power:
      return std::pow(t, spec.power_exponent()) - 1.0;
    case DivergenceKind::JensenShannon:
      // t log(2t/(1+t)) + log(2/(1+t)); right limit log 2 at t = 0.
      if (t == 0.0) return std::log(2.0);
      return t * safe_log(2.0 * t / (1.0 + t)) + safe_log(2.0 / (1.0 + t));
    case DivergenceKind::LeCam:
      // Vincze - Le Cam generator; D = half the triangular discrimination
      return (1.0 - t) * (1.0 - t) / (2.0 * (1.0 + t));
    case DivergenceKind::Renyi:
      throw std::invalid_argument("Renyi divergence has no generator");
  }
  throw std::logic_error("unreachable");
}

double generator_slope(const DivergenceSpec& spec, double t) {
  if (t < 0.0) throw std::invalid_argument("generator argument must be >= 0");
  switch (spec.kind()) {
    case DivergenceKind::KL:
      return safe_log(t) + 1.0;
    case DivergenceKind::TotalVariation:
      if (t == 1.0) return 0.0;  // symmetric subgradient at the kink
      return t > 1.0 ? 0.5 : -0.5;
    case DivergenceKind::ChiSquared:
      return 2.0 * (t - 1.0);
    case DivergenceKind::Power: {
      double p = spec.power_exponent();
      return p * std::pow(t, p - 1.0);
    }
    case DivergenceKind::JensenShannon:
      return safe_log(2.0 * t / (1.0 + t));
    case DivergenceKind::LeCam: {
      double u = 1.0 + t;
      return -(1.0 - t) * (3.0 + t) / (2.0 * u * u);
    }
    case DivergenceKind::Renyi:
      throw std::invalid_argument("Renyi divergence has no generator");
  }
  throw std::logic_error("unreachable");
}

double generator_at_zero(const DivergenceSpec& spec) {
  switch (spec.kind()) {
    case DivergenceKind::KL: return 0.0;
    case DivergenceKind::TotalVariation: return 0.5;
    case DivergenceKind::ChiSquared: return 1.0;
    case DivergenceKind::Power: return -1.0;
    case DivergenceKind::JensenShannon: return std::log(2.0);
    case DivergenceKind::LeCam: return 0.5;
    case DivergenceKind::Renyi:
      throw std::invalid_argument("Renyi divergence has no generator");
  }
  throw std::logic_error("unreachable");
}

double generator_limit_slope(const DivergenceSpec& spec) {
  switch (spec.kind()) {
    case DivergenceKind::KL: return kInf;
    case DivergenceKind::TotalVariation: return 0.5;
    case DivergenceKind::ChiSquared: return kInf;
    case DivergenceKind::Power: return kInf;
    case DivergenceKind::JensenShannon: return std::log(2.0);
    case DivergenceKind::LeCam: return 0.5;
    case DivergenceKind::Renyi:
      throw std::invalid_argument("Renyi divergence has no generator");
  }
  throw std::logic_error("unreachable");
}

namespace {

template <typename F>
double f_divergence_impl(F&& f, double f0, double limit_slope,
                         const Eigen::Ref<const Eigen::VectorXd>& p,
                         const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("f_divergence: dimension mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double pi = p[i], qi = q[i];
    if (pi < 0.0 || qi < 0.0) throw std::invalid_argument("f_divergence: negative probability");
    if (qi > 0.0) {
      acc += pi == 0.0 ? qi * f0 : qi * f(pi / qi);
    } else if (pi > 0.0) {
      if (std::isinf(limit_slope)) return kInf;
      acc += pi * limit_slope;
    }
    if (std::isinf(acc)) return kInf;
  }
  return acc;
}

}  // namespace

double f_divergence(const DivergenceSpec& spec,
                    const Eigen::Ref<const Eigen::VectorXd>& p,
                    const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (!spec.is_f_divergence()) throw std::invalid_argument("f_divergence: got a Renyi spec");
  return f_divergence_impl([&](double t) { return generator_value(spec, t); },
                           generator_at_zero(spec), generator_limit_slope(spec), p, q);
}

double f_divergence_generic(const std::function<double(double)>& f, double f_at_zero,
                            double limit_slope,
                            const Eigen::Ref<const Eigen::VectorXd>& p,
                            const Eigen::Ref<const Eigen::VectorXd>& q) {
  return f_divergence_impl(f, f_at_zero, limit_slope, p, q);
}

double renyi_divergence(double alpha,
                        const Eigen::Ref<const Eigen::VectorXd>& p,
                        const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (!(alpha >= 0.0) || alpha == 1.0)
    throw std::invalid_argument("renyi_divergence requires alpha >= 0 and alpha != 1");
  if (p.size() != q.size()) throw std::invalid_argument("renyi_divergence: dimension mismatch");
  // log-domain accumulation: terms alpha*log p + (1-alpha)*log q over supp(p).
  double max_term = -kInf;
  Eigen::VectorXd terms(p.size());
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double pi = p[i], qi = q[i];
    if (pi < 0.0 || qi < 0.0) throw std::invalid_argument("renyi_divergence: negative probability");
    if (pi == 0.0) continue;
    if (qi == 0.0) {
      if (alpha > 1.0) return kInf;
      continue;  // 0^{1-alpha} = 0 for alpha in [0,1)
    }
    double t = alpha * safe_log(pi) + (1.0 - alpha) * safe_log(qi);
    terms[count++] = t;
    max_term = std::max(max_term, t);
  }
  if (count == 0) return kInf;  // disjoint support
  double sum = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) sum += std::exp(terms[i] - max_term);
  double log_sum = max_term + std::log(sum);
  return log_sum / (alpha - 1.0);
}

double divergence(const DivergenceSpec& spec,
                  const Eigen::Ref<const Eigen::VectorXd>& p,
                  const Eigen::Ref<const Eigen::VectorXd>& q) {
  return spec.is_f_divergence() ? f_divergence(spec, p, q)
                                : renyi_divergence(spec.alpha(), p, q);
}

double d_entropy(const DivergenceSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& p) {
  Eigen::VectorXd u = Eigen::VectorXd::Constant(p.size(), 1.0 / static_cast<double>(p.size()));
  return -divergence(spec, p, u);
}

double apply_metric_transform(MetricTransform g, double d) {
  if (d < 0.0) throw std::invalid_argument("metric transform input must be >= 0");
  return g == MetricTransform::Identity ? d : std::sqrt(d);
}

MetricTransform metric_transform_for(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::TotalVariation: return MetricTransform::Identity;
    case DivergenceKind::JensenShannon: return MetricTransform::Sqrt;
    case DivergenceKind::LeCam: return MetricTransform::Sqrt;
    default:
      throw std::invalid_argument("no metric transform is known for this divergence");
  }
}

}  // namespace derisk
