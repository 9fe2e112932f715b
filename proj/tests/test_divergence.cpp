#include <doctest.h>

#include <cmath>
#include <random>

#include "derisk/divergence.hpp"
#include "derisk/random.hpp"

using namespace derisk;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}
}  // namespace

TEST_CASE("spec construction validates parameters") {
  CHECK_THROWS_AS(DivergenceSpec::power(1.0), std::invalid_argument);
  CHECK_THROWS_AS(DivergenceSpec::power(0.5), std::invalid_argument);
  CHECK_THROWS_AS(DivergenceSpec::renyi(1.0), std::invalid_argument);
  CHECK_THROWS_AS(DivergenceSpec::renyi(-0.1), std::invalid_argument);
  CHECK(DivergenceSpec::renyi(0.0).alpha() == 0.0);
  CHECK(DivergenceSpec::parse("power:1.2").power_exponent() == doctest::Approx(1.2));
  CHECK(DivergenceSpec::parse("renyi:0.6").alpha() == doctest::Approx(0.6));
  CHECK(DivergenceSpec::parse("kl").kind() == DivergenceKind::KL);
  CHECK_THROWS(DivergenceSpec::parse("nope"));
  CHECK_THROWS(DivergenceSpec::parse("renyi"));
}

TEST_CASE("categorical invariants") {
  CHECK_THROWS_AS(Categorical(vec({0.5, 0.6})), std::invalid_argument);
  CHECK_THROWS_AS(Categorical(vec({-0.1, 1.1})), std::invalid_argument);
  CHECK_THROWS_AS(Categorical(vec({1.0})), std::invalid_argument);
  CHECK(Categorical::uniform(4).p().sum() == doctest::Approx(1.0));
  CHECK(Categorical::one_hot(3, 2).p()[2] == 1.0);
}

TEST_CASE("generator values at anchor points") {
  CHECK(generator_value(DivergenceSpec::kl(), 1.0) == 0.0);
  CHECK(generator_value(DivergenceSpec::total_variation(), 0.0) == doctest::Approx(0.5));
  CHECK(generator_value(DivergenceSpec::jensen_shannon(), 0.0) ==
        doctest::Approx(std::log(2.0)));  // limit of t log(2t/(1+t)) + log(2/(1+t))
  for (auto spec : {DivergenceSpec::kl(), DivergenceSpec::total_variation(),
                    DivergenceSpec::chi_squared(), DivergenceSpec::power(1.7),
                    DivergenceSpec::jensen_shannon(), DivergenceSpec::le_cam()}) {
    CHECK(generator_value(spec, 1.0) == doctest::Approx(0.0));  // f(1) = 0 exactly
    CHECK(generator_value(spec, 0.0) == doctest::Approx(generator_at_zero(spec)));
  }
  CHECK_THROWS_AS(generator_value(DivergenceSpec::renyi(0.5), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(generator_value(DivergenceSpec::kl(), -0.1), std::invalid_argument);
}

TEST_CASE("generator slopes match finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  for (auto spec : {DivergenceSpec::kl(), DivergenceSpec::chi_squared(), DivergenceSpec::power(1.2),
                    DivergenceSpec::jensen_shannon(), DivergenceSpec::le_cam()}) {
    for (int i = 0; i < 50; ++i) {
      double t = u(rng);
      double h = 1e-6;
      double fd = (generator_value(spec, t + h) - generator_value(spec, t - h)) / (2 * h);
      CHECK(generator_slope(spec, t) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  CHECK(generator_slope(DivergenceSpec::total_variation(), 1.0) == 0.0);  // kink subgradient
}

TEST_CASE("f_divergence examples") {
  auto half = Categorical(vec({0.5, 0.5}));
  CHECK(f_divergence(DivergenceSpec::kl(), half.p(), half.p()) == doctest::Approx(0.0));
  // 0.5 ln 2 + 0.5 ln(2/3)
  CHECK(f_divergence(DivergenceSpec::kl(), vec({0.5, 0.5}), vec({0.25, 0.75})) ==
        doctest::Approx(0.14384103622589045).epsilon(1e-12));
  CHECK(f_divergence(DivergenceSpec::total_variation(), vec({1.0, 0.0}), vec({0.5, 0.5})) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(f_divergence(DivergenceSpec::kl(), vec({0.5, 0.5}), vec({1.0 / 3, 1.0 / 3, 1.0 / 3})),
                  std::invalid_argument);
}

TEST_CASE("infinite outcome is a sentinel, not a crash") {
  double v = f_divergence(DivergenceSpec::kl(), vec({0.5, 0.5}), vec({1.0, 0.0}));
  CHECK(std::isinf(v));
  CHECK(std::isinf(renyi_divergence(2.0, vec({0.5, 0.5}), vec({1.0, 0.0}))));
  // finite-slope generators stay finite off the shared support
  CHECK(f_divergence(DivergenceSpec::total_variation(), vec({0.5, 0.5}), vec({1.0, 0.0})) ==
        doctest::Approx(0.5));
  CHECK(f_divergence(DivergenceSpec::jensen_shannon(), vec({0.5, 0.5}), vec({1.0, 0.0})) <
        2.0 * std::log(2.0) + 1e-12);
}

TEST_CASE("renyi divergence examples") {
  auto u4 = Categorical::uniform(4);
  CHECK(renyi_divergence(0.5, u4.p(), u4.p()) == doctest::Approx(0.0));
  // single surviving term: (1/(alpha-1)) log(0.25^0.5) = 2 ln 2
  CHECK(renyi_divergence(0.5, vec({1.0, 0.0}), vec({0.25, 0.75})) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(renyi_divergence(1.0, u4.p(), u4.p()), std::invalid_argument);
}

TEST_CASE("renyi approaches KL as alpha -> 1") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd p = sample_simplex(5, rng);
    Eigen::VectorXd q = sample_simplex(5, rng);
    double kl = f_divergence(DivergenceSpec::kl(), p, q);
    CHECK(std::abs(renyi_divergence(1.0 - 1e-5, p, q) - kl) < 1e-3);
    CHECK(std::abs(renyi_divergence(1.0 + 1e-5, p, q) - kl) < 1e-3);
  }
}

TEST_CASE("d_entropy examples") {
  CHECK(d_entropy(DivergenceSpec::kl(), Categorical::uniform(5).p()) == doctest::Approx(0.0));
  CHECK(d_entropy(DivergenceSpec::kl(), vec({1.0, 0.0})) ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(d_entropy(DivergenceSpec::total_variation(), vec({1.0, 0.0})) == doctest::Approx(-0.5));
  // always <= 0, and 0 only at uniform
  std::mt19937_64 rng(5);
  for (auto spec : {DivergenceSpec::kl(), DivergenceSpec::chi_squared(), DivergenceSpec::renyi(0.6),
                    DivergenceSpec::renyi(2.0), DivergenceSpec::jensen_shannon()}) {
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd p = sample_simplex(6, rng);
      CHECK(d_entropy(spec, p) <= 1e-12);
    }
  }
}

TEST_CASE("metric transform") {
  CHECK(apply_metric_transform(MetricTransform::Identity, 0.3) == 0.3);
  CHECK(apply_metric_transform(MetricTransform::Sqrt, 0.25) == doctest::Approx(0.5));
  CHECK(apply_metric_transform(MetricTransform::Sqrt, 0.0) == 0.0);
  CHECK_THROWS_AS(apply_metric_transform(MetricTransform::Sqrt, -0.1), std::invalid_argument);
  CHECK(metric_transform_for(DivergenceKind::TotalVariation) == MetricTransform::Identity);
  CHECK(metric_transform_for(DivergenceKind::JensenShannon) == MetricTransform::Sqrt);
  CHECK(metric_transform_for(DivergenceKind::LeCam) == MetricTransform::Sqrt);
  CHECK_THROWS_AS(metric_transform_for(DivergenceKind::KL), std::invalid_argument);
}

TEST_CASE("non-negativity and identity of indiscernibles") {
  std::mt19937_64 rng(17);
  for (auto spec : {DivergenceSpec::kl(), DivergenceSpec::total_variation(),
                    DivergenceSpec::chi_squared(), DivergenceSpec::power(1.2),
                    DivergenceSpec::jensen_shannon(), DivergenceSpec::le_cam(),
                    DivergenceSpec::renyi(0.6), DivergenceSpec::renyi(2.0)}) {
    for (int i = 0; i < 500; ++i) {
      Eigen::VectorXd p = sample_simplex(7, rng);
      Eigen::VectorXd q = sample_simplex(7, rng);
      CHECK(divergence(spec, p, q) >= -1e-12);
    }
    Eigen::VectorXd p = sample_simplex(7, rng);
    CHECK(std::abs(divergence(spec, p, p)) <= 1e-12);
  }
}

TEST_CASE("boundedness of tv, js, lecam") {
  std::mt19937_64 rng(23);
  const double two_log2 = 2.0 * std::log(2.0);
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXd p = sample_simplex(6, rng);
    Eigen::VectorXd q = sample_simplex(6, rng);
    CHECK(f_divergence(DivergenceSpec::total_variation(), p, q) <= 1.0 + 1e-12);
    CHECK(f_divergence(DivergenceSpec::jensen_shannon(), p, q) <= two_log2 + 1e-12);
    CHECK(f_divergence(DivergenceSpec::le_cam(), p, q) <= 1.0 + 1e-12);
  }
}

TEST_CASE("pinsker, kl <= chi2, js <= 2log2 lecam") {
  std::mt19937_64 rng(29);
  const double two_log2 = 2.0 * std::log(2.0);
  for (int i = 0; i < 2000; ++i) {
    Eigen::VectorXd p = sample_simplex(5, rng);
    Eigen::VectorXd q = sample_simplex(5, rng);
    double kl = f_divergence(DivergenceSpec::kl(), p, q);
    double tv = f_divergence(DivergenceSpec::total_variation(), p, q);
    double chi2 = f_divergence(DivergenceSpec::chi_squared(), p, q);
    double js = f_divergence(DivergenceSpec::jensen_shannon(), p, q);
    double lc = f_divergence(DivergenceSpec::le_cam(), p, q);
    CHECK(2.0 * tv * tv <= kl + 1e-9);
    CHECK(kl <= chi2 + 1e-9);
    CHECK(js <= two_log2 * lc + 1e-9);
  }
}

TEST_CASE("renyi monotone in alpha") {
  std::mt19937_64 rng(31);
  const double grid[] = {0.3, 0.6, 0.9, 1.5, 2.0};
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd p = sample_simplex(5, rng);
    Eigen::VectorXd q = sample_simplex(5, rng);
    double prev = -1.0;
    for (double alpha : grid) {
      double d = renyi_divergence(alpha, p, q);
      CHECK(d >= prev - 1e-9);
      prev = d;
    }
  }
}

TEST_CASE("triangle inequality for the three metric pairs") {
  std::mt19937_64 rng(37);
  struct Pair {
    DivergenceSpec spec;
    MetricTransform g;
  };
  const Pair pairs[] = {{DivergenceSpec::total_variation(), MetricTransform::Identity},
                        {DivergenceSpec::jensen_shannon(), MetricTransform::Sqrt},
                        {DivergenceSpec::le_cam(), MetricTransform::Sqrt}};
  for (const auto& pair : pairs) {
    for (int i = 0; i < 1000; ++i) {
      Eigen::VectorXd p1 = sample_simplex(4, rng);
      Eigen::VectorXd p2 = sample_simplex(4, rng);
      Eigen::VectorXd p3 = sample_simplex(4, rng);
      double d13 = apply_metric_transform(pair.g, f_divergence(pair.spec, p1, p3));
      double d12 = apply_metric_transform(pair.g, f_divergence(pair.spec, p1, p2));
      double d23 = apply_metric_transform(pair.g, f_divergence(pair.spec, p2, p3));
      CHECK(d13 <= d12 + d23 + 1e-9);
    }
  }
}

TEST_CASE("custom generator path: reverse KL is infinite against a one-hot p") {
  // f(t) = -log t, f(0) = +inf: Assumption-1 counterexample
  double v = f_divergence_generic([](double t) { return -std::log(t); },
                                  std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity(), vec({1.0, 0.0}),
                                  vec({0.5, 0.5}));
  CHECK(std::isinf(v));
}
