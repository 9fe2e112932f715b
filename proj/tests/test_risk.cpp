#include <doctest.h>

#include <cmath>
#include <random>

#include "derisk/risk.hpp"
#include "test_util.hpp"

using namespace derisk;
using namespace derisk::testutil;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> rs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rs.size()),
                    static_cast<Eigen::Index>(rs.begin()->size()));
  Eigen::Index r = 0;
  for (auto& row : rs) {
    Eigen::Index c = 0;
    for (double x : row) m(r, c++) = x;
    ++r;
  }
  return m;
}

// definition path: divergence between the explicit joint vectors
double der_via_joints(const DivergenceSpec& spec, const WeightedBatch& b) {
  Eigen::VectorXd p = joint_vector(b.targets, b.weights, b.classes());
  Eigen::VectorXd q = joint_vector(b.predictions, b.weights);
  return divergence(spec, p, q);
}
}  // namespace

TEST_CASE("label assignment") {
  auto hard = LabelAssignment::hard(2);
  CHECK(hard.prob(2, 4) == 1.0);
  CHECK(hard.prob(0, 4) == 0.0);
  CHECK(hard.dense(4)[2] == 1.0);
  auto soft = LabelAssignment::soft(vec({0.25, 0.75}));
  CHECK(soft.prob(1, 2) == 0.75);
  CHECK_THROWS_AS(LabelAssignment::soft(vec({0.3, 0.3})), std::invalid_argument);
  CHECK_THROWS_AS(LabelAssignment::hard(-1), std::invalid_argument);
}

TEST_CASE("batch invariants") {
  WeightedBatch b;
  b.predictions = rows({{0.5, 0.5}, {0.25, 0.75}});
  b.targets = {LabelAssignment::hard(0), LabelAssignment::hard(1)};
  b.weights = vec({0.6, 0.6});
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);  // weights must sum to 1
  b.weights = vec({0.5, 0.5});
  CHECK_NOTHROW(b.validate());
}

TEST_CASE("der_sl closed-form examples") {
  // KL, n=2, P = [0.5, 0.25] -> (-ln 0.5 - ln 0.25)/2
  Eigen::MatrixXd preds = rows({{0.5, 0.5}, {0.25, 0.75}});
  std::vector<LabelAssignment> targets = {LabelAssignment::hard(0), LabelAssignment::hard(0)};
  CHECK(der_sl(DivergenceSpec::kl(), preds, targets) ==
        doctest::Approx(1.0397207708399179).epsilon(1e-12));

  // TV with perfect predictions -> 0 (predictions equal the one-hot targets)
  Eigen::MatrixXd perfect = rows({{1.0, 0.0}, {0.0, 1.0}});
  std::vector<LabelAssignment> tperf = {LabelAssignment::hard(0), LabelAssignment::hard(1)};
  CHECK(der_sl(DivergenceSpec::total_variation(), perfect, tperf) == doctest::Approx(0.0));

  // chi^2, n=1, P=0.5 -> 1/0.5 - 1 = 1
  CHECK(der_sl(DivergenceSpec::chi_squared(), rows({{0.5, 0.5}}), {LabelAssignment::hard(0)}) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // Renyi alpha=0.5, n=1, P=0.25 -> 2 ln 2
  CHECK(der_sl(DivergenceSpec::renyi(0.5), rows({{0.25, 0.75}}), {LabelAssignment::hard(0)}) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("every DER is zero at exact predictions, hard and soft") {
  std::mt19937_64 rng(7);
  for (const auto& spec : all_specs()) {
    // hard targets with one-hot predictions
    Eigen::MatrixXd preds = rows({{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}});
    std::vector<LabelAssignment> targets = {LabelAssignment::hard(0), LabelAssignment::hard(2)};
    CHECK(std::abs(der_sl(spec, preds, targets)) <= 1e-12);
    // soft targets equal to predictions
    Eigen::MatrixXd soft_preds(3, 4);
    std::vector<LabelAssignment> soft_targets;
    for (int r = 0; r < 3; ++r) {
      Eigen::VectorXd p = sample_simplex(4, rng);
      soft_preds.row(r) = p.transpose();
      soft_targets.push_back(LabelAssignment::soft(p));
    }
    CHECK(std::abs(der_sl(spec, soft_preds, soft_targets)) <= 1e-12);
  }
}

TEST_CASE("closed forms equal the joint definition path on random hard batches") {
  std::mt19937_64 rng(13);
  for (const auto& spec : all_specs()) {
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      auto batch = random_hard_batch(8, 6, rng);
      auto wb = make_uniform_batch(batch.predictions, batch.targets);
      double closed = der_closed_form(spec, batch.true_class_probs);
      double joints = der_via_joints(spec, wb);
      double evaluator = der(spec, wb);
      worst = std::max({worst, std::abs(closed - joints), std::abs(evaluator - joints)});
    }
    CAPTURE(spec.name());
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("beta mixture: trivial reductions") {
  std::mt19937_64 rng(17);
  auto labeled = random_hard_batch(4, 5, rng);
  auto pseudo = random_hard_batch(7, 5, rng);
  for (const auto& spec : all_specs()) {
    double ssl1 = der_ssl(spec, labeled.predictions, labeled.targets, pseudo.predictions,
                          pseudo.targets, 1.0);
    CHECK(ssl1 == doctest::Approx(der_sl(spec, labeled.predictions, labeled.targets)).epsilon(1e-12));
    double ssl0 = der_ssl(spec, labeled.predictions, labeled.targets, pseudo.predictions,
                          pseudo.targets, 0.0);
    CHECK(ssl0 == doctest::Approx(der_sl(spec, pseudo.predictions, pseudo.targets)).epsilon(1e-12));
  }
  // empty pseudo block falls back to beta = 1
  Eigen::MatrixXd none(0, 5);
  CHECK(der_ssl(DivergenceSpec::kl(), labeled.predictions, labeled.targets, none, {}, 0.3) ==
        doctest::Approx(der_sl(DivergenceSpec::kl(), labeled.predictions, labeled.targets)));
}

TEST_CASE("der_ssl example: KL decomposition") {
  // one labeled sample P=0.5, one pseudo P=0.25, beta=0.5
  double v = der_ssl(DivergenceSpec::kl(), rows({{0.5, 0.5}}), {LabelAssignment::hard(0)},
                     rows({{0.25, 0.75}}), {LabelAssignment::hard(0)}, 0.5);
  CHECK(v == doctest::Approx(1.0397207708399179).epsilon(1e-12));
}

TEST_CASE("der_ssl example: Renyi joint formula") {
  // (1/-0.4) log(0.5 * 0.5^0.4 + 0.5 * 0.25^0.4), cross-checked against the
  // direct joint-vector divergence over 2k outcomes
  double v = der_ssl(DivergenceSpec::renyi(0.6), rows({{0.5, 0.5}}), {LabelAssignment::hard(0)},
                     rows({{0.25, 0.75}}), {LabelAssignment::hard(0)}, 0.5);
  CHECK(v == doctest::Approx(1.0157746731328023).epsilon(1e-12));
  WeightedBatch joint = make_ssl_batch(rows({{0.5, 0.5}}), {LabelAssignment::hard(0)},
                                       rows({{0.25, 0.75}}), {LabelAssignment::hard(0)}, 0.5);
  CHECK(v == doctest::Approx(der_via_joints(DivergenceSpec::renyi(0.6), joint)).epsilon(1e-12));
}

TEST_CASE("joint decomposition holds for f-divergences, not for Renyi") {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 200; ++t) {
    auto labeled = random_hard_batch(3, 4, rng);
    auto pseudo = random_hard_batch(5, 4, rng);
    double beta = 0.37;
    for (const auto& spec :
         {DivergenceSpec::kl(), DivergenceSpec::total_variation(), DivergenceSpec::chi_squared(),
          DivergenceSpec::power(1.2), DivergenceSpec::jensen_shannon(), DivergenceSpec::le_cam()}) {
      double joint = der_ssl(spec, labeled.predictions, labeled.targets, pseudo.predictions,
                             pseudo.targets, beta);
      double mix = beta * der_sl(spec, labeled.predictions, labeled.targets) +
                   (1 - beta) * der_sl(spec, pseudo.predictions, pseudo.targets);
      CHECK(std::abs(joint - mix) <= 1e-10);
    }
    // Renyi alpha < 1: the joint value lower-bounds the convex combination
    double alpha = 0.6;
    double joint = der_ssl(DivergenceSpec::renyi(alpha), labeled.predictions, labeled.targets,
                           pseudo.predictions, pseudo.targets, beta);
    double mix = beta * der_sl(DivergenceSpec::renyi(alpha), labeled.predictions, labeled.targets) +
                 (1 - beta) * der_sl(DivergenceSpec::renyi(alpha), pseudo.predictions, pseudo.targets);
    CHECK(joint <= mix + 1e-10);
  }
}

TEST_CASE("mean prediction") {
  CHECK(mean_prediction(rows({{1.0, 0.0}, {0.0, 1.0}})).p().isApprox(vec({0.5, 0.5})));
  CHECK(mean_prediction(rows({{0.2, 0.8}})).p().isApprox(vec({0.2, 0.8})));
  CHECK(mean_prediction(rows({{0.6, 0.4}, {0.2, 0.8}, {0.7, 0.3}})).p().isApprox(vec({0.5, 0.5})));
  Eigen::MatrixXd empty(0, 2);
  CHECK_THROWS_AS(mean_prediction(empty), std::invalid_argument);
}

TEST_CASE("regularized risk") {
  auto labeled = make_uniform_batch(rows({{0.5, 0.5}}), {LabelAssignment::hard(0)});
  double base = der(DivergenceSpec::kl(), labeled);

  // lambda = 0 reduces to der_sl
  CHECK(regularized_risk(DivergenceSpec::kl(), labeled, rows({{0.9, 0.1}}), {0.0, 0.0}) ==
        doctest::Approx(base));

  // uniform unlabeled predictions: the lambda_u term is exactly 0
  Eigen::MatrixXd uniform_preds = rows({{0.5, 0.5}, {0.5, 0.5}});
  CHECK(regularized_risk(DivergenceSpec::kl(), labeled, uniform_preds, {0.0, 7.0}) ==
        doctest::Approx(base));
  // ... and the entropy term is 0 too (H_D maximal at uniform)
  CHECK(regularized_risk(DivergenceSpec::kl(), labeled, uniform_preds, {3.0, 0.0}) ==
        doctest::Approx(base));

  // one one-hot unlabeled prediction, k=2, lambda_h=0.4: adds 0.4 * (-ln 2)
  CHECK(regularized_risk(DivergenceSpec::kl(), labeled, rows({{1.0, 0.0}}), {0.4, 0.0}) ==
        doctest::Approx(base + 0.4 * -std::log(2.0)).epsilon(1e-12));

  // empty unlabeled block contributes nothing
  Eigen::MatrixXd none(0, 2);
  CHECK(regularized_risk(DivergenceSpec::kl(), labeled, none, {0.4, 0.8}) == doctest::Approx(base));
}

TEST_CASE("objective value matches der and regularized_risk") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (const auto& spec : all_specs()) {
    Eigen::MatrixXd logits(6, 5);
    for (Eigen::Index r = 0; r < 6; ++r)
      for (Eigen::Index c = 0; c < 5; ++c) logits(r, c) = normal(rng);
    auto batch = random_hard_batch(6, 5, rng);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(6, 1.0 / 6.0);
    auto res = der_objective(spec, logits, batch.targets, w);
    WeightedBatch wb{softmax_rows(logits), batch.targets, w};
    CHECK(res.value == doctest::Approx(der(spec, wb)).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> normal(0.0, 1.5);
  std::uniform_int_distribution<Eigen::Index> cls(0, 4);

  for (const auto& spec : all_specs()) {
    double worst = 0.0;
    for (int t = 0; t < 40; ++t) {
      const Eigen::Index n = 5, k = 5;
      Eigen::MatrixXd logits(n, k);
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < k; ++c) logits(r, c) = normal(rng);
      // mix of hard and soft targets, weighted rows, two regularized rows
      std::vector<LabelAssignment> targets;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r % 2 == 0)
          targets.push_back(LabelAssignment::hard(cls(rng)));
        else
          targets.push_back(LabelAssignment::soft(sample_simplex(k, rng)));
      }
      Eigen::VectorXd w = sample_simplex(n, rng);
      std::vector<Eigen::Index> reg_rows = {1, 3};
      RegularizationWeights reg{0.4, 0.8};

      auto res = der_objective(spec, logits, targets, w, reg_rows, reg);
      auto fd = finite_difference(
          [&](const Eigen::MatrixXd& L) {
            return der_objective(spec, L, targets, w, reg_rows, reg).value;
          },
          logits);
      worst = std::max(worst, max_rel_error(res.dlogits, fd));
    }
    CAPTURE(spec.name());
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("gradient of both regularizer terms alone") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& spec : all_specs()) {
    Eigen::MatrixXd logits(4, 3);
    for (Eigen::Index r = 0; r < 4; ++r)
      for (Eigen::Index c = 0; c < 3; ++c) logits(r, c) = normal(rng);
    std::vector<LabelAssignment> targets(4, LabelAssignment::hard(0));
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);  // DER off: regularizers only
    std::vector<Eigen::Index> reg_rows = {0, 1, 2, 3};
    for (RegularizationWeights reg : {RegularizationWeights{1.0, 0.0}, RegularizationWeights{0.0, 1.0}}) {
      auto res = der_objective(spec, logits, targets, w, reg_rows, reg);
      auto fd = finite_difference(
          [&](const Eigen::MatrixXd& L) {
            return der_objective(spec, L, targets, w, reg_rows, reg).value;
          },
          logits);
      CAPTURE(spec.name());
      CHECK(max_rel_error(res.dlogits, fd) <= 1e-4);
    }
  }
}

TEST_CASE("kl gradient at a near-perfect prediction is near zero") {
  Eigen::MatrixXd logits(1, 3);
  logits << 30.0, 0.0, 0.0;  // softmax ~ (1, 0, 0)
  auto res = der_objective(DivergenceSpec::kl(), logits, {LabelAssignment::hard(0)},
                           Eigen::VectorXd::Ones(1));
  CHECK(res.dlogits.norm() <= 1e-9);
}

TEST_CASE("tv gradient away from the kink matches finite differences") {
  // predictions distinct from targets so no per-sample ratio sits at t = 1
  Eigen::MatrixXd logits(2, 3);
  logits << 0.3, -0.4, 1.1, -0.2, 0.8, 0.1;
  std::vector<LabelAssignment> targets = {LabelAssignment::hard(2), LabelAssignment::hard(0)};
  Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.5);
  auto res = der_objective(DivergenceSpec::total_variation(), logits, targets, w);
  auto fd = finite_difference(
      [&](const Eigen::MatrixXd& L) {
        return der_objective(DivergenceSpec::total_variation(), L, targets, w).value;
      },
      logits);
  CHECK(max_rel_error(res.dlogits, fd) <= 1e-4);
}

TEST_CASE("infinite outcome is reported with the offending row") {
  // logits far enough apart that softmax underflows to exact zero
  Eigen::MatrixXd logits(2, 2);
  logits << 0.0, 0.0, 800.0, 0.0;
  std::vector<LabelAssignment> targets = {LabelAssignment::hard(0), LabelAssignment::hard(1)};
  Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.5);
  auto res = der_objective(DivergenceSpec::kl(), logits, targets, w);
  CHECK(std::isinf(res.value));
  CHECK(res.infinite_row == 1);
  CHECK_THROWS_AS(
      der_objective(DivergenceSpec::kl(),
                    (Eigen::MatrixXd(1, 2) << std::numeric_limits<double>::quiet_NaN(), 0.0).finished(),
                    {LabelAssignment::hard(0)}, Eigen::VectorXd::Ones(1)),
      std::invalid_argument);
}
