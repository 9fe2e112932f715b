/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "derisk/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "derisk/random.hpp"

namespace derisk {

std::vector<Eigen::Index> PseudoLabeledSet::class_counts(Eigen::Index k) const {
  std::vector<Eigen::Index> counts(k, 0);
  for (const PseudoLabel& e : entries) counts.at(e.cls)++;
  return counts;
}

PseudoLabeledSet select_pseudo_labels(const ClassifierModel& model,
                                      const Eigen::Ref<const Eigen::MatrixXd>& pool,
                                      const SelectionThresholds& thresholds, int mc_passes,
                                      std::uint64_t seed, int iteration) {
  if (!(thresholds.tau_p >= 0.0 && thresholds.tau_p <= 1.0) ||
      !(thresholds.kappa_p >= 0.0 && thresholds.kappa_p <= 1.0))
    throw std::invalid_argument("selection thresholds must lie in [0, 1]");

  PseudoLabeledSet out;
  if (pool.rows() == 0) return out;
  Eigen::MatrixXd probs = forward_probs(model, pool, ForwardMode::Eval);
  Eigen::VectorXd uncertainty;
  if (thresholds.use_uncertainty)
    uncertainty = mc_uncertainty_batch(model, pool, mc_passes, seed);

  for (Eigen::Index j = 0; j < pool.rows(); ++j) {
    Eigen::Index argmax;
    double confidence = probs.row(j).maxCoeff(&argmax);
    if (confidence < thresholds.tau_p) continue;
    double u = thresholds.use_uncertainty ? uncertainty[j] : 0.0;
    if (thresholds.use_uncertainty && u > thresholds.kappa_p) continue;
    out.entries.push_back({j, argmax, confidence, u, iteration});
  }
  return out;
}

PseudoLabeledSet balance(const PseudoLabeledSet& set, Eigen::Index k, std::uint64_t seed) {
  if (set.empty()) return {};
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < set.entries.size(); ++i) by_class.at(set.entries[i].cls).push_back(i);
  std::size_t min_count = set.entries.size();
  for (const auto& bucket : by_class)
    if (!bucket.empty()) min_count = std::min(min_count, bucket.size());

  std::mt19937_64 rng(derive_seed(seed, "balance"));
  std::vector<std::size_t> kept;
  for (auto& bucket : by_class) {
    if (bucket.empty()) continue;
    std::shuffle(bucket.begin(), bucket.end(), rng);
    kept.insert(kept.end(), bucket.begin(), bucket.begin() + static_cast<std::ptrdiff_t>(min_count));
  }
  std::sort(kept.begin(), kept.end(),
            [&](std::size_t a, std::size_t b) { return set.entries[a].pool_index < set.entries[b].pool_index; });
  PseudoLabeledSet out;
  out.entries.reserve(kept.size());
  for (std::size_t i : kept) out.entries.push_back(set.entries[i]);
  return out;
}

void merge_replacing(PseudoLabeledSet& accumulated, const PseudoLabeledSet& fresh) {
  std::vector<PseudoLabel> merged;
  merged.reserve(accumulated.entries.size() + fresh.entries.size());
  auto a = accumulated.entries.begin();
  auto f = fresh.entries.begin();
  while (a != accumulated.entries.end() || f != fresh.entries.end()) {
    if (f == fresh.entries.end()) {
      merged.push_back(*a++);
    } else if (a == accumulated.entries.end()) {
      merged.push_back(*f++);
    } else if (a->pool_index < f->pool_index) {
      merged.push_back(*a++);
    } else if (a->pool_index > f->pool_index) {
      merged.push_back(*f++);
    } else {
      merged.push_back(*f++);  // newest wins
      ++a;
    }
  }
  accumulated.entries = std::move(merged);
}

std::vector<Eigen::Index> inject_label_noise(std::vector<Eigen::Index> labels, double rate,
                                             Eigen::Index k, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("noise rate must lie in [0, 1]");
  if (k < 2) throw std::invalid_argument("noise injection needs k >= 2");
  std::mt19937_64 rng(derive_seed(seed, "noise"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> alt(0, k - 2);
  for (Eigen::Index& label : labels) {
    if (u(rng) >= rate) continue;
    Eigen::Index other = alt(rng);
    label = other >= label ? other + 1 : other;  // uniform over the k-1 other classes
  }
  return labels;
}

namespace {

struct LoopContext {
  const SslDataset::LabeledView& labeled;
  const SelfTrainConfig& config;
  const SelfTrainHooks& hooks;
  Eigen::Index k;
};

ClassifierModel fresh_model(const LoopContext& ctx, Eigen::Index d, int iteration) {
  return init_model(d, ctx.k, ctx.config.hidden, ctx.config.model_dropout,
                    derive_seed(ctx.config.seed, "init", static_cast<std::uint64_t>(iteration)));
}

TrainOptions iteration_train_options(const SelfTrainConfig& config, int iteration) {
  TrainOptions opts;
  opts.epochs = config.epochs_per_iteration;
  opts.batch_size = config.batch_size;
  opts.sgd = config.sgd;
  opts.seed = derive_seed(config.seed, "train", static_cast<std::uint64_t>(iteration));
  return opts;
}

void finish_record(IterationRecord& rec, const LoopContext& ctx, const ClassifierModel& model,
                   const TrainTrace& trace, std::vector<IterationRecord>& records) {
  if (!trace.epoch_objective.empty()) rec.objective = trace.epoch_objective.back();
  if (ctx.hooks.train_accuracy) rec.train_accuracy = ctx.hooks.train_accuracy(model);
  if (ctx.hooks.test_accuracy) rec.test_accuracy = ctx.hooks.test_accuracy(model);
  if (ctx.hooks.on_iteration) ctx.hooks.on_iteration(rec);
  records.push_back(rec);
}

// Warm-up: iteration 1 trains on labeled rows only.
ClassifierModel warm_up(const LoopContext& ctx, std::vector<IterationRecord>& records) {
  ClassifierModel model = fresh_model(ctx, ctx.labeled.features.cols(), 1);
  ObjectiveSpec warm_objective{ctx.config.objective.spec, ctx.config.objective.reg_spec, {}};
  TrainTrace trace = train_epochs(model, make_sl_rows(ctx.labeled.features, ctx.labeled.labels),
                                  warm_objective, iteration_train_options(ctx.config, 1));
  IterationRecord rec;
  rec.iteration = 1;
  finish_record(rec, ctx, model, trace, records);
  return model;
}

}  // namespace

SelfTrainResult sl_train(const SslDataset::LabeledView& labeled, const SelfTrainConfig& config,
                         const SelfTrainHooks& hooks) {
  if (labeled.labels.empty()) throw std::invalid_argument("labeled set must be nonempty");
  Eigen::Index k = 1 + *std::max_element(labeled.labels.begin(), labeled.labels.end());
  LoopContext ctx{labeled, config, hooks, std::max<Eigen::Index>(k, 2)};
  SelfTrainResult result;
  result.model = warm_up(ctx, result.iterations);
  return result;
}

SelfTrainResult dp_ssl(const SslDataset::LabeledView& labeled,
                       const SslDataset::UnlabeledView& unlabeled, const SelfTrainConfig& config,
                       const SelfTrainHooks& hooks) {
  if (labeled.labels.empty()) throw std::invalid_argument("labeled set must be nonempty");
  if (config.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  Eigen::Index k = 1 + *std::max_element(labeled.labels.begin(), labeled.labels.end());
  LoopContext ctx{labeled, config, hooks, std::max<Eigen::Index>(k, 2)};
  const Eigen::Index n = labeled.features.rows();

  SelfTrainResult result;
  result.model = warm_up(ctx, result.iterations);

  PseudoLabeledSet accumulated;
  for (int iter = 2; iter <= config.max_iterations; ++iter) {
    PseudoLabeledSet fresh =
        select_pseudo_labels(result.model, unlabeled.features, config.thresholds, config.mc_passes,
                             derive_seed(config.seed, "select", static_cast<std::uint64_t>(iter)), iter);
    merge_replacing(accumulated, fresh);

    IterationRecord rec;
    rec.iteration = iter;
    rec.selected_before_balance = accumulated.size();

    result.model = fresh_model(ctx, labeled.features.cols(), iter);
    if (config.balance_enabled)
      accumulated = balance(accumulated, ctx.k,
                            derive_seed(config.seed, "balance", static_cast<std::uint64_t>(iter)));
    rec.selected_after_balance = accumulated.size();

    TrainTrace trace;
    ObjectiveSpec objective{config.objective.spec, config.objective.reg_spec, {}};
    if (accumulated.empty()) {
      rec.labeled_only_fallback = true;
      trace = train_epochs(result.model, make_sl_rows(labeled.features, labeled.labels), objective,
                           iteration_train_options(config, iter));
    } else {
      const Eigen::Index m = accumulated.size();
      const double beta = config.beta.value_or(static_cast<double>(n) / static_cast<double>(n + m));
      TrainRowSet rows;
      rows.features.resize(n + m, labeled.features.cols());
      rows.features.topRows(n) = labeled.features;
      rows.der_weight.resize(n + m);
      rows.der_weight.head(n).setConstant(beta / static_cast<double>(n));
      rows.der_weight.tail(m).setConstant((1.0 - beta) / static_cast<double>(m));
      rows.targets.reserve(n + m);
      for (Eigen::Index cls : labeled.labels) rows.targets.push_back(LabelAssignment::hard(cls));
      for (Eigen::Index j = 0; j < m; ++j) {
        rows.features.row(n + j) = unlabeled.features.row(accumulated.entries[j].pool_index);
        rows.targets.push_back(LabelAssignment::hard(accumulated.entries[j].cls));
      }
      trace = train_epochs(result.model, rows, objective, iteration_train_options(config, iter));
    }

    if (hooks.pseudo_precision && !accumulated.empty())
      rec.pseudo_precision = hooks.pseudo_precision(accumulated);
    finish_record(rec, ctx, result.model, trace, result.iterations);
  }
  return result;
}

SelfTrainResult dem_ssl(const SslDataset::LabeledView& labeled,
                        const SslDataset::UnlabeledView& unlabeled, const SelfTrainConfig& config,
                        const SelfTrainHooks& hooks) {
  if (labeled.labels.empty()) throw std::invalid_argument("labeled set must be nonempty");
  if (config.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  Eigen::Index k = 1 + *std::max_element(labeled.labels.begin(), labeled.labels.end());
  LoopContext ctx{labeled, config, hooks, std::max<Eigen::Index>(k, 2)};
  const Eigen::Index n = labeled.features.rows();
  const Eigen::Index m = unlabeled.features.rows();

  SelfTrainResult result;
  result.model = warm_up(ctx, result.iterations);

  for (int iter = 2; iter <= config.max_iterations; ++iter) {
    // previous model's Eval predictions become this iteration's soft labels
    Eigen::MatrixXd soft = forward_probs(result.model, unlabeled.features, ForwardMode::Eval);

    IterationRecord rec;
    rec.iteration = iter;
    rec.selected_before_balance = m;
    rec.selected_after_balance = m;

    result.model = fresh_model(ctx, labeled.features.cols(), iter);
    TrainTrace trace;
    if (m == 0) {
      rec.labeled_only_fallback = true;
      trace = train_epochs(result.model, make_sl_rows(labeled.features, labeled.labels),
                           config.objective, iteration_train_options(config, iter));
    } else {
      const double beta = config.beta.value_or(static_cast<double>(n) / static_cast<double>(n + m));
      TrainRowSet rows;
      rows.features.resize(n + m, labeled.features.cols());
      rows.features.topRows(n) = labeled.features;
      rows.features.bottomRows(m) = unlabeled.features;
      rows.der_weight.resize(n + m);
      rows.der_weight.head(n).setConstant(beta / static_cast<double>(n));
      rows.der_weight.tail(m).setConstant((1.0 - beta) / static_cast<double>(m));
      rows.targets.reserve(n + m);
      for (Eigen::Index cls : labeled.labels) rows.targets.push_back(LabelAssignment::hard(cls));
      for (Eigen::Index j = 0; j < m; ++j)
        rows.targets.push_back(LabelAssignment::soft(soft.row(j).transpose()));
      rows.regularized.assign(n + m, 0);
      std::fill(rows.regularized.begin() + n, rows.regularized.end(), 1);
      trace = train_epochs(result.model, rows, config.objective, iteration_train_options(config, iter));

      if (hooks.pseudo_precision) {
        PseudoLabeledSet argmax_set;
        for (Eigen::Index j = 0; j < m; ++j) {
          Eigen::Index cls;
          double conf = soft.row(j).maxCoeff(&cls);
          argmax_set.entries.push_back({j, cls, conf, 0.0, iter});
        }
        rec.pseudo_precision = hooks.pseudo_precision(argmax_set);
      }
    }
    finish_record(rec, ctx, result.model, trace, result.iterations);
  }
  return result;
}

}  // namespace derisk
