/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "derisk/experiment.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "derisk/random.hpp"

namespace derisk {

using nlohmann::json;

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::SL: return "sl";
    case Scenario::FSL: return "fsl";
    case Scenario::DpSsl: return "dp-ssl";
    case Scenario::DemSsl: return "dem-ssl";
  }
  return "?";
}

Scenario parse_scenario(const std::string& name) {
  if (name == "sl") return Scenario::SL;
  if (name == "fsl") return Scenario::FSL;
  if (name == "dp-ssl") return Scenario::DpSsl;
  if (name == "dem-ssl") return Scenario::DemSsl;
  throw std::invalid_argument("unknown scenario '" + name + "' (sl, fsl, dp-ssl, dem-ssl)");
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    read_field(d, "source", c.dataset.source);
    if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      read_field(s, "k", c.dataset.synthetic.k);
      read_field(s, "d", c.dataset.synthetic.d);
      read_field(s, "per_class", c.dataset.synthetic.per_class);
      read_field(s, "spread", c.dataset.synthetic.spread);
      read_field(s, "seed", c.dataset.synthetic.seed);
    }
    read_field(d, "n_labeled", c.dataset.n_labeled);
    read_field(d, "n_test", c.dataset.n_test);
    read_field(d, "stratified", c.dataset.stratified);
    read_field(d, "split_seed", c.dataset.split_seed);
    read_field(d, "normalize", c.dataset.normalize);
    read_field(d, "unlabeled_keep_fraction", c.dataset.unlabeled_keep_fraction);
  }
  if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario").get<std::string>());
  if (j.contains("divergence")) c.divergence = DivergenceSpec::parse(j.at("divergence").get<std::string>());
  if (j.contains("reg_divergence") && !j.at("reg_divergence").is_null())
    c.reg_divergence = DivergenceSpec::parse(j.at("reg_divergence").get<std::string>());
  if (j.contains("beta") && !j.at("beta").is_null()) {
    if (j.at("beta").is_string()) {
      if (j.at("beta").get<std::string>() != "auto")
        throw std::invalid_argument("config error at beta: expected number or \"auto\"");
    } else {
      c.beta = j.at("beta").get<double>();
    }
  }
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    read_field(t, "tau_p", c.thresholds.tau_p);
    read_field(t, "kappa_p", c.thresholds.kappa_p);
    read_field(t, "use_uncertainty", c.thresholds.use_uncertainty);
  }
  if (j.contains("reg")) {
    const json& r = j.at("reg");
    read_field(r, "lambda_h", c.reg.lambda_h);
    read_field(r, "lambda_u", c.reg.lambda_u);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    read_field(m, "hidden", c.hidden);
    read_field(m, "dropout", c.dropout);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    read_field(o, "learning_rate", c.sgd.learning_rate);
    read_field(o, "momentum", c.sgd.momentum);
    read_field(o, "nesterov", c.sgd.nesterov);
  }
  read_field(j, "iterations", c.iterations);
  read_field(j, "epochs", c.epochs);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "seeds", c.seeds);
  read_field(j, "balance", c.balance);
  read_field(j, "mc_passes", c.mc_passes);
  read_field(j, "label_noise_rate", c.label_noise_rate);
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["dataset"] = {
      {"source", dataset.source},
      {"synthetic",
       {{"k", dataset.synthetic.k},
        {"d", dataset.synthetic.d},
        {"per_class", dataset.synthetic.per_class},
        {"spread", dataset.synthetic.spread},
        {"seed", dataset.synthetic.seed}}},
      {"n_labeled", dataset.n_labeled},
      {"n_test", dataset.n_test},
      {"stratified", dataset.stratified},
      {"split_seed", dataset.split_seed},
      {"normalize", dataset.normalize},
      {"unlabeled_keep_fraction", dataset.unlabeled_keep_fraction}};
  j["scenario"] = scenario_name(scenario);
  j["divergence"] = divergence.name();
  j["reg_divergence"] = reg_divergence ? json(reg_divergence->name()) : json(nullptr);
  j["beta"] = beta ? json(*beta) : json("auto");
  j["thresholds"] = {{"tau_p", thresholds.tau_p},
                     {"kappa_p", thresholds.kappa_p},
                     {"use_uncertainty", thresholds.use_uncertainty}};
  j["reg"] = {{"lambda_h", reg.lambda_h}, {"lambda_u", reg.lambda_u}};
  j["model"] = {{"hidden", hidden}, {"dropout", dropout}};
  j["optimizer"] = {{"learning_rate", sgd.learning_rate},
                    {"momentum", sgd.momentum},
                    {"nesterov", sgd.nesterov}};
  j["iterations"] = iterations;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seeds"] = seeds;
  j["balance"] = balance;
  j["mc_passes"] = mc_passes;
  j["label_noise_rate"] = label_noise_rate;
  return j;
}

std::string ExperimentConfig::hash() const {
  // FNV-1a over the canonical dump (nlohmann objects iterate sorted by key)
  std::string dump = to_json().dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& path, const std::string& why) {
    throw std::invalid_argument("config error at " + path + ": " + why);
  };
  if (dataset.source.empty()) fail("dataset.source", "must be 'synthetic' or a file path");
  if (dataset.n_labeled < 1) fail("dataset.n_labeled", "must be >= 1");
  if (dataset.n_test < 0) fail("dataset.n_test", "must be >= 0");
  if (beta && !(*beta >= 0.0 && *beta <= 1.0)) fail("beta", "must lie in [0, 1]");
  if (!(thresholds.tau_p >= 0.0 && thresholds.tau_p <= 1.0)) fail("thresholds.tau_p", "must lie in [0, 1]");
  if (!(thresholds.kappa_p >= 0.0 && thresholds.kappa_p <= 1.0))
    fail("thresholds.kappa_p", "must lie in [0, 1]");
  if (reg.lambda_h < 0.0 || !std::isfinite(reg.lambda_h)) fail("reg.lambda_h", "must be finite and >= 0");
  if (reg.lambda_u < 0.0 || !std::isfinite(reg.lambda_u)) fail("reg.lambda_u", "must be finite and >= 0");
  if (hidden < 1) fail("model.hidden", "must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("model.dropout", "must lie in [0, 1)");
  if (scenario == Scenario::DpSsl && thresholds.use_uncertainty && mc_passes < 2)
    fail("mc_passes", "uncertainty gating needs >= 2 passes");
  if (iterations < 1) fail("iterations", "must be >= 1");
  if (epochs < 0) fail("epochs", "must be >= 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (seeds.empty()) fail("seeds", "need at least one seed");
  if (!(label_noise_rate >= 0.0 && label_noise_rate <= 1.0)) fail("label_noise_rate", "must lie in [0, 1]");
  if (!dataset.unlabeled_keep_fraction.empty())
    for (double f : dataset.unlabeled_keep_fraction)
      if (!(f >= 0.0 && f <= 1.0)) fail("dataset.unlabeled_keep_fraction", "entries must lie in [0, 1]");
}

SslDataset prepare_dataset(const ExperimentConfig& config) {
  ParsedDataset parsed = config.dataset.source == "synthetic"
                             ? make_synthetic_mixture(config.dataset.synthetic.k, config.dataset.synthetic.d,
                                                      config.dataset.synthetic.per_class,
                                                      config.dataset.synthetic.spread,
                                                      config.dataset.synthetic.seed)
                             : load_dataset_file(config.dataset.source);
  SslDataset data = SslDataset::split(parsed, config.dataset.n_labeled, config.dataset.n_test,
                                      config.dataset.split_seed, config.dataset.stratified);
  if (!config.dataset.unlabeled_keep_fraction.empty())
    data = data.with_unlabeled_class_imbalance(config.dataset.unlabeled_keep_fraction,
                                               config.dataset.split_seed);
  if (config.dataset.normalize) data.normalize_features();
  return data;
}

namespace {

SelfTrainConfig self_train_config(const ExperimentConfig& c, std::uint64_t seed) {
  SelfTrainConfig st;
  st.max_iterations = c.iterations;
  st.thresholds = c.thresholds;
  st.beta = c.beta;
  st.objective.spec = c.divergence;
  st.objective.reg_spec = c.reg_divergence;
  st.objective.reg = c.scenario == Scenario::DemSsl ? c.reg : RegularizationWeights{};
  st.epochs_per_iteration = c.epochs;
  st.batch_size = c.batch_size;
  st.sgd = c.sgd;
  st.hidden = c.hidden;
  st.model_dropout = c.dropout;
  st.mc_passes = c.mc_passes;
  st.balance_enabled = c.balance;
  st.seed = seed;
  return st;
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const SslDataset& dataset) {
  config.validate();
  std::vector<RunRecord> records;
  const std::string hash = config.hash();

  auto test_view = dataset.test();
  auto unlabeled_true = dataset.unlabeled_true_labels_for_eval();

  for (std::uint64_t seed : config.seeds) {
    auto start = std::chrono::steady_clock::now();

    SslDataset::LabeledView train_view =
        config.scenario == Scenario::FSL ? dataset.fsl_training_view() : dataset.labeled();
    if (config.label_noise_rate > 0.0)
      train_view.labels = inject_label_noise(std::move(train_view.labels), config.label_noise_rate,
                                             dataset.classes(), derive_seed(seed, "label-noise"));

    SelfTrainHooks hooks;
    hooks.train_accuracy = [&](const ClassifierModel& m) {
      return accuracy(m, train_view.features, train_view.labels);
    };
    if (!test_view.labels.empty())
      hooks.test_accuracy = [&](const ClassifierModel& m) {
        return accuracy(m, test_view.features, test_view.labels);
      };
    hooks.pseudo_precision = [&](const PseudoLabeledSet& set) {
      if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
      Eigen::Index correct = 0;
      for (const PseudoLabel& e : set.entries)
        if (unlabeled_true[e.pool_index] == e.cls) ++correct;
      return static_cast<double>(correct) / static_cast<double>(set.size());
    };

    SelfTrainConfig st = self_train_config(config, seed);
    SelfTrainResult result;
    switch (config.scenario) {
      case Scenario::SL:
      case Scenario::FSL:
        result = sl_train(train_view, st, hooks);
        break;
      case Scenario::DpSsl:
        result = dp_ssl(train_view, dataset.unlabeled(), st, hooks);
        break;
      case Scenario::DemSsl:
        result = dem_ssl(train_view, dataset.unlabeled(), st, hooks);
        break;
    }

    RunRecord rec;
    rec.config_hash = hash;
    rec.scenario = config.scenario;
    rec.divergence = config.divergence.name();
    rec.seed = seed;
    rec.iterations = std::move(result.iterations);
    rec.final_test_accuracy = !test_view.labels.empty()
                                  ? accuracy(result.model, test_view.features, test_view.labels)
                                  : std::numeric_limits<double>::quiet_NaN();
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, prepare_dataset(config));
}

namespace {

json nan_safe(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

void write_jsonl(const std::vector<RunRecord>& records, std::ostream& out) {
  for (const RunRecord& rec : records) {
    for (const IterationRecord& it : rec.iterations) {
      json line;
      line["type"] = "iteration";
      line["config_hash"] = rec.config_hash;
      line["scenario"] = scenario_name(rec.scenario);
      line["divergence"] = rec.divergence;
      line["seed"] = rec.seed;
      line["iteration"] = it.iteration;
      line["selected_before_balance"] = it.selected_before_balance;
      line["selected_after_balance"] = it.selected_after_balance;
      line["pseudo_precision"] = nan_safe(it.pseudo_precision);
      line["train_accuracy"] = nan_safe(it.train_accuracy);
      line["test_accuracy"] = nan_safe(it.test_accuracy);
      line["objective"] = nan_safe(it.objective);
      line["labeled_only_fallback"] = it.labeled_only_fallback;
      out << line.dump() << "\n";
    }
    json summary;
    summary["type"] = "run_summary";
    summary["config_hash"] = rec.config_hash;
    summary["scenario"] = scenario_name(rec.scenario);
    summary["divergence"] = rec.divergence;
    summary["seed"] = rec.seed;
    summary["final_test_accuracy"] = nan_safe(rec.final_test_accuracy);
    out << summary.dump() << "\n";
  }
}

std::vector<json> read_jsonl(std::istream& in) {
  std::vector<json> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    lines.push_back(json::parse(line));
  }
  return lines;
}

}  // namespace derisk
