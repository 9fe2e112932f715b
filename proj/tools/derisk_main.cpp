/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "derisk/experiment.hpp"
#include "derisk/random.hpp"
#include "derisk/report.hpp"
#include "derisk/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitTheoryViolation = 3;

fs::path output_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("DERISK_OUT_DIR")) return env;
  return "runs";
}

struct TrainArgs {
  std::string config_path;
  std::string out_dir;
  // single-field overrides mirroring the config file
  std::optional<std::string> scenario, divergence, source;
  std::optional<double> tau_p, kappa_p, beta, lambda_h, lambda_u, noise_rate, dropout, spread;
  std::optional<int> iterations, epochs, batch_size, hidden;
  std::optional<bool> balance, uncertainty;
  std::vector<std::uint64_t> seeds;
};

derisk::ExperimentConfig load_config(const TrainArgs& args) {
  json j = json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw std::runtime_error("cannot open config " + args.config_path);
    in >> j;
  }
  auto cfg = derisk::ExperimentConfig::from_json(j);
  if (args.scenario) cfg.scenario = derisk::parse_scenario(*args.scenario);
  if (args.divergence) cfg.divergence = derisk::DivergenceSpec::parse(*args.divergence);
  if (args.source) cfg.dataset.source = *args.source;
  if (args.tau_p) cfg.thresholds.tau_p = *args.tau_p;
  if (args.kappa_p) cfg.thresholds.kappa_p = *args.kappa_p;
  if (args.uncertainty) cfg.thresholds.use_uncertainty = *args.uncertainty;
  if (args.beta) cfg.beta = *args.beta;
  if (args.lambda_h) cfg.reg.lambda_h = *args.lambda_h;
  if (args.lambda_u) cfg.reg.lambda_u = *args.lambda_u;
  if (args.noise_rate) cfg.label_noise_rate = *args.noise_rate;
  if (args.dropout) cfg.dropout = *args.dropout;
  if (args.spread) cfg.dataset.synthetic.spread = *args.spread;
  if (args.iterations) cfg.iterations = *args.iterations;
  if (args.epochs) cfg.epochs = *args.epochs;
  if (args.batch_size) cfg.batch_size = *args.batch_size;
  if (args.hidden) cfg.hidden = *args.hidden;
  if (args.balance) cfg.balance = *args.balance;
  if (!args.seeds.empty()) cfg.seeds = args.seeds;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& args) {
  auto cfg = load_config(args);
  std::cerr << "running " << derisk::scenario_name(cfg.scenario) << " / " << cfg.divergence.name()
            << " on " << cfg.dataset.source << " (" << cfg.seeds.size() << " seed"
            << (cfg.seeds.size() == 1 ? "" : "s") << ")\n";

  auto records = derisk::run_experiment(cfg);

  fs::path dir = output_dir(args.out_dir);
  fs::create_directories(dir);
  fs::path jsonl_path = dir / (derisk::scenario_name(cfg.scenario) + "_" + cfg.divergence.name() +
                               "_" + cfg.hash().substr(0, 8) + ".jsonl");
  std::ofstream out(jsonl_path);
  derisk::write_jsonl(records, out);
  out.close();

  double mean = 0.0;
  for (const auto& r : records) mean += r.final_test_accuracy;
  mean /= records.size();
  double var = 0.0;
  for (const auto& r : records) var += (r.final_test_accuracy - mean) * (r.final_test_accuracy - mean);
  double sd = records.size() > 1 ? std::sqrt(var / (records.size() - 1)) : 0.0;

  std::cout << "test accuracy: " << 100.0 * mean << " +- " << 100.0 * sd << " (%)\n";
  std::cout << "metrics: " << jsonl_path.string() << "\n";
  return kExitOk;
}

struct TheoryArgs {
  int trials = 1000;
  int instances = 5;
  int resamples = 20;
  int k = 6;
  int n = 24;
  int m = 96;
  double beta = 0.2;
  std::uint64_t seed = 1;
  bool probe_kl_metric = false;
  std::string json_out;
};

int cmd_theory(const TheoryArgs& args) {
  using namespace derisk;
  bool ok = true;
  json report;

  auto line = [&](const std::string& name, bool passed, const std::string& detail) {
    std::cout << (passed ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
    ok = ok && passed;
  };

  // metric axioms for the three admissible pairs
  for (const auto& pair : metric_pairs()) {
    auto rep = check_metric_axioms(pair.spec, pair.transform, args.trials, args.k, args.seed);
    json jr = {{"pair", pair.name},
               {"trials", rep.trials},
               {"symmetry_violations", rep.symmetry_violations},
               {"triangle_violations", rep.triangle_violations},
               {"max_symmetry_gap", rep.max_symmetry_gap},
               {"min_triangle_slack", rep.min_triangle_slack}};
    report["metric_axioms"].push_back(jr);
    line("metric axioms " + pair.name, rep.passed(),
         "symmetry violations " + std::to_string(rep.symmetry_violations) + ", triangle violations " +
             std::to_string(rep.triangle_violations));
  }

  // KL must fail the metric probe (it is asymmetric); the default suite
  // asserts the failure, --probe-kl-metric instead treats KL as admissible.
  {
    auto rep = check_metric_axioms(DivergenceSpec::kl(), MetricTransform::Identity,
                                   std::max(args.trials, 10), args.k, args.seed);
    report["kl_metric_probe"] = {{"symmetry_violations", rep.symmetry_violations},
                                 {"triangle_violations", rep.triangle_violations}};
    if (args.probe_kl_metric) {
      line("kl/identity metric probe", rep.passed(),
           "treating KL as a metric; violations are expected");
    } else {
      bool fails_as_expected = args.trials == 0 || !rep.passed();
      line("kl correctly fails the metric probe", fails_as_expected,
           std::to_string(rep.symmetry_violations) + " symmetry violations found");
    }
  }

  // Theorem 1 at 0% and 20% pseudo-label noise
  OptimizationBudget budget;
  for (const auto& pair : metric_pairs()) {
    for (double noise : {0.0, 0.2}) {
      int violations = 0;
      double min_slack = std::numeric_limits<double>::infinity();
      for (int i = 0; i < args.instances; ++i) {
        auto inst = make_theory_instance(args.k, args.n, args.m, args.beta, noise,
                                         derive_seed(args.seed, "thm1", i));
        auto rep = check_theorem1(inst, pair, budget);
        if (!rep.holds) ++violations;
        min_slack = std::min(min_slack, rep.slack);
      }
      report["theorem1"].push_back({{"pair", pair.name},
                                    {"noise", noise},
                                    {"instances", args.instances},
                                    {"violations", violations},
                                    {"min_slack", args.instances > 0 ? json(min_slack) : json(nullptr)}});
      line("theorem 1 " + pair.name + " noise " + std::to_string(noise), violations == 0,
           std::to_string(args.instances) + " instances, " + std::to_string(violations) + " violations");
    }
  }

  // Corollary 1
  for (const auto& pair : metric_pairs()) {
    auto rep = check_corollary1(args.k, args.n, args.m, args.beta, 0.2, pair, args.resamples,
                                budget, args.seed);
    report["corollary1"].push_back({{"pair", rep.pair_name},
                                    {"resamples", rep.resamples},
                                    {"mean_fsl", rep.mean_fsl},
                                    {"mean_rhs", rep.mean_rhs},
                                    {"slack", rep.slack},
                                    {"scalar_max_violation", rep.scalar_max_violation}});
    line("corollary 1 " + pair.name, rep.holds && rep.scalar_holds,
         "slack " + std::to_string(rep.slack) + ", scalar condition max violation " +
             std::to_string(rep.scalar_max_violation));
  }

  // Proposition 1 + reverse-KL witness
  {
    auto rep = check_proposition1(std::max(args.trials / 10, 1), args.k, args.n, args.seed);
    report["proposition1"] = {{"trials", rep.trials},
                              {"finite_and_nonnegative", rep.finite_and_nonnegative},
                              {"violations", rep.violations},
                              {"reverse_kl_infinite", rep.reverse_kl_infinite}};
    line("proposition 1 finiteness", rep.passed(),
         std::to_string(rep.finite_and_nonnegative) + " finite DERs, reverse-KL infinite witness " +
             (rep.reverse_kl_infinite ? "present" : "MISSING"));
  }

  // DER inequality chain
  {
    auto rep = check_der_inequalities(args.trials, args.k, args.n, args.seed);
    report["der_inequalities"] = {{"trials", rep.trials},
                                  {"pinsker_violations", rep.pinsker_violations},
                                  {"kl_chi2_violations", rep.kl_chi2_violations},
                                  {"js_lecam_violations", rep.js_lecam_violations},
                                  {"bound_violations", rep.bound_violations},
                                  {"renyi_monotone_violations", rep.renyi_monotone_violations},
                                  {"renyi_limit_violations", rep.renyi_limit_violations},
                                  {"max_violation", rep.max_violation}};
    line("der inequality chain", rep.passed(),
         std::to_string(rep.trials) + " trials, max violation " + std::to_string(rep.max_violation));
  }

  if (!args.json_out.empty()) {
    std::ofstream out(args.json_out);
    out << report.dump(2) << "\n";
    std::cout << "report: " << args.json_out << "\n";
  }
  return ok ? kExitOk : kExitTheoryViolation;
}

int cmd_report(const std::vector<std::string>& jsonl_paths, const std::string& csv_out) {
  std::vector<json> lines;
  for (const auto& path : jsonl_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    auto chunk = derisk::read_jsonl(in);
    lines.insert(lines.end(), chunk.begin(), chunk.end());
  }
  auto cells = derisk::summarize_runs(lines);
  std::cout << derisk::format_table(cells);
  if (!csv_out.empty()) {
    std::ofstream out(csv_out);
    out << derisk::format_csv(cells);
    std::cout << "csv: " << csv_out << "\n";
  }
  return kExitOk;
}

int cmd_data(const std::string& input, const std::string& cache_out, bool stats) {
  auto parsed = derisk::load_dataset_file(input);
  if (stats) {
    std::cout << "rows: " << parsed.rows() << "\n"
              << "features: " << parsed.dim() << "\n"
              << "classes: " << parsed.classes() << "\n";
  }
  if (!cache_out.empty()) {
    derisk::save_dataset_cache(parsed, cache_out);
    std::cout << "cache: " << cache_out << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"derisk - divergence-based empirical risk toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run an experiment scenario");
  train->add_option("-c,--config", train_args.config_path, "JSON config file");
  train->add_option("-o,--out", train_args.out_dir, "output directory (default $DERISK_OUT_DIR or ./runs)");
  train->add_option("--scenario", train_args.scenario, "sl | fsl | dp-ssl | dem-ssl");
  train->add_option("--divergence", train_args.divergence, "kl, tv, chi2, power:P, js, lecam, renyi:A");
  train->add_option("--dataset", train_args.source, "'synthetic' or a dataset file path");
  train->add_option("--tau-p", train_args.tau_p, "confidence threshold");
  train->add_option("--kappa-p", train_args.kappa_p, "uncertainty threshold");
  train->add_option("--uncertainty", train_args.uncertainty, "enable the uncertainty gate");
  train->add_option("--beta", train_args.beta, "labeled-block mixture weight");
  train->add_option("--lambda-h", train_args.lambda_h, "entropy regularizer weight");
  train->add_option("--lambda-u", train_args.lambda_u, "mean-prediction regularizer weight");
  train->add_option("--label-noise", train_args.noise_rate, "training label corruption rate");
  train->add_option("--dropout", train_args.dropout, "model dropout rate");
  train->add_option("--spread", train_args.spread, "synthetic mixture noise");
  train->add_option("--iterations", train_args.iterations, "self-training iterations (incl. warm-up)");
  train->add_option("--epochs", train_args.epochs, "epochs per iteration");
  train->add_option("--batch-size", train_args.batch_size);
  train->add_option("--hidden", train_args.hidden, "hidden width");
  train->add_option("--balance", train_args.balance, "balance pseudo-labels");
  train->add_option("--seeds", train_args.seeds, "run seeds");

  TheoryArgs theory_args;
  auto* theory = app.add_subcommand("theory", "run the numerical verification suite");
  theory->add_option("--trials", theory_args.trials, "random trials per check");
  theory->add_option("--instances", theory_args.instances, "theorem-1 instances per pair");
  theory->add_option("--resamples", theory_args.resamples, "corollary-1 resamples");
  theory->add_option("--classes", theory_args.k);
  theory->add_option("--labeled", theory_args.n);
  theory->add_option("--unlabeled", theory_args.m);
  theory->add_option("--beta", theory_args.beta);
  theory->add_option("--seed", theory_args.seed);
  theory->add_flag("--probe-kl-metric", theory_args.probe_kl_metric,
                   "treat KL/identity as a metric pair (expected to fail)");
  theory->add_option("--json", theory_args.json_out, "write the machine-readable report here");

  std::vector<std::string> report_inputs;
  std::string report_csv;
  auto* report = app.add_subcommand("report", "summarize JSONL metrics into a table");
  report->add_option("inputs", report_inputs, "JSONL metric files")->required();
  report->add_option("--csv", report_csv, "also write a CSV summary");

  std::string data_input, data_cache;
  bool data_stats = true;
  auto* data = app.add_subcommand("data", "inspect or cache a dataset");
  data->add_option("input", data_input, "dataset file (sparse text, .csv, or .dsc cache)")->required();
  data->add_option("--cache", data_cache, "write a binary cache (.dsc)");
  data->add_flag("--stats,!--no-stats", data_stats, "print dataset statistics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (theory->parsed()) return cmd_theory(theory_args);
    if (report->parsed()) return cmd_report(report_inputs, report_csv);
    if (data->parsed()) return cmd_data(data_input, data_cache, data_stats);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
